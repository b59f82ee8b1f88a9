/** End-to-end: the real page logic against a live service process, no mocks.
 * Uploads the sample dataset, runs the default analysis, and checks that the
 * Results tab shows exactly what the results endpoint reports. */
import { spawn, type ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, MagecApi, type ResultsDoc } from "../src/api.js";
import { createApp, type MagecApp } from "../src/app.js";
import { reportFilename } from "../src/views.js";
import { mountPage, until } from "./helpers.js";

const RUN_TIMEOUT_MS = 420_000;

let child: ChildProcess | null = null;
let base = "";
let api: MagecApi;
let serverLog = "";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  api = new MagecApi(base);
  child = spawn(
    "python3",
    ["-m", "magec.cli", "serve", "--host", "127.0.0.1", "--port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  child.stdout?.on("data", (chunk) => (serverLog += chunk));
  child.stderr?.on("data", (chunk) => (serverLog += chunk));

  const deadline = Date.now() + 45_000;
  for (;;) {
    if (child.exitCode !== null) {
      throw new Error(`service exited early (${child.exitCode}):\n${serverLog}`);
    }
    try {
      const response = await fetch(`${base}/openapi.json`);
      if (response.ok) break;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service did not come up:\n${serverLog}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
}, 60_000);

afterAll(() => {
  child?.kill("SIGTERM");
});

describe("browser flow against the live service", () => {
  let app: MagecApp;

  it(
    "covers upload, default run, results parity, report, and forest options",
    async () => {
      mountPage();
      app = createApp(document, api, { pollIntervalMs: 1000 });

      // -- upload flow: a broken file first; inline violations, no dataset --
      await app.uploadCsv("study,N,cutoff,Y\nalpha,10,0,11\nbeta,20,0,1\n", "bad.csv");
      expect(document.getElementById("upload-errors")?.textContent).toContain("alpha");
      expect(app.state().dataset).toBeNull();
      expect((document.getElementById("run-button") as HTMLButtonElement).disabled).toBe(true);

      // -- the sample dataset, fetched from the service itself --
      const sampleCsv = await (await fetch(api.sampleCsvUrl())).text();
      await app.uploadCsv(sampleCsv, "sample.csv");
      expect(app.state().uploadErrors).toBeNull();
      const overview = document.getElementById("dataset-panel")!;
      expect(overview.querySelectorAll("tbody tr")).toHaveLength(15);
      expect(overview.querySelectorAll(".badge-censored")).toHaveLength(2);
      expect(overview.textContent).toContain("15 studies: 9 observed, 4 exact zero, 2 censored");
      expect((document.getElementById("run-button") as HTMLButtonElement).disabled).toBe(false);

      // -- defaults in the form mirror the reference configuration --
      const settings = app.readSettings();
      expect(settings).toMatchObject({
        priorScaleA: 2.5,
        muPriorVariance: 10_000,
        nChains: 3,
        nIter: 100_000,
        burnIn: 50_000,
        thin: 5,
        seed: 20240601,
        runCompleteCase: true,
      });

      // -- run with those defaults --
      await app.startRun();
      const jobId = app.state().run!.jobId;
      expect((document.getElementById("run-button") as HTMLButtonElement).disabled).toBe(true);
      expect((document.getElementById("report-button") as HTMLButtonElement).disabled).toBe(true);

      // report is refused while the job is unfinished
      await expect(api.fetchReport(jobId)).rejects.toMatchObject({ status: 409 });
      const early = await app.downloadReport();
      expect(early).toBeNull();
      expect(document.getElementById("report-message")?.textContent).toBe("run not finished");

      // per-chain progress becomes visible mid-run
      await until(
        () => document.querySelectorAll("#run-panel .progress-fill").length > 0,
        60_000,
        250,
      );
      const sawPartial = await (async () => {
        const deadline = Date.now() + RUN_TIMEOUT_MS;
        while (Date.now() < deadline) {
          if (app.state().results !== null) return false;
          const status = app.state().run?.status;
          if (status && status.state === "running" && status.progress.overall > 0 && status.progress.overall < 1) {
            return true;
          }
          await new Promise((resolve) => setTimeout(resolve, 200));
        }
        return false;
      })();
      expect(sawPartial).toBe(true);

      await until(() => app.state().results !== null, RUN_TIMEOUT_MS, 500);
      app.stopPolling();
      expect(app.state().run?.status?.state).toBe("done");
      expect(app.state().activeTab).toBe("results");

      // -- parity: the tab shows exactly what the results endpoint returns --
      const doc: ResultsDoc = await (await fetch(`${base}/api/runs/${jobId}/results`)).json();
      const resultsRoot = document.getElementById("results-root")!;
      expect(resultsRoot.querySelector(".narrative")?.textContent).toBe(doc.rendered.narrative);
      expect(resultsRoot.querySelector(".comparison")?.textContent).toBe(
        doc.rendered.comparison_text,
      );
      const tables = resultsRoot.querySelectorAll("table.summary-table");
      expect(tables).toHaveLength(2);
      const uiCells = (table: Element) =>
        [...table.querySelectorAll("tbody tr")].map((tr) =>
          [...tr.children].map((cell) => cell.textContent),
        );
      expect(uiCells(tables[0])).toEqual(doc.rendered.summary_table_magec.rows);
      expect(uiCells(tables[1])).toEqual(doc.rendered.summary_table_complete_case!.rows);
      // default run on the sample data converges: no amber banner
      expect(doc.warnings).toEqual([]);
      expect(resultsRoot.querySelector(".warning-banner")).toBeNull();

      // the inline forest is the served artifact (compared through the same
      // parser, since innerHTML re-serializes the SVG)
      const asRendered = (svg: string) => {
        const scratch = document.createElement("div");
        scratch.innerHTML = svg;
        return scratch.innerHTML;
      };
      const storedForest = await (
        await fetch(`${base}/api/runs/${jobId}/forest/magec.svg`)
      ).text();
      expect(document.getElementById("forest-container")?.innerHTML).toBe(
        asRendered(storedForest),
      );

      // -- report: identical on re-download, self-contained, named after the data --
      const first = await app.downloadReport();
      const second = await app.downloadReport();
      expect(first).not.toBeNull();
      expect(second?.html).toBe(first?.html);
      expect(first?.html.startsWith("<!DOCTYPE html>")).toBe(true);
      expect(first?.html).toContain("<svg");
      expect(first?.html).not.toMatch(/<(script|link|img)[^>]*\s(src|href)=["']https?:/);
      expect(first?.filename).toBe(reportFilename("sample.csv", new Date()));
      expect(first?.filename).toContain("sample");

      // -- forest display options: server re-render differs and is stable --
      const custom = await api.fetchForestSvg(jobId, "magec", {
        decimals: 3,
        sort: "estimate",
      });
      expect(custom).not.toBe(storedForest);
      expect(
        await api.fetchForestSvg(jobId, "magec", { decimals: 3, sort: "estimate" }),
      ).toBe(custom);

      await app.setForestOptions({ decimals: 3, sort: "estimate" });
      expect(document.getElementById("forest-container")?.innerHTML).toBe(
        asRendered(custom),
      );
      await app.setForestOptions({ decimals: 2, sort: "data" });
      expect(document.getElementById("forest-container")?.innerHTML).toBe(
        asRendered(storedForest),
      );

      // bad options are rejected by the server, not silently accepted
      await expect(
        api.fetchForestSvg(jobId, "magec", { decimals: 9 }),
      ).rejects.toBeInstanceOf(ApiError);
    },
    RUN_TIMEOUT_MS + 120_000,
  );

  it("surfaces a failed analysis as an error panel with settings intact", async () => {
    mountPage();
    app = createApp(document, api, { pollIntervalMs: 250 });
    // valid contract, but only one study reports a count: the fit itself fails
    await app.uploadCsv("study,N,cutoff,Y\na,50,0,2\nb,60,4,\nc,70,5,\n", "thin.csv");
    expect(app.state().dataset).not.toBeNull();

    // a small run through the form, to prove the inputs reach the service
    const setField = (id: string, value: string) => {
      const input = document.getElementById(id) as HTMLInputElement;
      input.value = value;
      input.dispatchEvent(new Event("input", { bubbles: true }));
    };
    setField("set-iterations", "2000");
    setField("set-burnin", "1000");
    setField("set-thin", "1");

    await app.startRun();
    await until(() => app.state().run?.status?.state === "failed", 120_000, 250);
    app.stopPolling();
    expect(app.state().run?.status?.config.mcmc.n_iter).toBe(2000);
    expect(document.querySelector("#run-panel .error-panel")?.textContent).toContain(
      "fewer than 2 studies report an event count",
    );
    expect(app.readSettings().nIter).toBe(2000); // form untouched by the failure
    expect((document.getElementById("run-button") as HTMLButtonElement).disabled).toBe(false);
  }, 180_000);
});
