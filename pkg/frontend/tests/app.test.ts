import { beforeEach, describe, expect, it } from "vitest";

import {
  ApiError,
  type DatasetResponse,
  type ForestOptions,
  type ResultsDoc,
  type RunRequestBody,
  type RunStatus,
} from "../src/api.js";
import { createApp, type ApiSurface, type MagecApp } from "../src/app.js";
import { mountPage, until } from "./helpers.js";

const DATASET: DatasetResponse = {
  dataset_id: "d1",
  source: "sample.csv",
  n_studies: 2,
  class_counts: { observed: 1, exact_zero: 0, censored: 1 },
  rows: [
    {
      study_id: "alpha",
      n_treated: 100,
      observed_count: 4,
      cutoff: 0,
      classification: "observed",
    },
    {
      study_id: "beta",
      n_treated: 459,
      observed_count: null,
      cutoff: 9,
      classification: "censored",
    },
  ],
  violations: [],
  warnings: [],
};

const RESULTS: ResultsDoc = {
  schema: "magec-results-v1",
  dataset: { source: "sample.csv", n_studies: 2, class_counts: {}, studies: [] },
  config: {},
  magec: {},
  complete_case: {},
  comparison: { magec_median: 0.004, cc_median: 0.005, relative_bias_percent: 25 },
  warnings: [],
  rendered: {
    narrative: "narrative text",
    summary_table_magec: {
      columns: ["quantity", "median"],
      rows: [["Overall incidence (%)", "0.40"]],
    },
    summary_table_complete_case: null,
    comparison_text: "comparison text",
  },
};

/** Scripted fake service: one job that needs `ticks` polls to finish. */
class FakeApi implements ApiSurface {
  uploads: Array<{ csv: string; filename: string }> = [];
  submitted: RunRequestBody[] = [];
  forestRequests: Array<ForestOptions | undefined> = [];
  polls = 0;
  failWith: string | null = null;
  rejectUpload = false;

  constructor(private readonly ticks: number = 2) {}

  async uploadDataset(csv: string, filename: string): Promise<DatasetResponse> {
    if (this.rejectUpload) {
      throw new ApiError(422, "rejected", [
        { study_id: "alpha", field: "Y", message: "count exceeds N", severity: "error" },
      ]);
    }
    this.uploads.push({ csv, filename });
    return { ...DATASET, dataset_id: `d${this.uploads.length}` };
  }

  async submitRun(body: RunRequestBody): Promise<{ job_id: string }> {
    this.submitted.push(body);
    return { job_id: "job-1" };
  }

  async getStatus(jobId: string): Promise<RunStatus> {
    this.polls += 1;
    const finished = this.polls >= this.ticks;
    const failed = finished && this.failWith !== null;
    return {
      job_id: jobId,
      dataset_id: "d1",
      state: failed ? "failed" : finished ? "done" : "running",
      progress: {
        overall: finished ? 1 : 0.5,
        models: { magec: [finished ? 1 : 0.5] },
      },
      config: {
        model: { prior_scale_a: 2.5, mu_prior_variance: 1e4 },
        mcmc: {
          n_chains: 1,
          n_iter: 1000,
          burn_in: 0,
          thin: 1,
          seed: 1,
          target_acceptance: 0.44,
        },
        run_complete_case: true,
      },
      created_at: 0,
      completed_at: finished ? 1 : null,
      error: failed ? this.failWith : null,
    };
  }

  async getResults(): Promise<ResultsDoc> {
    return RESULTS;
  }

  async fetchForestSvg(
    _jobId: string,
    _model: "magec" | "cc",
    options?: ForestOptions,
  ): Promise<string> {
    this.forestRequests.push(options);
    return `<svg xmlns="http://www.w3.org/2000/svg"><text>decimals=${options?.decimals}</text></svg>`;
  }

  async fetchReport(): Promise<string> {
    if (this.polls < this.ticks) throw new ApiError(409, "job is running");
    return "<!DOCTYPE html><html><body>report</body></html>";
  }

  sampleCsvUrl(): string {
    return "/sample.csv";
  }
}

function runButton(): HTMLButtonElement {
  return document.getElementById("run-button") as HTMLButtonElement;
}

function reportButton(): HTMLButtonElement {
  return document.getElementById("report-button") as HTMLButtonElement;
}

function setField(id: string, value: string): void {
  const input = document.getElementById(id) as HTMLInputElement;
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

describe("page wiring", () => {
  let api: FakeApi;
  let app: MagecApp;

  beforeEach(() => {
    mountPage();
    api = new FakeApi();
    app = createApp(document, api, { pollIntervalMs: 10 });
  });

  it("starts with defaults in the form and run disabled", () => {
    expect(app.readSettings().seed).toBe(20240601);
    expect(app.readSettings().nIter).toBe(100_000);
    expect(runButton().disabled).toBe(true); // no dataset yet
    expect(reportButton().disabled).toBe(true);
    expect((document.getElementById("tab-results-btn") as HTMLButtonElement).disabled).toBe(true);
  });

  it("enables run after a successful upload and shows the overview", async () => {
    await app.uploadCsv("study,N,cutoff,Y\n", "mine.csv");
    expect(api.uploads[0].filename).toBe("mine.csv");
    expect(runButton().disabled).toBe(false);
    expect(document.getElementById("dataset-panel")?.textContent).toContain("alpha");
    expect(document.querySelectorAll(".badge-censored")).toHaveLength(1);
  });

  it("shows inline violations on a rejected upload and keeps the form state", async () => {
    setField("set-seed", "777");
    api.rejectUpload = true;
    await app.uploadCsv("bad", "bad.csv");
    expect(document.getElementById("upload-errors")?.textContent).toContain(
      "count exceeds N",
    );
    expect(app.readSettings().seed).toBe(777);
    expect(runButton().disabled).toBe(true); // still no dataset
  });

  it("rejects burn-in >= iterations client-side before any request", async () => {
    await app.uploadCsv("x", "x.csv");
    setField("set-burnin", "100000");
    expect(runButton().disabled).toBe(true);
    expect(document.getElementById("settings-errors")?.textContent).toContain(
      "burn-in must be smaller",
    );
    await app.startRun();
    expect(api.submitted).toHaveLength(0);
    setField("set-burnin", "50000");
    expect(runButton().disabled).toBe(false);
  });

  it("runs to completion: polling, results tab, forest, report", async () => {
    await app.uploadCsv("x", "x.csv");
    await app.startRun();
    expect(api.submitted[0]).toMatchObject({
      dataset_id: "d1",
      mcmc: { seed: 20240601, n_iter: 100_000 },
    });
    expect(runButton().disabled).toBe(true); // one active run at a time
    expect(reportButton().disabled).toBe(true);

    const early = await app.downloadReport();
    expect(early).toBeNull();
    expect(document.getElementById("report-message")?.textContent).toBe(
      "run not finished",
    );

    await until(() => app.state().results !== null, 2000);
    app.stopPolling();

    expect(app.state().activeTab).toBe("results");
    expect(document.getElementById("results-root")?.textContent).toContain(
      "narrative text",
    );
    expect(document.getElementById("forest-container")?.innerHTML).toContain("<svg");
    expect(runButton().disabled).toBe(false);
    expect(reportButton().disabled).toBe(false);

    const download = await app.downloadReport();
    expect(download?.html).toContain("report");
    expect(download?.filename).toMatch(/^magec-report-sample-\d{4}-\d{2}-\d{2}\.html$/);
    expect(document.getElementById("report-message")?.textContent).toBe("");
  });

  it("re-renders the forest when display options change", async () => {
    await app.uploadCsv("x", "x.csv");
    await app.startRun();
    await until(() => app.state().results !== null, 2000);
    app.stopPolling();
    expect(api.forestRequests.at(-1)).toMatchObject({ decimals: 2, sort: "data" });

    await app.setForestOptions({ decimals: 4 });
    expect(api.forestRequests.at(-1)).toMatchObject({ decimals: 4, sort: "data" });
    expect(document.getElementById("forest-container")?.textContent).toContain(
      "decimals=4",
    );
  });

  it("shows the error panel when the job fails and frees the run slot", async () => {
    api.failWith = "fewer than 2 studies report an event count";
    await app.uploadCsv("x", "x.csv");
    await app.startRun();
    await until(() => app.state().run?.status?.state === "failed", 2000);
    app.stopPolling();

    expect(document.querySelector(".error-panel")?.textContent).toContain(
      "fewer than 2 studies",
    );
    expect(app.state().results).toBeNull();
    expect(
      (document.getElementById("tab-results-btn") as HTMLButtonElement).disabled,
    ).toBe(true);
    expect(runButton().disabled).toBe(false); // can adjust settings and retry
    expect(app.readSettings().nIter).toBe(100_000); // settings preserved
  });

  it("re-upload replaces the dataset and clears previous results", async () => {
    await app.uploadCsv("x", "x.csv");
    await app.startRun();
    await until(() => app.state().results !== null, 2000);
    app.stopPolling();

    await app.uploadCsv("y", "second.csv");
    expect(app.state().dataset?.dataset_id).toBe("d2");
    expect(app.state().results).toBeNull();
    expect(app.state().activeTab).toBe("guide");
    expect(reportButton().disabled).toBe(true);
  });

  it("keeps the results tab gated behind a finished job", async () => {
    app.switchTab("results");
    expect(app.state().activeTab).toBe("guide");
    expect(
      document.getElementById("tab-results")?.classList.contains("hidden"),
    ).toBe(true);

    await app.uploadCsv("x", "x.csv");
    await app.startRun();
    await until(() => app.state().results !== null, 2000);
    app.stopPolling();
    expect(
      document.getElementById("tab-results")?.classList.contains("hidden"),
    ).toBe(false);
    app.switchTab("guide");
    app.switchTab("results");
    expect(app.state().activeTab).toBe("results");
  });
});
