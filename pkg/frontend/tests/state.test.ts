import { describe, expect, it } from "vitest";

import type { DatasetResponse, ResultsDoc, RunStatus } from "../src/api.js";
import {
  applyDataset,
  applyResults,
  applyRunStatus,
  applyRunSubmitted,
  applyUploadFailure,
  canDownloadReport,
  canRun,
  canShowResults,
  initialState,
  runActive,
  setTab,
} from "../src/state.js";

function dataset(id = "d1"): DatasetResponse {
  return {
    dataset_id: id,
    source: "sample.csv",
    n_studies: 2,
    class_counts: { observed: 1, exact_zero: 0, censored: 1 },
    rows: [],
    violations: [],
    warnings: [],
  };
}

function status(overrides: Partial<RunStatus> = {}): RunStatus {
  return {
    job_id: "j1",
    dataset_id: "d1",
    state: "running",
    progress: { overall: 0.5, models: { magec: [0.5] } },
    config: {
      model: { prior_scale_a: 2.5, mu_prior_variance: 10_000 },
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
    completed_at: null,
    error: null,
    ...overrides,
  };
}

function resultsDoc(): ResultsDoc {
  return {
    schema: "magec-results-v1",
    dataset: { source: "sample.csv", n_studies: 2, class_counts: {}, studies: [] },
    config: {},
    magec: {},
    complete_case: null,
    comparison: null,
    warnings: [],
    rendered: {
      narrative: "n",
      summary_table_magec: { columns: [], rows: [] },
      summary_table_complete_case: null,
      comparison_text: null,
    },
  };
}

describe("run gating", () => {
  it("requires a dataset before anything can run", () => {
    const state = initialState();
    expect(canRun(state)).toBe(false);
    applyDataset(state, dataset());
    expect(canRun(state)).toBe(true);
  });

  it("blocks on settings errors", () => {
    const state = initialState();
    applyDataset(state, dataset());
    state.settingsErrors = ["burn-in must be smaller than the number of iterations"];
    expect(canRun(state)).toBe(false);
  });

  it("allows a single active run at a time", () => {
    const state = initialState();
    applyDataset(state, dataset());
    applyRunSubmitted(state, "j1");
    expect(runActive(state)).toBe(true); // no status yet counts as queued
    expect(canRun(state)).toBe(false);
    applyRunStatus(state, status({ state: "running" }));
    expect(canRun(state)).toBe(false);
    applyRunStatus(state, status({ state: "done" }));
    expect(runActive(state)).toBe(false);
    expect(canRun(state)).toBe(true); // finished runs free the slot
  });

  it("frees the slot on failure", () => {
    const state = initialState();
    applyDataset(state, dataset());
    applyRunSubmitted(state, "j1");
    applyRunStatus(state, status({ state: "failed", error: "boom" }));
    expect(canRun(state)).toBe(true);
  });

  it("ignores status documents for a superseded job", () => {
    const state = initialState();
    applyDataset(state, dataset());
    applyRunSubmitted(state, "j2");
    applyRunStatus(state, status({ job_id: "j1", state: "done" }));
    expect(state.run?.status).toBeNull();
  });
});

describe("upload transitions", () => {
  it("replaces the dataset and clears downstream state", () => {
    const state = initialState();
    applyDataset(state, dataset("d1"));
    applyRunSubmitted(state, "j1");
    applyRunStatus(state, status({ state: "done" }));
    applyResults(state, resultsDoc());
    expect(state.activeTab).toBe("results");

    applyDataset(state, dataset("d2"));
    expect(state.dataset?.dataset_id).toBe("d2");
    expect(state.run).toBeNull();
    expect(state.results).toBeNull();
    expect(state.activeTab).toBe("guide");
    expect(canDownloadReport(state)).toBe(false);
  });

  it("keeps the current dataset when an upload is rejected", () => {
    const state = initialState();
    applyDataset(state, dataset("d1"));
    applyUploadFailure(state, [
      { study_id: "a", field: "Y", message: "bad", severity: "error" },
    ]);
    expect(state.dataset?.dataset_id).toBe("d1");
    expect(state.uploadErrors).toHaveLength(1);
    // the next successful upload clears the error display
    applyDataset(state, dataset("d2"));
    expect(state.uploadErrors).toBeNull();
  });
});

describe("results tab gating", () => {
  it("cannot activate before results exist", () => {
    const state = initialState();
    setTab(state, "results");
    expect(state.activeTab).toBe("guide");
    applyResults(state, resultsDoc());
    expect(state.activeTab).toBe("results");
    setTab(state, "guide");
    expect(state.activeTab).toBe("guide");
    setTab(state, "results");
    expect(state.activeTab).toBe("results");
  });

  it("report download requires a done job", () => {
    const state = initialState();
    expect(canDownloadReport(state)).toBe(false);
    applyDataset(state, dataset());
    applyRunSubmitted(state, "j1");
    expect(canDownloadReport(state)).toBe(false);
    applyRunStatus(state, status({ state: "running" }));
    expect(canDownloadReport(state)).toBe(false);
    applyRunStatus(state, status({ state: "done" }));
    expect(canDownloadReport(state)).toBe(true);
    expect(canShowResults(state)).toBe(false); // results doc not fetched yet
  });
});
