/** Single-page UI state and its transition rules. One dataset, one active
 * run, results tab reachable only from a finished job. */
import type {
  DatasetResponse,
  ResultsDoc,
  RunStatus,
  Violation,
} from "./api.js";

export type Tab = "guide" | "results";

export interface ForestView {
  decimals: number;
  sort: "data" | "estimate";
}

export interface RunState {
  jobId: string;
  status: RunStatus | null; // null until the first poll lands
}

export interface UiState {
  dataset: DatasetResponse | null;
  uploadErrors: Violation[] | null;
  settingsErrors: string[];
  run: RunState | null;
  results: ResultsDoc | null;
  activeTab: Tab;
  forest: ForestView;
  reportMessage: string | null;
}

export function initialState(): UiState {
  return {
    dataset: null,
    uploadErrors: null,
    settingsErrors: [],
    run: null,
    results: null,
    activeTab: "guide",
    forest: { decimals: 2, sort: "data" },
    reportMessage: null,
  };
}

export function runActive(state: UiState): boolean {
  if (state.run === null) return false;
  const jobState = state.run.status?.state ?? "queued";
  return jobState === "queued" || jobState === "running";
}

export function canRun(state: UiState): boolean {
  return (
    state.dataset !== null &&
    state.settingsErrors.length === 0 &&
    !runActive(state)
  );
}

export function canDownloadReport(state: UiState): boolean {
  return state.run !== null && state.run.status?.state === "done";
}

export function canShowResults(state: UiState): boolean {
  return state.results !== null;
}

/** Successful upload: the new dataset replaces everything downstream of it. */
export function applyDataset(state: UiState, dataset: DatasetResponse): void {
  state.dataset = dataset;
  state.uploadErrors = null;
  state.run = null;
  state.results = null;
  state.activeTab = "guide";
  state.reportMessage = null;
}

/** Rejected upload: violations shown inline, current dataset and form kept. */
export function applyUploadFailure(state: UiState, violations: Violation[]): void {
  state.uploadErrors = violations;
}

export function applyRunSubmitted(state: UiState, jobId: string): void {
  state.run = { jobId, status: null };
  state.results = null;
  state.activeTab = "guide";
  state.reportMessage = null;
}

export function applyRunStatus(state: UiState, status: RunStatus): void {
  if (state.run === null || state.run.jobId !== status.job_id) return;
  state.run.status = status;
}

export function applyResults(state: UiState, doc: ResultsDoc): void {
  state.results = doc;
  state.activeTab = "results";
}

export function setTab(state: UiState, tab: Tab): void {
  if (tab === "results" && !canShowResults(state)) return;
  state.activeTab = tab;
}
