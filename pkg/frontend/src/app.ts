/** Page wiring: binds the control panel, tabs, polling loop, and downloads.
 * All statistical content is fetched from the service and displayed verbatim. */
import {
  ApiError,
  type DatasetResponse,
  type ForestModel,
  type ForestOptions,
  type ResultsDoc,
  type RunRequestBody,
  type RunStatus,
} from "./api.js";
import {
  DEFAULT_SETTINGS,
  type Settings,
  toRunRequest,
  validateSettings,
} from "./settings.js";
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
  type Tab,
  type UiState,
} from "./state.js";
import {
  renderDatasetOverview,
  renderProgress,
  renderReportMessage,
  renderResults,
  renderSettingsErrors,
  renderUploadErrors,
  reportFilename,
} from "./views.js";

/** The slice of the API client the page needs; `MagecApi` satisfies it. */
export interface ApiSurface {
  uploadDataset(csvText: string, filename: string): Promise<DatasetResponse>;
  submitRun(body: RunRequestBody): Promise<{ job_id: string }>;
  getStatus(jobId: string): Promise<RunStatus>;
  getResults(jobId: string): Promise<ResultsDoc>;
  fetchForestSvg(
    jobId: string,
    model: ForestModel,
    options?: ForestOptions,
  ): Promise<string>;
  fetchReport(jobId: string): Promise<string>;
  sampleCsvUrl(): string;
}

export interface AppOptions {
  pollIntervalMs?: number;
  now?: () => Date;
}

export interface MagecApp {
  state(): UiState;
  uploadCsv(csvText: string, filename: string): Promise<void>;
  startRun(): Promise<void>;
  downloadReport(): Promise<{ filename: string; html: string } | null>;
  setForestOptions(options: Partial<UiState["forest"]>): Promise<void>;
  switchTab(tab: Tab): void;
  readSettings(): Settings;
  stopPolling(): void;
}

function byId<T extends HTMLElement>(doc: Document, id: string): T {
  const node = doc.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

export function createApp(
  doc: Document,
  api: ApiSurface,
  options: AppOptions = {},
): MagecApp {
  const pollIntervalMs = options.pollIntervalMs ?? 1000;
  const now = options.now ?? (() => new Date());
  const state = initialState();
  let pollTimer: ReturnType<typeof setInterval> | null = null;
  let pollInFlight = false;
  let submitError: string | null = null;

  const uploadInput = byId<HTMLInputElement>(doc, "upload-input");
  const uploadErrors = byId<HTMLElement>(doc, "upload-errors");
  const datasetPanel = byId<HTMLElement>(doc, "dataset-panel");
  const sampleLink = byId<HTMLAnchorElement>(doc, "sample-link");
  const settingsErrorsEl = byId<HTMLElement>(doc, "settings-errors");
  const runButton = byId<HTMLButtonElement>(doc, "run-button");
  const runPanel = byId<HTMLElement>(doc, "run-panel");
  const reportButton = byId<HTMLButtonElement>(doc, "report-button");
  const reportMessageEl = byId<HTMLElement>(doc, "report-message");
  const tabGuideBtn = byId<HTMLButtonElement>(doc, "tab-guide-btn");
  const tabResultsBtn = byId<HTMLButtonElement>(doc, "tab-results-btn");
  const tabGuide = byId<HTMLElement>(doc, "tab-guide");
  const tabResults = byId<HTMLElement>(doc, "tab-results");
  const resultsRoot = byId<HTMLElement>(doc, "results-root");
  const forestDecimals = byId<HTMLSelectElement>(doc, "forest-decimals");
  const forestSort = byId<HTMLSelectElement>(doc, "forest-sort");
  const forestContainer = byId<HTMLElement>(doc, "forest-container");

  const fields: Record<keyof Omit<Settings, "runCompleteCase">, HTMLInputElement> = {
    priorScaleA: byId<HTMLInputElement>(doc, "set-prior-a"),
    muPriorVariance: byId<HTMLInputElement>(doc, "set-mu-var"),
    nChains: byId<HTMLInputElement>(doc, "set-chains"),
    nIter: byId<HTMLInputElement>(doc, "set-iterations"),
    burnIn: byId<HTMLInputElement>(doc, "set-burnin"),
    thin: byId<HTMLInputElement>(doc, "set-thin"),
    seed: byId<HTMLInputElement>(doc, "set-seed"),
  };
  const completeCaseBox = byId<HTMLInputElement>(doc, "set-cc");

  function writeSettings(s: Settings): void {
    for (const [key, input] of Object.entries(fields)) {
      input.value = String(s[key as keyof typeof fields]);
    }
    completeCaseBox.checked = s.runCompleteCase;
  }

  function readSettings(): Settings {
    const num = (input: HTMLInputElement) =>
      input.value.trim() === "" ? NaN : Number(input.value);
    return {
      priorScaleA: num(fields.priorScaleA),
      muPriorVariance: num(fields.muPriorVariance),
      nChains: num(fields.nChains),
      nIter: num(fields.nIter),
      burnIn: num(fields.burnIn),
      thin: num(fields.thin),
      seed: num(fields.seed),
      runCompleteCase: completeCaseBox.checked,
    };
  }

  function render(): void {
    renderUploadErrors(uploadErrors, state.uploadErrors);
    renderDatasetOverview(datasetPanel, state.dataset);
    renderSettingsErrors(settingsErrorsEl, state.settingsErrors);
    renderProgress(runPanel, state.run);
    if (submitError !== null) {
      const p = doc.createElement("p");
      p.className = "error-text";
      p.textContent = submitError;
      runPanel.prepend(p);
    }
    renderResults(resultsRoot, state.results);
    renderReportMessage(reportMessageEl, state.reportMessage);

    runButton.disabled = !canRun(state);
    reportButton.disabled = !canDownloadReport(state);
    tabResultsBtn.disabled = !canShowResults(state);
    tabGuideBtn.classList.toggle("active", state.activeTab === "guide");
    tabResultsBtn.classList.toggle("active", state.activeTab === "results");
    tabGuide.classList.toggle("hidden", state.activeTab !== "guide");
    tabResults.classList.toggle("hidden", state.activeTab !== "results");
  }

  function refreshSettingsValidation(): void {
    state.settingsErrors = validateSettings(readSettings());
    render();
  }

  function stopPolling(): void {
    if (pollTimer !== null) {
      clearInterval(pollTimer);
      pollTimer = null;
    }
  }

  async function loadForest(): Promise<void> {
    if (state.run === null) return;
    const model: ForestModel = "magec";
    try {
      const svg = await api.fetchForestSvg(state.run.jobId, model, state.forest);
      forestContainer.innerHTML = svg;
    } catch (error) {
      forestContainer.textContent =
        error instanceof ApiError ? error.message : "forest plot unavailable";
    }
  }

  async function finishRun(jobId: string): Promise<void> {
    try {
      const results = await api.getResults(jobId);
      applyResults(state, results);
      render();
      await loadForest();
    } catch (error) {
      submitError =
        error instanceof ApiError
          ? `could not fetch results: ${error.message}`
          : "could not fetch results";
      render();
    }
  }

  async function pollOnce(): Promise<void> {
    if (state.run === null || pollInFlight) return;
    pollInFlight = true;
    try {
      const status = await api.getStatus(state.run.jobId);
      applyRunStatus(state, status);
      if (status.state === "done") {
        stopPolling();
        render();
        await finishRun(status.job_id);
      } else if (status.state === "failed") {
        stopPolling();
        render();
      } else {
        render();
      }
    } catch (error) {
      stopPolling();
      submitError =
        error instanceof ApiError
          ? `lost track of the run: ${error.message}`
          : "lost track of the run: network error";
      render();
    } finally {
      pollInFlight = false;
    }
  }

  function startPolling(): void {
    stopPolling();
    pollTimer = setInterval(() => {
      void pollOnce();
    }, pollIntervalMs);
  }

  async function uploadCsv(csvText: string, filename: string): Promise<void> {
    try {
      const response = await api.uploadDataset(csvText, filename);
      stopPolling();
      applyDataset(state, response);
      submitError = null;
    } catch (error) {
      if (error instanceof ApiError && error.violations.length > 0) {
        applyUploadFailure(state, error.violations);
      } else {
        applyUploadFailure(state, [
          {
            study_id: null,
            field: null,
            message: error instanceof ApiError ? error.message : "upload failed",
            severity: "error",
          },
        ]);
      }
    }
    refreshSettingsValidation();
  }

  async function startRun(): Promise<void> {
    refreshSettingsValidation();
    if (!canRun(state) || state.dataset === null) return;
    submitError = null;
    try {
      const submitted = await api.submitRun(
        toRunRequest(state.dataset.dataset_id, readSettings()),
      );
      applyRunSubmitted(state, submitted.job_id);
      startPolling();
    } catch (error) {
      submitError =
        error instanceof ApiError
          ? `run rejected: ${error.message}`
          : "run rejected: network error";
    }
    render();
  }

  async function downloadReport(): Promise<{ filename: string; html: string } | null> {
    if (state.run === null || !canDownloadReport(state)) {
      state.reportMessage = "run not finished";
      render();
      return null;
    }
    try {
      const html = await api.fetchReport(state.run.jobId);
      const source = state.dataset?.source ?? state.results?.dataset.source ?? "dataset";
      const filename = reportFilename(source, now());
      state.reportMessage = null;
      render();
      saveHtml(doc, html, filename);
      return { filename, html };
    } catch (error) {
      state.reportMessage =
        error instanceof ApiError && error.status === 409
          ? "run not finished"
          : "report download failed";
      render();
      return null;
    }
  }

  async function setForestOptions(options: Partial<UiState["forest"]>): Promise<void> {
    state.forest = { ...state.forest, ...options };
    forestDecimals.value = String(state.forest.decimals);
    forestSort.value = state.forest.sort;
    if (canShowResults(state)) await loadForest();
  }

  function switchTab(tab: Tab): void {
    setTab(state, tab);
    render();
  }

  // -- event wiring --

  uploadInput.addEventListener("change", () => {
    const file = uploadInput.files?.[0];
    if (!file) return;
    void file.text().then((text) => uploadCsv(text, file.name));
  });
  for (const input of Object.values(fields)) {
    input.addEventListener("input", refreshSettingsValidation);
  }
  completeCaseBox.addEventListener("change", refreshSettingsValidation);
  runButton.addEventListener("click", () => void startRun());
  reportButton.addEventListener("click", () => void downloadReport());
  tabGuideBtn.addEventListener("click", () => switchTab("guide"));
  tabResultsBtn.addEventListener("click", () => switchTab("results"));
  forestDecimals.addEventListener("change", () =>
    void setForestOptions({ decimals: Number(forestDecimals.value) }),
  );
  forestSort.addEventListener("change", () =>
    void setForestOptions({ sort: forestSort.value === "estimate" ? "estimate" : "data" }),
  );
  doc.defaultView?.addEventListener("pagehide", stopPolling);

  sampleLink.href = api.sampleCsvUrl();
  writeSettings(DEFAULT_SETTINGS);
  forestDecimals.value = String(state.forest.decimals);
  forestSort.value = state.forest.sort;
  refreshSettingsValidation();

  return {
    state: () => state,
    uploadCsv,
    startRun,
    downloadReport,
    setForestOptions,
    switchTab,
    readSettings,
    stopPolling,
  };
}

/** Browser-only save helper; quietly does nothing where blob URLs are
 * unavailable (the e2e runtime) — callers still receive the bytes. */
function saveHtml(doc: Document, html: string, filename: string): void {
  const view = doc.defaultView;
  if (!view || typeof view.URL?.createObjectURL !== "function") return;
  const blob = new view.Blob([html], { type: "text/html" });
  const url = view.URL.createObjectURL(blob);
  const anchor = doc.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  doc.body.append(anchor);
  anchor.click();
  anchor.remove();
  view.URL.revokeObjectURL(url);
}
