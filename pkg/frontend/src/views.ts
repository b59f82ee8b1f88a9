/** DOM rendering. Every number or sentence shown here is a server-rendered
 * string taken verbatim from an API response; this module only lays them out. */
import type {
  DatasetResponse,
  ResultsDoc,
  RunStatus,
  SummaryTable,
  Violation,
} from "./api.js";
import type { RunState } from "./state.js";

const COLUMN_LABELS: Record<string, string> = {
  quantity: "Quantity",
  median: "Median",
  sd: "SD",
  cri_lower: "95% CrI lower",
  cri_upper: "95% CrI upper",
  mean: "Mean",
  mcse: "MCSE",
  rhat: "R-hat",
  ess: "ESS",
};

const CLASS_LABELS: Record<string, string> = {
  observed: "observed",
  exact_zero: "exact zero",
  censored: "censored",
};

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function violationItem(doc: Document, violation: Violation): HTMLLIElement {
  const where = [violation.study_id, violation.field].filter(Boolean).join(" / ");
  const text = where ? `${where}: ${violation.message}` : violation.message;
  return el(doc, "li", `violation violation-${violation.severity}`, text);
}

export function renderUploadErrors(
  container: HTMLElement,
  violations: Violation[] | null,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  if (!violations || violations.length === 0) return;
  container.append(
    el(doc, "p", "error-text", "The file was rejected; fix these rows and upload again:"),
  );
  const list = el(doc, "ul", "violation-list");
  for (const violation of violations) list.append(violationItem(doc, violation));
  container.append(list);
}

export function renderDatasetOverview(
  container: HTMLElement,
  dataset: DatasetResponse | null,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  if (dataset === null) {
    container.append(
      el(doc, "p", "muted", "No dataset uploaded yet. Start with the sample file below."),
    );
    return;
  }

  const counts = dataset.class_counts;
  const summary =
    `${dataset.source} — ${dataset.n_studies} studies: ` +
    `${counts["observed"] ?? 0} observed, ${counts["exact_zero"] ?? 0} exact zero, ` +
    `${counts["censored"] ?? 0} censored.`;
  container.append(el(doc, "p", "dataset-summary", summary));

  if (dataset.violations.length > 0) {
    const list = el(doc, "ul", "violation-list");
    for (const violation of dataset.violations) list.append(violationItem(doc, violation));
    container.append(list);
  }
  if (dataset.warnings.length > 0) {
    const list = el(doc, "ul", "warning-list");
    for (const warning of dataset.warnings) list.append(el(doc, "li", undefined, warning));
    container.append(list);
  }

  const table = el(doc, "table", "data-table");
  const head = el(doc, "thead");
  const headRow = el(doc, "tr");
  for (const label of ["Study", "N", "Count", "Cutoff", ""]) {
    headRow.append(el(doc, "th", undefined, label));
  }
  head.append(headRow);
  table.append(head);

  const body = el(doc, "tbody");
  for (const row of dataset.rows) {
    const tr = el(doc, "tr");
    tr.append(el(doc, "td", undefined, row.study_id));
    tr.append(el(doc, "td", "num", String(row.n_treated)));
    tr.append(
      el(doc, "td", "num", row.observed_count === null ? "—" : String(row.observed_count)),
    );
    tr.append(el(doc, "td", "num", row.cutoff === null ? "—" : String(row.cutoff)));
    const badgeCell = el(doc, "td");
    if (row.classification !== "observed") {
      const badge = el(
        doc,
        "span",
        `badge badge-${row.classification}`,
        row.classification === "censored"
          ? `censored ≤ ${row.cutoff}`
          : CLASS_LABELS[row.classification] ?? row.classification,
      );
      badgeCell.append(badge);
    }
    tr.append(badgeCell);
    body.append(tr);
  }
  table.append(body);

  const wrap = el(doc, "div", "table-wrap");
  wrap.append(table);
  container.append(wrap);
}

export function renderSettingsErrors(container: HTMLElement, errors: string[]): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  if (errors.length === 0) return;
  const list = el(doc, "ul", "violation-list");
  for (const message of errors) list.append(el(doc, "li", "violation violation-error", message));
  container.append(list);
}

const MODEL_LABELS: Record<string, string> = {
  magec: "Censoring-aware",
  complete_case: "Complete case",
};

export function renderProgress(container: HTMLElement, run: RunState | null): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  if (run === null) return;

  const status = run.status;
  if (status === null) {
    container.append(el(doc, "p", "muted", "Submitting run…"));
    return;
  }

  if (status.state === "failed") {
    const panel = el(doc, "div", "error-panel");
    panel.append(el(doc, "p", "error-text", "The run failed."));
    if (status.error) panel.append(el(doc, "p", "error-detail", status.error));
    panel.append(
      el(doc, "p", "muted", "Your settings are unchanged — adjust them and run again."),
    );
    container.append(panel);
    return;
  }

  const headline =
    status.state === "done"
      ? "Run finished."
      : `Run ${status.state} — ${Math.round(status.progress.overall * 100)}%`;
  container.append(el(doc, "p", "progress-headline", headline));

  for (const [model, chains] of Object.entries(status.progress.models)) {
    const group = el(doc, "div", "progress-group");
    group.append(el(doc, "p", "progress-label", MODEL_LABELS[model] ?? model));
    chains.forEach((fraction, index) => {
      const row = el(doc, "div", "progress-row");
      row.append(el(doc, "span", "chain-label", `chain ${index + 1}`));
      const bar = el(doc, "div", "progress-bar");
      const fill = el(doc, "div", "progress-fill");
      fill.style.width = `${Math.round(fraction * 100)}%`;
      bar.append(fill);
      row.append(bar);
      row.append(el(doc, "span", "chain-pct", `${Math.round(fraction * 100)}%`));
      group.append(row);
    });
    container.append(group);
  }
}

export function buildSummaryTable(doc: Document, table: SummaryTable): HTMLTableElement {
  const node = el(doc, "table", "summary-table");
  const head = el(doc, "thead");
  const headRow = el(doc, "tr");
  for (const column of table.columns) {
    headRow.append(el(doc, "th", undefined, COLUMN_LABELS[column] ?? column));
  }
  head.append(headRow);
  node.append(head);
  const body = el(doc, "tbody");
  for (const row of table.rows) {
    const tr = el(doc, "tr");
    row.forEach((cell, index) => {
      tr.append(el(doc, index === 0 ? "th" : "td", index === 0 ? undefined : "num", cell));
    });
    body.append(tr);
  }
  node.append(body);
  return node;
}

/** Fills the results tab (everything except the forest plot, which the app
 * fetches separately because it can be re-rendered with display options). */
export function renderResults(container: HTMLElement, results: ResultsDoc | null): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  if (results === null) {
    container.append(el(doc, "p", "muted", "No finished run yet."));
    return;
  }

  if (results.warnings.length > 0) {
    const banner = el(doc, "div", "warning-banner");
    banner.append(el(doc, "p", undefined, "Convergence warnings:"));
    const list = el(doc, "ul");
    for (const warning of results.warnings) list.append(el(doc, "li", undefined, warning));
    banner.append(list);
    container.append(banner);
  }

  container.append(el(doc, "p", "narrative", results.rendered.narrative));

  container.append(el(doc, "h3", undefined, "Censoring-aware model"));
  const magecWrap = el(doc, "div", "table-wrap");
  magecWrap.append(buildSummaryTable(doc, results.rendered.summary_table_magec));
  container.append(magecWrap);

  if (results.rendered.summary_table_complete_case !== null) {
    container.append(el(doc, "h3", undefined, "Complete-case model"));
    const ccWrap = el(doc, "div", "table-wrap");
    ccWrap.append(buildSummaryTable(doc, results.rendered.summary_table_complete_case));
    container.append(ccWrap);
  }

  if (results.rendered.comparison_text !== null) {
    container.append(el(doc, "p", "comparison", results.rendered.comparison_text));
  }
}

export function renderReportMessage(container: HTMLElement, message: string | null): void {
  container.replaceChildren();
  if (message) {
    container.append(el(container.ownerDocument, "p", "error-text", message));
  }
}

/** Download name for the report: dataset name plus the calendar date. */
export function reportFilename(source: string, when: Date): string {
  const stem = (source.replace(/\.[Cc][Ss][Vv]$/, "") || "dataset")
    .replace(/[^A-Za-z0-9._-]+/g, "_");
  const date = when.toISOString().slice(0, 10);
  return `magec-report-${stem}-${date}.html`;
}

/** Status line for a finished/failed status poll, used by tests and the app. */
export function runStateText(status: RunStatus): string {
  if (status.state === "failed") return `failed: ${status.error ?? "unknown error"}`;
  return status.state;
}
