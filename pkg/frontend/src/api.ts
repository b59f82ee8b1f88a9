/** Typed client for the analysis service. The UI performs no statistics of
 * its own: every displayed value comes from these responses verbatim. */

export interface Violation {
  study_id: string | null;
  field: string | null;
  message: string;
  severity: string;
}

export interface StudyRow {
  study_id: string;
  n_treated: number;
  observed_count: number | null;
  cutoff: number | null;
  classification: string;
}

export interface DatasetResponse {
  dataset_id: string;
  source: string;
  n_studies: number;
  class_counts: Record<string, number>;
  rows: StudyRow[];
  violations: Violation[];
  warnings: string[];
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface RunStatus {
  job_id: string;
  dataset_id: string;
  state: JobState;
  progress: { overall: number; models: Record<string, number[]> };
  config: {
    model: { prior_scale_a: number; mu_prior_variance: number };
    mcmc: {
      n_chains: number;
      n_iter: number;
      burn_in: number;
      thin: number;
      seed: number;
      target_acceptance: number;
    };
    run_complete_case: boolean;
  };
  created_at: number;
  completed_at: number | null;
  error: string | null;
  timing?: Record<string, number>;
  links?: Record<string, string>;
}

export interface SummaryTable {
  columns: string[];
  rows: string[][];
}

export interface RenderedBlock {
  narrative: string;
  summary_table_magec: SummaryTable;
  summary_table_complete_case: SummaryTable | null;
  comparison_text: string | null;
}

export interface ResultsDoc {
  schema: string;
  dataset: {
    source: string;
    n_studies: number;
    class_counts: Record<string, number>;
    studies: StudyRow[];
  };
  config: unknown;
  magec: unknown;
  complete_case: unknown;
  comparison: {
    magec_median: number;
    cc_median: number;
    relative_bias_percent: number;
  } | null;
  warnings: string[];
  rendered: RenderedBlock;
}

export interface RunRequestBody {
  dataset_id: string;
  model: { prior_scale_a: number; mu_prior_variance: number };
  mcmc: {
    n_chains: number;
    n_iter: number;
    burn_in: number;
    thin: number;
    seed: number;
  };
  run_complete_case: boolean;
}

export type ForestModel = "magec" | "cc";

export interface ForestOptions {
  decimals?: number;
  sort?: "data" | "estimate";
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly violations: Violation[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Raw CSV text wrapped as a multipart/form-data request body. Hand-assembled
 * so the client behaves identically in browsers and in test runtimes. */
export function multipartFormData(
  field: string,
  filename: string,
  content: string,
): { contentType: string; body: string } {
  const boundary =
    "----magec-" + Math.random().toString(36).slice(2) + Date.now().toString(36);
  const safeName = filename.replace(/"/g, "%22");
  const body =
    `--${boundary}\r\n` +
    `Content-Disposition: form-data; name="${field}"; filename="${safeName}"\r\n` +
    "Content-Type: text/csv\r\n\r\n" +
    content +
    `\r\n--${boundary}--\r\n`;
  return { contentType: `multipart/form-data; boundary=${boundary}`, body };
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let detail = `HTTP ${response.status}`;
  let violations: Violation[] = [];
  try {
    const doc = await response.json();
    if (typeof doc.detail === "string") detail = doc.detail;
    if (Array.isArray(doc.violations)) violations = doc.violations;
    else if (doc.detail !== undefined && typeof doc.detail !== "string") {
      detail = JSON.stringify(doc.detail);
    }
  } catch {
    // non-JSON error body: keep the generic detail
  }
  throw new ApiError(response.status, detail, violations);
}

export class MagecApi {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {}

  async uploadDataset(csvText: string, filename: string): Promise<DatasetResponse> {
    const { contentType, body } = multipartFormData("file", filename, csvText);
    const response = await this.fetchImpl(`${this.baseUrl}/api/datasets`, {
      method: "POST",
      headers: { "Content-Type": contentType },
      body,
    });
    await raiseForStatus(response);
    return response.json();
  }

  async submitRun(body: RunRequestBody): Promise<{ job_id: string }> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/runs`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(response);
    return response.json();
  }

  async getStatus(jobId: string): Promise<RunStatus> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/runs/${jobId}`);
    await raiseForStatus(response);
    return response.json();
  }

  async getResults(jobId: string): Promise<ResultsDoc> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/runs/${jobId}/results`);
    await raiseForStatus(response);
    return response.json();
  }

  /** Plot URL; options matching the server defaults are omitted so the
   * untouched view is served straight from the stored artifact. */
  forestUrl(jobId: string, model: ForestModel, options: ForestOptions = {}): string {
    const params = new URLSearchParams();
    if (options.decimals !== undefined && options.decimals !== 2) {
      params.set("decimals", String(options.decimals));
    }
    if (options.sort !== undefined && options.sort !== "data") {
      params.set("sort", options.sort);
    }
    const query = params.toString();
    const base = `${this.baseUrl}/api/runs/${jobId}/forest/${model}.svg`;
    return query ? `${base}?${query}` : base;
  }

  async fetchForestSvg(
    jobId: string,
    model: ForestModel,
    options: ForestOptions = {},
  ): Promise<string> {
    const response = await this.fetchImpl(this.forestUrl(jobId, model, options));
    await raiseForStatus(response);
    return response.text();
  }

  reportUrl(jobId: string): string {
    return `${this.baseUrl}/api/runs/${jobId}/report.html`;
  }

  async fetchReport(jobId: string): Promise<string> {
    const response = await this.fetchImpl(this.reportUrl(jobId));
    await raiseForStatus(response);
    return response.text();
  }

  sampleCsvUrl(): string {
    return `${this.baseUrl}/sample.csv`;
  }
}
