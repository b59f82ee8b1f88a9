/** Sampler/prior settings form model. Defaults and validation rules mirror
 * the server's request schema so the form rejects a bad configuration before
 * it is submitted (the server remains the authority and re-checks). */
import type { RunRequestBody } from "./api.js";

export interface Settings {
  priorScaleA: number;
  muPriorVariance: number;
  nChains: number;
  nIter: number;
  burnIn: number;
  thin: number;
  seed: number;
  runCompleteCase: boolean;
}

export const DEFAULT_SETTINGS: Settings = {
  priorScaleA: 2.5,
  muPriorVariance: 10_000,
  nChains: 3,
  nIter: 100_000,
  burnIn: 50_000,
  thin: 5,
  seed: 20240601,
  runCompleteCase: true,
};

const MAX_ITER = 5_000_000;

function isCount(value: number): boolean {
  return Number.isSafeInteger(value);
}

export function validateSettings(s: Settings): string[] {
  const errors: string[] = [];
  if (!Number.isFinite(s.priorScaleA) || s.priorScaleA <= 0) {
    errors.push("prior scale A must be a positive number");
  }
  if (!Number.isFinite(s.muPriorVariance) || s.muPriorVariance <= 0) {
    errors.push("mu prior variance must be a positive number");
  }
  if (!isCount(s.nChains) || s.nChains < 1 || s.nChains > 16) {
    errors.push("chains must be an integer between 1 and 16");
  }
  if (!isCount(s.nIter) || s.nIter < 1 || s.nIter > MAX_ITER) {
    errors.push(`iterations must be an integer between 1 and ${MAX_ITER.toLocaleString("en-US")}`);
  }
  if (!isCount(s.burnIn) || s.burnIn < 0) {
    errors.push("burn-in must be a non-negative integer");
  }
  if (!isCount(s.thin) || s.thin < 1) {
    errors.push("thinning must be an integer of at least 1");
  }
  if (!isCount(s.seed) || s.seed < 0) {
    errors.push("seed must be a non-negative integer");
  }
  // cross-field rules only once the individual fields parse
  if (isCount(s.nIter) && isCount(s.burnIn) && s.burnIn >= s.nIter && s.nIter >= 1) {
    errors.push("burn-in must be smaller than the number of iterations");
  } else if (
    isCount(s.nIter) &&
    isCount(s.burnIn) &&
    isCount(s.thin) &&
    s.thin >= 1 &&
    s.burnIn >= 0 &&
    Math.floor((s.nIter - s.burnIn) / s.thin) < 100
  ) {
    errors.push(
      "at least 100 draws must be retained per chain ((iterations − burn-in) / thinning ≥ 100)",
    );
  }
  return errors;
}

export function toRunRequest(datasetId: string, s: Settings): RunRequestBody {
  return {
    dataset_id: datasetId,
    model: {
      prior_scale_a: s.priorScaleA,
      mu_prior_variance: s.muPriorVariance,
    },
    mcmc: {
      n_chains: s.nChains,
      n_iter: s.nIter,
      burn_in: s.burnIn,
      thin: s.thin,
      seed: s.seed,
    },
    run_complete_case: s.runCompleteCase,
  };
}
