"""Request/response bodies for the HTTP API."""
from __future__ import annotations

from pydantic import BaseModel, Field, model_validator

from ..model import ModelConfig
from ..sampler import McmcConfig


class ModelConfigIn(BaseModel):
    prior_scale_a: float = Field(default=2.5, gt=0)
    mu_prior_variance: float = Field(default=1.0e4, gt=0)

    def to_config(self) -> ModelConfig:
        return ModelConfig(
            prior_scale_a=self.prior_scale_a,
            mu_prior_variance=self.mu_prior_variance,
        )


class McmcConfigIn(BaseModel):
    n_chains: int = Field(default=3, ge=1, le=16)
    n_iter: int = Field(default=100_000, ge=1, le=5_000_000)
    burn_in: int = Field(default=50_000, ge=0)
    thin: int = Field(default=5, ge=1)
    seed: int = Field(default=McmcConfig().seed, ge=0, lt=2**64)
    target_acceptance: float = Field(default=0.44, gt=0, lt=1)

    @model_validator(mode="after")
    def _check_lengths(self) -> "McmcConfigIn":
        if self.burn_in >= self.n_iter:
            raise ValueError("burn_in must be strictly smaller than n_iter")
        if (self.n_iter - self.burn_in) // self.thin < 100:
            raise ValueError(
                "config must retain at least 100 draws per chain "
                "((n_iter - burn_in) / thin >= 100)"
            )
        return self

    def to_config(self) -> McmcConfig:
        return McmcConfig(
            n_chains=self.n_chains,
            n_iter=self.n_iter,
            burn_in=self.burn_in,
            thin=self.thin,
            seed=self.seed,
            target_acceptance=self.target_acceptance,
        )


class RunRequest(BaseModel):
    dataset_id: str
    model: ModelConfigIn = Field(default_factory=ModelConfigIn)
    mcmc: McmcConfigIn = Field(default_factory=McmcConfigIn)
    run_complete_case: bool = True


class StudyRow(BaseModel):
    study_id: str
    n_treated: int
    observed_count: int | None
    cutoff: int | None
    classification: str


class DatasetResponse(BaseModel):
    dataset_id: str
    source: str
    n_studies: int
    class_counts: dict[str, int]
    rows: list[StudyRow]
    violations: list[dict]
    warnings: list[str]


class RunSubmitted(BaseModel):
    job_id: str
