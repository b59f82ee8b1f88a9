"""In-memory dataset and job stores with a bounded FIFO worker pool."""
from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..analysis import AnalysisRequest, run_analysis
from ..dataset import Dataset
from ..render import (
    forest_plot_spec,
    forest_spec_to_dict,
    render_forest_plot_svg,
    render_report_html,
    results_json_bytes,
)

LOGGER = logging.getLogger(__name__)


@dataclass
class StoredDataset:
    dataset_id: str
    dataset: Dataset
    created_at: float


@dataclass
class Job:
    job_id: str
    dataset_id: str
    request: AnalysisRequest
    config_echo: dict
    created_at: float
    state: str = "queued"  # queued -> running -> done | failed
    progress: dict = field(default_factory=dict)  # model -> per-chain fraction
    error: str | None = None
    completed_at: float | None = None
    timing: dict | None = None
    results_bytes: bytes | None = None
    report_bytes: bytes | None = None
    forest_bytes: dict = field(default_factory=dict)  # "magec"/"cc" -> bytes
    forest_specs: dict = field(default_factory=dict)  # "magec"/"cc" -> spec dict

    def overall_progress(self) -> float:
        fractions = [f for chain in self.progress.values() for f in chain]
        if not fractions:
            return 0.0
        return sum(fractions) / len(fractions)

    def status_document(self) -> dict:
        doc = {
            "job_id": self.job_id,
            "dataset_id": self.dataset_id,
            "state": self.state,
            "progress": {
                "overall": 1.0 if self.state == "done" else self.overall_progress(),
                "models": {k: list(v) for k, v in self.progress.items()},
            },
            "config": self.config_echo,
            "created_at": self.created_at,
            "completed_at": self.completed_at,
            "error": self.error,
        }
        if self.timing is not None:
            doc["timing"] = self.timing
        if self.state == "done":
            links = {
                "results": f"/api/runs/{self.job_id}/results",
                "report": f"/api/runs/{self.job_id}/report.html",
                "forest_magec": f"/api/runs/{self.job_id}/forest/magec.svg",
            }
            if "cc" in self.forest_bytes:
                links["forest_cc"] = f"/api/runs/{self.job_id}/forest/cc.svg"
            doc["links"] = links
        return doc


class JobStore:
    """Single-writer-per-job state machine over a FIFO thread pool."""

    def __init__(
        self,
        max_concurrent: int = 2,
        retention_seconds: float = 24 * 3600,
        spool_dir: str | None = None,
    ):
        self._lock = threading.Lock()
        self._datasets: dict[str, StoredDataset] = {}
        self._jobs: dict[str, Job] = {}
        self._pool = ThreadPoolExecutor(max_workers=max_concurrent)
        self.retention_seconds = retention_seconds
        self.spool_dir = Path(spool_dir) if spool_dir else None
        if self.spool_dir is not None:
            self.spool_dir.mkdir(parents=True, exist_ok=True)
            self._restore_spool()

    # -- datasets --

    def add_dataset(self, dataset: Dataset) -> str:
        dataset_id = uuid.uuid4().hex
        with self._lock:
            self._datasets[dataset_id] = StoredDataset(
                dataset_id=dataset_id, dataset=dataset, created_at=time.time()
            )
        return dataset_id

    def get_dataset(self, dataset_id: str) -> Dataset | None:
        with self._lock:
            stored = self._datasets.get(dataset_id)
        return stored.dataset if stored else None

    # -- jobs --

    def submit(self, dataset_id: str, request: AnalysisRequest, config_echo: dict) -> Job:
        job = Job(
            job_id=uuid.uuid4().hex,
            dataset_id=dataset_id,
            request=request,
            config_echo=config_echo,
            created_at=time.time(),
            progress={
                "magec": [0.0] * request.mcmc_config.n_chains,
                **(
                    {"complete_case": [0.0] * request.mcmc_config.n_chains}
                    if request.run_complete_case
                    else {}
                ),
            },
        )
        with self._lock:
            self._jobs[job.job_id] = job
        self._pool.submit(self._execute, job)
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def _execute(self, job: Job) -> None:
        with self._lock:
            job.state = "running"

        def sink(model: str, progress) -> None:
            fraction = progress.iterations_done / progress.total_iterations
            with self._lock:
                chains = job.progress[model]
                chains[progress.chain_index] = max(
                    chains[progress.chain_index], fraction
                )

        try:
            result = run_analysis(job.request, sink)
            results = results_json_bytes(result)
            specs = {"magec": forest_plot_spec(result, "magec")}
            if result.complete_case is not None:
                specs["complete_case"] = forest_plot_spec(result, "complete_case")
            svgs = {tag: render_forest_plot_svg(spec) for tag, spec in specs.items()}
            report = render_report_html(result, svgs, result.dataset)
            forest_bytes = {"magec": svgs["magec"].encode("utf-8")}
            forest_specs = {"magec": forest_spec_to_dict(specs["magec"])}
            if "complete_case" in svgs:
                forest_bytes["cc"] = svgs["complete_case"].encode("utf-8")
                forest_specs["cc"] = forest_spec_to_dict(specs["complete_case"])
            with self._lock:
                job.results_bytes = results
                job.report_bytes = report.encode("utf-8")
                job.forest_bytes = forest_bytes
                job.forest_specs = forest_specs
                job.timing = {k: round(v, 3) for k, v in result.timing.items()}
                for chains in job.progress.values():
                    chains[:] = [1.0] * len(chains)
                job.state = "done"
                job.completed_at = time.time()
            self._spool_write(job)
        except Exception as exc:  # failure is a job state, not a crash
            LOGGER.exception("job %s failed", job.job_id)
            with self._lock:
                job.state = "failed"
                job.error = str(exc)
                job.completed_at = time.time()

    # -- retention --

    def purge_expired(self, now: float | None = None) -> int:
        now = time.time() if now is None else now
        horizon = now - self.retention_seconds
        removed = 0
        with self._lock:
            for dataset_id in [
                k for k, v in self._datasets.items() if v.created_at < horizon
            ]:
                del self._datasets[dataset_id]
                removed += 1
            for job_id in [
                k
                for k, v in self._jobs.items()
                if v.created_at < horizon and v.state in ("done", "failed")
            ]:
                del self._jobs[job_id]
                removed += 1
        return removed

    def shutdown(self) -> None:
        self._pool.shutdown(wait=False, cancel_futures=True)

    # -- optional on-disk spool for done jobs --

    def _spool_write(self, job: Job) -> None:
        if self.spool_dir is None or job.state != "done":
            return
        job_dir = self.spool_dir / job.job_id
        job_dir.mkdir(parents=True, exist_ok=True)
        (job_dir / "results.json").write_bytes(job.results_bytes)
        (job_dir / "report.html").write_bytes(job.report_bytes)
        for tag, payload in job.forest_bytes.items():
            (job_dir / f"forest_{tag}.svg").write_bytes(payload)
        meta = {
            "job_id": job.job_id,
            "dataset_id": job.dataset_id,
            "config": job.config_echo,
            "created_at": job.created_at,
            "completed_at": job.completed_at,
            "timing": job.timing,
            "forest_tags": sorted(job.forest_bytes),
            "forest_specs": job.forest_specs,
            "n_chains": job.request.mcmc_config.n_chains,
            "models": sorted(job.progress),
        }
        (job_dir / "meta.json").write_text(json.dumps(meta, indent=2))

    def _restore_spool(self) -> None:
        for meta_path in sorted(self.spool_dir.glob("*/meta.json")):
            try:
                meta = json.loads(meta_path.read_text())
                job_dir = meta_path.parent
                job = Job(
                    job_id=meta["job_id"],
                    dataset_id=meta["dataset_id"],
                    request=None,  # original request not needed once done
                    config_echo=meta["config"],
                    created_at=meta["created_at"],
                    state="done",
                    progress={
                        model: [1.0] * meta["n_chains"] for model in meta["models"]
                    },
                    completed_at=meta["completed_at"],
                    timing=meta.get("timing"),
                    results_bytes=(job_dir / "results.json").read_bytes(),
                    report_bytes=(job_dir / "report.html").read_bytes(),
                    forest_bytes={
                        tag: (job_dir / f"forest_{tag}.svg").read_bytes()
                        for tag in meta["forest_tags"]
                    },
                    forest_specs=meta.get("forest_specs", {}),
                )
                self._jobs[job.job_id] = job
            except (OSError, KeyError, ValueError) as exc:
                LOGGER.warning("skipping unreadable spool entry %s: %s", meta_path, exc)
