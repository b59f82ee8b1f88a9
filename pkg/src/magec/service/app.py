"""FastAPI application: dataset upload, run lifecycle, artifact retrieval."""
from __future__ import annotations

import asyncio
import hashlib
import logging
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, File, HTTPException, Query, Request, Response, UploadFile
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from ..analysis import AnalysisRequest
from ..dataset import (
    DatasetError,
    classify_study,
    load_sample_csv,
    parse_csv,
    validate_dataset,
)
from ..render import customize_forest_spec, forest_spec_from_dict, render_forest_plot_svg
from .jobs import JobStore
from .schemas import DatasetResponse, RunRequest, RunSubmitted, StudyRow

LOGGER = logging.getLogger(__name__)

PURGE_INTERVAL_SECONDS = 600


@dataclass(frozen=True)
class ServiceSettings:
    max_upload_bytes: int = 5 * 1024 * 1024
    max_concurrent_jobs: int = 2
    retention_seconds: float = 24 * 3600
    spool_dir: str | None = None
    static_dir: str | None = None


def _default_static_dir() -> Path | None:
    candidate = Path(__file__).resolve().parents[3] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def _violation_dict(violation) -> dict:
    return {
        "study_id": violation.study_id,
        "field": violation.field,
        "message": violation.message,
        "severity": violation.severity,
    }


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings()
    store = JobStore(
        max_concurrent=settings.max_concurrent_jobs,
        retention_seconds=settings.retention_seconds,
        spool_dir=settings.spool_dir,
    )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        async def sweeper() -> None:
            while True:
                await asyncio.sleep(PURGE_INTERVAL_SECONDS)
                removed = store.purge_expired()
                if removed:
                    LOGGER.info("retention sweep removed %d entries", removed)

        task = asyncio.create_task(sweeper())
        try:
            yield
        finally:
            task.cancel()
            store.shutdown()

    app = FastAPI(title="magec", lifespan=lifespan)
    app.state.store = store
    app.state.settings = settings

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        start = time.perf_counter()
        response = await call_next(request)
        LOGGER.info(
            "request method=%s path=%s status=%d duration_ms=%.1f",
            request.method,
            request.url.path,
            response.status_code,
            1000 * (time.perf_counter() - start),
        )
        return response

    @app.post("/api/datasets", response_model=DatasetResponse, status_code=200)
    async def upload_dataset(request: Request, file: UploadFile = File(...)):
        declared = request.headers.get("content-length")
        if declared and int(declared) > settings.max_upload_bytes + 4096:
            raise HTTPException(413, "upload exceeds the size limit")
        content = await file.read(settings.max_upload_bytes + 1)
        if len(content) > settings.max_upload_bytes:
            raise HTTPException(413, "upload exceeds the size limit")
        try:
            dataset = parse_csv(content, source=file.filename or "upload.csv")
        except DatasetError as exc:
            return JSONResponse(
                status_code=422,
                content={"violations": [_violation_dict(v) for v in exc.violations]},
            )
        violations = validate_dataset(dataset)
        if any(v.severity == "error" for v in violations):
            return JSONResponse(
                status_code=422,
                content={"violations": [_violation_dict(v) for v in violations]},
            )
        dataset_id = store.add_dataset(dataset)
        return DatasetResponse(
            dataset_id=dataset_id,
            source=dataset.source,
            n_studies=dataset.n_studies,
            class_counts={
                cls.value: count for cls, count in dataset.class_counts().items()
            },
            rows=[
                StudyRow(
                    study_id=r.study_id,
                    n_treated=r.n_treated,
                    observed_count=r.observed_count,
                    cutoff=r.cutoff,
                    classification=classify_study(r).value,
                )
                for r in dataset.records
            ],
            violations=[_violation_dict(v) for v in violations],
            warnings=list(dataset.warnings),
        )

    @app.post("/api/runs", response_model=RunSubmitted, status_code=202)
    async def submit_run(body: RunRequest):
        dataset = store.get_dataset(body.dataset_id)
        if dataset is None:
            raise HTTPException(404, f"unknown dataset {body.dataset_id!r}")
        analysis_request = AnalysisRequest(
            dataset=dataset,
            model_config=body.model.to_config(),
            mcmc_config=body.mcmc.to_config(),
            run_complete_case=body.run_complete_case,
        )
        config_echo = {
            "model": body.model.model_dump(),
            "mcmc": body.mcmc.model_dump(),
            "run_complete_case": body.run_complete_case,
        }
        job = store.submit(body.dataset_id, analysis_request, config_echo)
        return RunSubmitted(job_id=job.job_id)

    @app.get("/api/runs/{job_id}")
    async def job_status(job_id: str):
        job = store.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        return job.status_document()

    def _done_job(job_id: str):
        job = store.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        if job.state != "done":
            detail = f"job is {job.state}"
            if job.error:
                detail += f": {job.error}"
            raise HTTPException(409, detail)
        return job

    def _etagged(request: Request, payload: bytes, media_type: str) -> Response:
        # Strong ETag over the exact payload bytes; artifacts never change
        # once a job is done, so a matching If-None-Match can skip the body.
        etag = f'"{hashlib.sha256(payload).hexdigest()}"'
        claimed = request.headers.get("if-none-match", "")
        if claimed.strip() == "*" or etag in (t.strip() for t in claimed.split(",")):
            return Response(status_code=304, headers={"ETag": etag})
        return Response(content=payload, media_type=media_type, headers={"ETag": etag})

    @app.get("/api/runs/{job_id}/results")
    async def job_results(job_id: str, request: Request):
        job = _done_job(job_id)
        return _etagged(request, job.results_bytes, "application/json")

    @app.get("/api/runs/{job_id}/forest/{model}.svg")
    async def job_forest(
        job_id: str,
        request: Request,
        model: str,
        decimals: int | None = Query(default=None, ge=0, le=6),
        sort: str | None = Query(default=None, pattern="^(data|estimate)$"),
    ):
        job = _done_job(job_id)
        if model not in job.forest_bytes:
            raise HTTPException(404, f"no forest plot for model {model!r}")
        # No display options: serve the stored bytes so repeats stay identical.
        if (decimals is None and sort is None) or model not in job.forest_specs:
            return _etagged(request, job.forest_bytes[model], "image/svg+xml")
        spec = customize_forest_spec(
            forest_spec_from_dict(job.forest_specs[model]), decimals=decimals, sort=sort
        )
        return _etagged(request, render_forest_plot_svg(spec).encode("utf-8"), "image/svg+xml")

    @app.get("/api/runs/{job_id}/report.html")
    async def job_report(job_id: str, request: Request):
        job = _done_job(job_id)
        return _etagged(request, job.report_bytes, "text/html; charset=utf-8")

    @app.get("/sample.csv")
    async def sample_csv():
        return Response(
            content=load_sample_csv(),
            media_type="text/csv",
            headers={"Content-Disposition": 'attachment; filename="sample.csv"'},
        )

    static_dir = (
        Path(settings.static_dir) if settings.static_dir else _default_static_dir()
    )
    if static_dir is not None and static_dir.is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        async def placeholder_index():
            return (
                "<!DOCTYPE html><html><head><title>magec</title></head><body>"
                "<h1>magec service</h1><p>The browser UI is not built. "
                'The API lives under <code>/api</code>; a sample dataset is at '
                '<a href="/sample.csv">/sample.csv</a>.</p></body></html>'
            )

    return app


app = create_app()
