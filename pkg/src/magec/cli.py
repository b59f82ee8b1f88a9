"""Batch entry point: validate datasets, run analyses, serve the HTTP API."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ._version import VERSION
from .analysis import AnalysisError, AnalysisRequest, run_analysis
from .dataset import (
    Dataset,
    DatasetError,
    load_sample_csv,
    parse_csv,
    validate_dataset,
)
from .model import ModelConfig
from .render import (
    forest_plot_spec,
    render_forest_plot_svg,
    render_report_html,
    render_summary_csv,
    results_json_bytes,
)
from .sampler import McmcConfig, SamplerError

LOGGER = logging.getLogger("magec")

EXIT_OK = 0
EXIT_VIOLATIONS = 2
EXIT_UNREADABLE = 3
EXIT_STRICT_WARNINGS = 4

ALL_FORMATS = ("json", "svg", "html", "csv")


def _emit(event: str, log_format: str, **fields) -> None:
    if log_format == "json":
        print(json.dumps({"event": event, **fields}), file=sys.stderr)
    else:
        text = " ".join(f"{k}={v}" for k, v in fields.items())
        print(f"{event}: {text}" if text else event, file=sys.stderr)


def _read_input(path: str | None) -> tuple[bytes, str]:
    if path is None:
        return load_sample_csv(), "sample.csv"
    return Path(path).read_bytes(), Path(path).name


def _load_dataset(path: str | None, log_format: str) -> Dataset | int:
    """Parse and validate; returns the dataset or an exit code."""
    try:
        content, name = _read_input(path)
    except OSError as exc:
        _emit("error", log_format, message=f"cannot read input: {exc}")
        return EXIT_UNREADABLE
    try:
        dataset = parse_csv(content, source=name)
    except DatasetError as exc:
        for violation in exc.violations:
            print(str(violation), file=sys.stderr)
        return EXIT_VIOLATIONS
    violations = validate_dataset(dataset)
    for violation in violations:
        print(str(violation), file=sys.stderr)
    if any(v.severity == "error" for v in violations):
        return EXIT_VIOLATIONS
    return dataset


def cmd_validate(args: argparse.Namespace) -> int:
    outcome = _load_dataset(args.input, args.log_format)
    if isinstance(outcome, int):
        return outcome
    counts = outcome.class_counts()
    summary = ", ".join(f"{count} {cls.value}" for cls, count in counts.items())
    print(f"OK: {outcome.n_studies} studies ({summary})")
    return EXIT_OK


def _progress_printer(log_format: str):
    def sink(model: str, progress) -> None:
        if progress.iterations_done % 10_000 != 0:
            return
        _emit(
            "progress",
            log_format,
            model=model,
            chain=progress.chain_index,
            done=progress.iterations_done,
            total=progress.total_iterations,
            phase=progress.phase,
        )

    return sink


def cmd_run(args: argparse.Namespace) -> int:
    outcome = _load_dataset(args.input, args.log_format)
    if isinstance(outcome, int):
        return outcome
    dataset = outcome

    try:
        model_config = ModelConfig(
            prior_scale_a=args.prior_scale_a,
            mu_prior_variance=args.mu_prior_variance,
        )
        mcmc_config = McmcConfig(
            n_chains=args.chains,
            n_iter=args.iterations,
            burn_in=args.burn_in,
            thin=args.thin,
            seed=args.seed,
        )
    except ValueError as exc:
        _emit("error", args.log_format, message=str(exc))
        return EXIT_VIOLATIONS

    request = AnalysisRequest(
        dataset=dataset,
        model_config=model_config,
        mcmc_config=mcmc_config,
        run_complete_case=not args.skip_complete_case,
        concurrent_chains=args.parallel_chains,
    )
    sink = None if args.quiet else _progress_printer(args.log_format)
    try:
        result = run_analysis(request, sink)
    except (AnalysisError, SamplerError) as exc:
        _emit("error", args.log_format, message=str(exc))
        return 1

    formats = {f.strip() for f in args.formats.split(",") if f.strip()}
    unknown = formats - set(ALL_FORMATS)
    if unknown:
        _emit("error", args.log_format, message=f"unknown formats: {sorted(unknown)}")
        return EXIT_VIOLATIONS

    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    svgs = {"magec": render_forest_plot_svg(forest_plot_spec(result, "magec"))}
    if result.complete_case is not None:
        svgs["complete_case"] = render_forest_plot_svg(
            forest_plot_spec(result, "complete_case")
        )

    written = []
    if "json" in formats:
        path = out_dir / "results.json"
        path.write_bytes(results_json_bytes(result))
        written.append(path)
    if "svg" in formats:
        path = out_dir / "forest_magec.svg"
        path.write_text(svgs["magec"], encoding="utf-8")
        written.append(path)
        if "complete_case" in svgs:
            path = out_dir / "forest_cc.svg"
            path.write_text(svgs["complete_case"], encoding="utf-8")
            written.append(path)
    if "html" in formats:
        path = out_dir / "report.html"
        path.write_text(
            render_report_html(result, svgs, dataset), encoding="utf-8"
        )
        written.append(path)
    if "csv" in formats:
        path = out_dir / "summary.csv"
        path.write_text(render_summary_csv(result), encoding="utf-8")
        written.append(path)

    for warning in result.warnings:
        print(f"WARNING: {warning}", file=sys.stderr)
    _emit(
        "done",
        args.log_format,
        seconds=round(result.timing["total"], 2),
        outputs=",".join(p.name for p in written),
        overall_incidence_pct=f"{100 * result.magec.overall.median:.4f}",
    )
    if args.strict and result.warnings:
        return EXIT_STRICT_WARNINGS
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import ServiceSettings, create_app

    settings = ServiceSettings(
        max_upload_bytes=args.max_upload_mb * 1024 * 1024,
        max_concurrent_jobs=args.max_jobs,
        retention_seconds=int(args.retention_hours * 3600),
        spool_dir=args.spool_dir,
        static_dir=args.static_dir,
    )
    app = create_app(settings)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magec",
        description=(
            "Bayesian meta-analysis of adverse-event incidence with "
            "left-censored study counts"
        ),
    )
    parser.add_argument("--version", action="version", version=f"magec {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a CSV against the data contract")
    p_val.add_argument("input", help="path to the CSV file")
    p_val.add_argument("--log-format", choices=("text", "json"), default="text")
    p_val.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="fit the models and write result artifacts")
    p_run.add_argument(
        "-i", "--input", default=None,
        help="input CSV (defaults to the bundled sample dataset)",
    )
    p_run.add_argument("-o", "--output-dir", default="magec_out")
    p_run.add_argument("--seed", type=int, default=McmcConfig().seed)
    p_run.add_argument("--chains", type=int, default=3)
    p_run.add_argument("--iterations", type=int, default=100_000)
    p_run.add_argument("--burn-in", type=int, default=50_000)
    p_run.add_argument("--thin", type=int, default=5)
    p_run.add_argument("--prior-scale-a", type=float, default=2.5)
    p_run.add_argument("--mu-prior-variance", type=float, default=1.0e4)
    p_run.add_argument("--skip-complete-case", action="store_true")
    p_run.add_argument(
        "--formats", default=",".join(ALL_FORMATS),
        help="comma-separated subset of json,svg,html,csv",
    )
    p_run.add_argument(
        "--strict", action="store_true",
        help="exit 4 when a convergence warning is raised",
    )
    p_run.add_argument("--parallel-chains", action="store_true")
    p_run.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p_run.add_argument("--log-format", choices=("text", "json"), default="text")
    p_run.set_defaults(func=cmd_run)

    p_srv = sub.add_parser("serve", help="start the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.add_argument("--max-jobs", type=int, default=2)
    p_srv.add_argument("--retention-hours", type=float, default=24.0)
    p_srv.add_argument("--spool-dir", default=None)
    p_srv.add_argument("--max-upload-mb", type=int, default=5)
    p_srv.add_argument("--static-dir", default=None)
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
