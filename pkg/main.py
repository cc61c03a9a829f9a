import argparse
import asyncio
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from loguru import logger as log
from prefect import get_run_logger
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from Config import config
from ensemble_stats.models import EnsembleMemberError
from io_persistence.run_config import (
    ConfigValidationError,
    RunConfigFile,
    load_run_config,
    resolved_document,
)
from io_persistence.snapshots import atomic_write_bytes
from nse_dynamics.attractor import absorbing_h1_bound, attractor_bounds
from nse_dynamics.solver import BlowUpError
from nudging.advisor import NoAdmissibleBetaError, rho_floor_type1, rho_floor_type2
from nudging.models import NudgingConstants
from pipelines.assimilate import assimilate_flow
from pipelines.context import build_context, resolve_nudging
from pipelines.ensemble import ensemble_flow
from pipelines.manifest import build_manifest, write_manifest
from pipelines.params import params_advice
from pipelines.simulate import simulate_flow
from pipelines.verify import verify_flow

# --- optional: Windows async policy
if sys.platform == "win32":
    asyncio.set_event_loop_policy(asyncio.WindowsProactorEventLoopPolicy())

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2, 3

console = Console()


# --- loguru sinks ---


def _prefect_loguru_sink(message):
    try:
        prlog = get_run_logger()
        r = message.record
        prlog.log(r["level"].no, r["message"])
    except Exception:
        sys.stderr.write(message)


def setup_logging(output_dir: Path, level: str) -> None:
    log_dir = output_dir / config.LOG_DIR
    os.makedirs(log_dir, exist_ok=True)
    log.remove()
    log.add(
        log_dir / "nudge_nse.log",
        level="DEBUG",
        rotation="10 MB",
        retention="10 days",
        enqueue=True,
        backtrace=True,
        diagnose=False,
    )
    log.add(_prefect_loguru_sink, level=level.upper(), format="{message}")


# --- argument parsing ---


def _common(p: argparse.ArgumentParser, needs_config: bool = True) -> None:
    if needs_config:
        p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted-key override, repeatable (e.g. solver.dt=0.005)",
        )
    p.add_argument("--output-dir", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-level", default=config.LOG_LEVEL)
    p.add_argument("--jobs", type=int, default=None, help="defaults to NUDGE_NSE_JOBS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nudge-nse",
        description="Nudging data assimilation for the 2D periodic Navier-Stokes equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("simulate", "spin up and integrate the forced flow"),
        ("assimilate", "twin experiment: observe, nudge and report synchronization"),
        ("ensemble", "push an initial ensemble forward and report Kantorovich decay"),
        ("info", "derived quantities of a run configuration"),
    ):
        _common(sub.add_parser(name, help=text))

    params = sub.add_parser("params", help="minimal beta, maximal h and rho-floors")
    _common(params, needs_config=False)
    params.add_argument("--grashof", type=float, required=True)
    params.add_argument("--rho", type=float, required=True)
    params.add_argument("--beta", type=float, default=None)
    params.add_argument("--h", type=float, default=None)
    params.add_argument("--kappa0", type=float, default=1.0)
    for flag in (
        "c1-star",
        "c2-star",
        "c3-star",
        "c3-star-ball",
        "c-l",
        "c-t",
        "c-b",
        "c-tilde1",
        "c-tilde21",
        "c-tilde22",
    ):
        params.add_argument(f"--{flag}", type=float, default=None)

    verify = sub.add_parser("verify", help="run the verification suites")
    _common(verify, needs_config=False)
    verify.add_argument(
        "--suite",
        choices=["spectral", "dynamics", "interpolant", "frechet", "transport", "all"],
        default="all",
    )
    return parser


def _constants_from_args(args: argparse.Namespace) -> NudgingConstants:
    names = {
        "c1_star": "c1_star",
        "c2_star": "c2_star",
        "c3_star": "c3_star",
        "c3_star_ball": "c3_star_ball",
        "c_l": "c_L",
        "c_t": "c_T",
        "c_b": "c_B",
        "c_tilde1": "c_tilde1",
        "c_tilde21": "c_tilde21",
        "c_tilde22": "c_tilde22",
    }
    given = {field: getattr(args, attr) for attr, field in names.items()}
    return NudgingConstants(**{k: v for k, v in given.items() if v is not None})


def _output_dir(args: argparse.Namespace, cfg: RunConfigFile | None = None) -> Path:
    if args.output_dir:
        return Path(args.output_dir)
    if cfg is not None and cfg.output.directory:
        return Path(cfg.output.directory)
    return Path(config.OUTPUT_DIR)


# --- presentation ---


def _summary_table(title: str, rows: dict[str, Any]) -> Table:
    table = Table(title=title, show_header=False)
    table.add_column("quantity", style="bold")
    table.add_column("value")
    for key, value in rows.items():
        if key == "files":
            continue
        if isinstance(value, float):
            value = f"{value:.6g}"
        table.add_row(key, str(value))
    return table


def _write_json_doc(path: Path, doc: dict[str, Any]) -> None:
    atomic_write_bytes(path, json.dumps(doc, indent=2, sort_keys=True).encode("utf-8"))


# --- subcommands ---


def _input_files(cfg: RunConfigFile, out: Path) -> list[Path]:
    paths = [cfg.nudging.reference_path, cfg.initial.path if cfg.initial.kind == "snapshot" else None]
    resolved = []
    for p in paths:
        if p:
            q = Path(p)
            resolved.append(q if q.is_absolute() else out / q)
    return resolved


def run_experiment(command: str, cfg: RunConfigFile, out: Path, seed: int, jobs: int | None) -> dict:
    flows = {
        "simulate": simulate_flow,
        "assimilate": assimilate_flow,
        "ensemble": ensemble_flow,
    }
    manifest = build_manifest(command, resolved_document(cfg), seed, _input_files(cfg, out))
    write_manifest(manifest, out)
    summary = asyncio.run(flows[command](cfg, str(out), seed, jobs))
    summary["content_hash"] = manifest.content_hash
    return summary


def info(cfg: RunConfigFile, out: Path) -> dict[str, Any]:
    ctx = build_context(cfg, out)
    constants = cfg.nudging.constants
    nu, kappa0, G = ctx.nu, ctx.kappa0, ctx.G
    bounds = attractor_bounds(G, nu, kappa0, constants.c_L)
    rows: dict[str, Any] = {
        "kappa0": kappa0,
        "grashof": G,
        "averaging window 1/(nu kappa0^2)": 1.0 / (nu * kappa0**2),
        "attractor sup ||grad u||": bounds.h1_bound,
        "attractor sup ||A u||": bounds.h2_bound,
        "absorbing ||grad u|| bound": absorbing_h1_bound(G, nu, kappa0),
        "observation scale h": ctx.op.h,
        "rho floor type I": rho_floor_type1(G, constants.c_tilde1),
        "rho floor type I (ball)": rho_floor_type1(G, constants.c_tilde1, ball=True),
    }
    try:
        ncfg, _ = resolve_nudging(ctx)
    except NoAdmissibleBetaError as exc:
        rows["advice"] = str(exc)
        return rows
    flags = ncfg.admissibility(G)
    rows.update(
        {
            "rho": ncfg.rho,
            "beta": ncfg.beta,
            "h_max for beta": flags.h_max,
            "beta admissible": flags.condbeta_ok,
            "beta h^2 admissible": flags.condbetah_ok,
            "rho floor type II": rho_floor_type2(G, ncfg.beta, constants) if ncfg.beta > 0 else None,
            "rho floor type II (ball)": (
                rho_floor_type2(G, ncfg.beta, constants, ball=True) if ncfg.beta > 0 else None
            ),
        }
    )
    return rows


def _error_document(exc: BaseException) -> dict[str, Any]:
    details: Any = None
    if isinstance(exc, ConfigValidationError):
        details = [{"path": p, "message": m} for p, m in exc.errors]
    elif isinstance(exc, ValidationError):
        details = [
            {"path": ".".join(str(x) for x in e["loc"]), "message": e["msg"]} for e in exc.errors()
        ]
    elif isinstance(exc, EnsembleMemberError):
        details = {"member": exc.index, "cause": type(exc.cause).__name__}
    elif isinstance(exc, BlowUpError):
        details = {"t": exc.t}
    return {"error": type(exc).__name__, "message": str(exc), "details": details}


def _fail(exc: BaseException, out: Path | None, code: int) -> int:
    doc = _error_document(exc)
    console.print_json(data=doc)
    if out is not None:
        try:
            _write_json_doc(out / "error.json", doc)
        except OSError as exc_write:
            log.warning(f"Could not write error document to {out}: {exc_write}")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    jobs = args.jobs or config.NUDGE_NSE_JOBS
    out: Path | None = None
    try:
        cfg = None
        if args.command in ("simulate", "assimilate", "ensemble", "info"):
            try:
                cfg = load_run_config(args.config, args.overrides)
            except ConfigValidationError as exc:
                return _fail(exc, Path(args.output_dir) if args.output_dir else None, EXIT_CONFIG)
        out = _output_dir(args, cfg)
        setup_logging(out, args.log_level)

        if args.command == "info":
            console.print(_summary_table("Run configuration", info(cfg, out)))
            return EXIT_OK

        if args.command == "params":
            result = params_advice(
                args.grashof,
                args.rho,
                beta=args.beta,
                h=args.h,
                kappa0=args.kappa0,
                constants=_constants_from_args(args),
            )
            adv = result.advice
            rows = {
                "beta_min": adv.beta_min,
                "h_max": adv.h_max,
                "rho floor type I": adv.rho_floor_type1,
                "rho floor type I (ball)": adv.rho_floor_type1_ball,
                "rho floor type II": adv.rho_floor_type2,
                "rho floor type II (ball)": adv.rho_floor_type2_ball,
                "flags": ", ".join(adv.flags) or "-",
            }
            for key in ("beta_max_for_h", "h_max_for_beta", "condbeta_ok", "condbetah_ok"):
                if getattr(result, key) is not None:
                    rows[key] = getattr(result, key)
            console.print(_summary_table(f"Advice for G={args.grashof:g}, rho={args.rho:g}", rows))
            if args.output_dir:
                atomic_write_bytes(
                    out / "param_advice.json", result.model_dump_json(indent=2).encode("utf-8")
                )
            return EXIT_OK

        if args.command == "verify":
            report = asyncio.run(verify_flow(args.suite, args.seed))
            atomic_write_bytes(
                out / "verify_report.json", report.model_dump_json(indent=2).encode("utf-8")
            )
            table = Table(title=f"Verification ({args.suite})")
            for col in ("suite", "check", "value", "threshold", "result"):
                table.add_column(col)
            for c in report.checks:
                table.add_row(
                    c.suite,
                    c.name,
                    f"{c.value:.4g}",
                    f"{c.threshold:.4g}",
                    "[green]pass[/green]" if c.passed else "[red]FAIL[/red]",
                )
            console.print(table)
            return EXIT_OK if report.passed else EXIT_VERIFY

        summary = run_experiment(args.command, cfg, out, args.seed, jobs)
        console.print(_summary_table(args.command, summary))
        console.print(Panel(f"Outputs written to {out}", title=args.command))
        return EXIT_OK

    except (ConfigValidationError, ValidationError) as exc:
        return _fail(exc, out, EXIT_CONFIG)
    except Exception as exc:
        log.exception(f"{args.command} failed")
        return _fail(exc, out, EXIT_ERROR)


if __name__ == "__main__":
    sys.exit(main())
