"""
gl-duality command line.

Usage:
    gl-duality verify configs/f0_case.toml
    gl-duality sweep configs/theorem2_sweep.toml --param beta --from 0.5 --to 1.5 --steps 5
    gl-duality plotdata reports/f0_case.json plots/

Exit codes: 0 all checks passed, 1 a check failed, 2 config or report error,
3 solver failure, 4 I/O failure. LOG_LEVEL sets the log verbosity.
"""

import argparse
import sys
from collections.abc import Sequence
from enum import IntEnum
from pathlib import Path

from pydantic import ValidationError

from packages.cli.pipeline import run_config, run_sweep
from packages.cli.plotdata import emit_plot_data
from packages.cli.schema import ExperimentConfig, load_config
from packages.core.config import get_settings
from packages.core.errors import ConfigError, GLDualityError, PreconditionError
from packages.core.models import VerificationReport
from packages.shared.logging import configure_logging, get_logger

logger = get_logger(__name__)


class ExitCode(IntEnum):
    OK = 0
    CHECK_FAILED = 1
    CONFIG_ERROR = 2
    SOLVER_ERROR = 3
    IO_ERROR = 4


def _report_path(cfg: ExperimentConfig, override: Path | None) -> Path:
    if override is not None:
        return override
    if cfg.output is not None:
        return cfg.output
    return get_settings().output_dir / f"{cfg.name}.json"


def write_report(report: VerificationReport, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")


def load_report(path: Path) -> VerificationReport:
    """Raises ConfigError for a file that is not a verification report."""
    text = path.read_text(encoding="utf-8")
    try:
        return VerificationReport.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(f"{path} is not a verification report", [str(exc)]) from exc


def _finish(report: VerificationReport, path: Path) -> ExitCode:
    try:
        write_report(report, path)
    except OSError as exc:
        logger.error("Report not written", path=str(path), error=str(exc))
        return ExitCode.IO_ERROR
    summary = report.summary
    print(f"{path}: {summary.passed}/{summary.total} checks passed")
    return ExitCode.OK if report.passed else ExitCode.CHECK_FAILED


def cmd_verify(args: argparse.Namespace) -> ExitCode:
    cfg = load_config(args.config)
    return _finish(run_config(cfg), _report_path(cfg, args.output))


def cmd_sweep(args: argparse.Namespace) -> ExitCode:
    cfg = load_config(args.config)
    report = run_sweep(cfg, args.param, args.start, args.stop, args.steps)
    return _finish(report, _report_path(cfg, args.output))


def cmd_plotdata(args: argparse.Namespace) -> ExitCode:
    try:
        report = load_report(args.report)
        written = emit_plot_data(report, args.out_dir)
    except OSError as exc:
        logger.error("Plot data not written", error=str(exc))
        return ExitCode.IO_ERROR
    for path in written:
        print(path)
    return ExitCode.OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gl-duality",
        description="Verify duality principles for discretized Ginzburg-Landau functionals",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="Run every experiment of a config")
    verify.add_argument("config", type=Path)
    verify.add_argument("--output", "-o", type=Path, help="Report path (default from config)")
    verify.set_defaults(handler=cmd_verify)

    sweep = sub.add_parser("sweep", help="Run a config across values of one parameter")
    sweep.add_argument("config", type=Path)
    sweep.add_argument("--param", required=True, help="Parameter name, e.g. beta")
    sweep.add_argument("--from", dest="start", type=float, required=True)
    sweep.add_argument("--to", dest="stop", type=float, required=True)
    sweep.add_argument("--steps", type=int, required=True)
    sweep.add_argument("--output", "-o", type=Path)
    sweep.set_defaults(handler=cmd_sweep)

    plot = sub.add_parser("plotdata", help="Write CSV series from a report")
    plot.add_argument("report", type=Path)
    plot.add_argument("out_dir", type=Path)
    plot.set_defaults(handler=cmd_plotdata)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        code = args.handler(args)
    except (ConfigError, PreconditionError) as exc:
        diagnostics = getattr(exc, "diagnostics", [])
        logger.error("Configuration error", error=str(exc), diagnostics=diagnostics)
        print(f"error: {exc}", file=sys.stderr)
        code = ExitCode.CONFIG_ERROR
    except GLDualityError as exc:
        logger.error("Solver failure", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        code = ExitCode.SOLVER_ERROR
    logger.info("Run finished", command=args.command, exit_code=int(code))
    return int(code)


if __name__ == "__main__":
    sys.exit(main())
