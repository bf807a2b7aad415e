from __future__ import annotations

import logging
import os
import sys
import time
from pathlib import Path
from typing import Any

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib
import click
import typer

from . import __version__
from .containers import Container
from .errors import InputError, QhomError
from .formats import dumps, write_json
from .report import RunReport, generate_trace_id
from .settings import RunSettings

# Default log file path is relative to the current working directory
LOG_FILE = Path("qhom.log")
LOG_LEVEL_ENV = "QHOM_LOG_LEVEL"
INPUT_ERROR_EXIT = 3

log = logging.getLogger(__name__)


def _get_config_dir() -> Path:
    try:  # pragma: no cover
        from platformdirs import user_config_dir

        return Path(user_config_dir("qhom"))
    except Exception:  # pragma: no cover
        if os.name == "nt":
            base = Path(os.getenv("APPDATA", Path.home() / "AppData" / "Roaming"))
            return base / "qhom"
        return Path.home() / ".config" / "qhom"


def _get_config_file() -> Path:
    return _get_config_dir() / "config.toml"


def _load_config(path: Path | None = None) -> dict[str, Any]:
    """Read the TOML config; an explicit ``path`` must exist and parse."""

    cfg = path or _get_config_file()
    if not cfg.exists():
        if path is not None:
            raise InputError(f"config file {path} does not exist")
        return {}
    try:
        return tomllib.loads(cfg.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        if path is not None:
            raise InputError(f"config file {path} cannot be read", [str(exc)]) from exc
        log.warning("Ignoring unreadable config file %s: %s", cfg, exc)
        return {}


def configure_logging(log_file: Path) -> None:
    """Configure root logging to write to ``log_file``."""
    level = os.environ.get(LOG_LEVEL_ENV, "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
        handlers=[logging.FileHandler(log_file, encoding="utf-8")],
        force=True,
    )


def _global_excepthook(
    exc_type: type[BaseException], exc_value: BaseException, exc_tb
) -> None:
    """Log uncaught exceptions and exit."""
    if issubclass(exc_type, SystemExit):
        sys.__excepthook__(exc_type, exc_value, exc_tb)
        return
    logging.getLogger(__name__).critical(
        "Uncaught exception", exc_info=(exc_type, exc_value, exc_tb)
    )
    print(
        f"[FATAL] {exc_type.__name__}: {exc_value}\nSee the log for details.",
        file=sys.stderr,
    )
    sys.exit(1)


sys.excepthook = _global_excepthook


class QhomCLI:
    """Typer-based CLI with dependency injection."""

    def __init__(
        self, log_file: Path = LOG_FILE, container: Container | None = None
    ) -> None:
        self.container = container or Container()
        self.log_file = log_file
        self.output: Path | None = None

        self.app = typer.Typer(
            add_completion=False,
            context_settings={"help_option_names": ["-h", "--help"]},
        )

        self.app.callback()(self._callback)
        self.app.command(
            name="check-channel",
            help="Check that a channel file is completely positive and trace preserving",
            short_help="Validate a channel",
        )(self._cmd_check_channel)
        self.app.command(
            name="check-correlation",
            help="Check the no-signalling conditions (and witness, if any) of correlation files",
            short_help="Validate correlations",
        )(self._cmd_check_correlation)
        self.app.command(
            name="compose",
            help="Compose two correlations: FIRST is applied first, then SECOND",
            short_help="Compose correlations",
        )(self._cmd_compose)
        self.app.command(
            name="simulate",
            help="Apply a correlation to a channel between the correlation's inputs",
            short_help="Simulate a channel",
        )(self._cmd_simulate)
        self.app.command(
            name="fits",
            help="Check whether a channel fits a four-leg hypergraph",
            short_help="Check fitting",
        )(self._cmd_fits)
        self.app.command(
            name="hom",
            help="Verify a homomorphism instance against a witness correlation",
            short_help="Verify a homomorphism",
        )(self._cmd_hom)
        self.app.command(
            name="decide-ns",
            help="Decide the no-signalling relation for one or more instance files",
            short_help="Decide ns homomorphisms",
        )(self._cmd_decide_ns)
        self.app.command(
            name="embed",
            help="Embed a classical hypergraph as a quantum hypergraph",
            short_help="Embed a classical hypergraph",
        )(self._cmd_embed)
        self.app.command(
            name="arrow",
            help="Write the shuffled arrow hypergraph of two hypergraphs",
            short_help="Build an arrow hypergraph",
        )(self._cmd_arrow)
        self.app.command(
            name="version",
            help="Print the qhom version",
            short_help="Print version",
        )(self._cmd_version)

    def _callback(
        self,
        logfile: Path = typer.Option(LOG_FILE, help="Path to the log file"),
        config: Path | None = typer.Option(None, "--config", help="TOML config file"),
        tol: float | None = typer.Option(None, "--tol", help="Numerical tolerance for every check"),
        eps: float | None = typer.Option(None, "--eps", help="Solver feasibility threshold"),
        max_iters: int | None = typer.Option(None, "--max-iters", help="Solver iteration budget"),
        jobs: int | None = typer.Option(None, "--jobs", help="Worker threads for batch commands"),
        seed: int | None = typer.Option(None, "--seed", help="Seed for the solver start perturbation"),
        output: Path | None = typer.Option(None, "--output", "-o", help="Write the produced artifact here"),
    ) -> None:
        self.container.config.log_file.from_value(logfile)
        configure_logging(self.container.config.log_file())
        merged = dict(_load_config(config))
        flags = {"tol": tol, "eps": eps, "max_iters": max_iters, "jobs": jobs, "seed": seed}
        merged.update({k: v for k, v in flags.items() if v is not None})
        try:
            RunSettings.from_mapping(merged)
        except (TypeError, ValueError) as exc:
            raise InputError("invalid settings", [str(exc)]) from exc
        self.container.config.run.from_value(merged)
        self.output = output

    def _emit(self, report: RunReport, started: float) -> None:
        report.trace_id = generate_trace_id()
        report.wall_time = time.perf_counter() - started
        if self.output is not None and report.artifact is not None:
            write_json(self.output, report.artifact)
            report.artifact = {"path": str(self.output)}
        typer.echo(dumps(report.to_dict()))
        log.info(
            "%s %s -> %s (inputs %s)",
            report.command,
            report.arguments,
            report.verdict.value,
            report.inputs,
        )
        raise typer.Exit(code=report.exit_code)

    def _cmd_check_channel(self, file: Path) -> None:
        started = time.perf_counter()
        self._emit(self.container.channels().check_channel(file), started)

    def _cmd_check_correlation(self, files: list[Path]) -> None:
        started = time.perf_counter()
        self._emit(self.container.correlations().check_correlation(files), started)

    def _cmd_compose(self, first: Path, second: Path) -> None:
        started = time.perf_counter()
        self._emit(self.container.correlations().compose(first, second), started)

    def _cmd_simulate(self, correlation: Path, channel: Path) -> None:
        started = time.perf_counter()
        self._emit(self.container.correlations().simulate(correlation, channel), started)

    def _cmd_fits(self, channel: Path, hypergraph: Path) -> None:
        started = time.perf_counter()
        self._emit(self.container.hypergraphs().fits(channel, hypergraph), started)

    def _cmd_hom(
        self,
        instance: Path,
        witness: Path | None = typer.Option(None, "--witness", help="Correlation file witnessing the relation"),
    ) -> None:
        started = time.perf_counter()
        self._emit(self.container.homs().hom(instance, witness), started)

    def _cmd_decide_ns(self, instances: list[Path]) -> None:
        started = time.perf_counter()
        self._emit(self.container.homs().decide_ns(instances), started)

    def _cmd_embed(
        self,
        file: Path,
        conjugate: bool = typer.Option(False, "--conjugate", help="Emit the conjugate embedding"),
    ) -> None:
        started = time.perf_counter()
        self._emit(self.container.hypergraphs().embed(file, conjugate), started)

    def _cmd_arrow(
        self,
        u1: Path,
        u2: Path,
        iff: bool = typer.Option(False, "--iff", help="Build the two-sided arrow"),
    ) -> None:
        started = time.perf_counter()
        self._emit(self.container.hypergraphs().arrow(u1, u2, iff), started)

    def _cmd_version(self) -> None:
        typer.echo(__version__)

    def run(self, argv: list[str] | None = None) -> None:
        argv = argv if argv is not None else sys.argv[1:]
        try:
            cmd = typer.main.get_command(self.app)
            exit_code = cmd.main(args=argv, prog_name="qhom", standalone_mode=False)
            if isinstance(exit_code, int):
                sys.exit(exit_code)
        except QhomError as exc:
            logging.getLogger(__name__).exception("Input error")
            typer.echo(f"[ERROR] {exc}", err=True)
            sys.exit(INPUT_ERROR_EXIT)
        except click.ClickException as exc:
            exc.show()
            sys.exit(INPUT_ERROR_EXIT)


def main(argv: list[str] | None = None) -> None:
    """Entry point for ``python -m qhom``."""
    QhomCLI().run(argv)
