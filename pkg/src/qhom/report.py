"""Run reports emitted by the command line tools."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any
from zoneinfo import ZoneInfo

from . import __version__


def generate_trace_id(tz_name: str = "UTC") -> str:
    """Timestamp identifying one run, e.g. ``20260101T120000+0000``."""

    now = datetime.now(ZoneInfo("UTC")).astimezone(ZoneInfo(tz_name))
    return now.strftime("%Y%m%dT%H%M%S%z")


class Verdict(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    UNKNOWN = "unknown"
    WITNESS_REQUIRED = "witness-required"

    @property
    def exit_code(self) -> int:
        return {Verdict.PASS: 0, Verdict.FAIL: 1}.get(self, 2)

    @property
    def severity(self) -> int:
        return {Verdict.PASS: 0, Verdict.UNKNOWN: 1, Verdict.WITNESS_REQUIRED: 1, Verdict.FAIL: 2}[self]

    @classmethod
    def of(cls, decided: bool | None) -> "Verdict":
        if decided is None:
            return cls.UNKNOWN
        return cls.PASS if decided else cls.FAIL


def worst(verdicts: list[Verdict]) -> Verdict:
    """Fail beats unknown beats pass; an empty list passes."""

    return max(verdicts, key=lambda v: v.severity, default=Verdict.PASS)


@dataclass
class CheckResult:
    name: str
    verdict: Verdict
    residuals: dict[str, float] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "verdict": self.verdict.value}
        if self.residuals:
            out["residuals"] = {k: float(v) for k, v in self.residuals.items()}
        if self.details:
            out["details"] = self.details
        return out


@dataclass
class RunReport:
    """Machine-readable outcome of one command.

    Everything except the ``run`` block is a function of the inputs and the
    configuration.
    """

    command: str
    arguments: dict[str, Any]
    checks: list[CheckResult] = field(default_factory=list)
    inputs: dict[str, str] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    artifact: Any = None
    trace_id: str = ""
    wall_time: float = 0.0

    @property
    def verdict(self) -> Verdict:
        return worst([c.verdict for c in self.checks])

    @property
    def exit_code(self) -> int:
        return self.verdict.exit_code

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "command": self.command,
            "arguments": self.arguments,
            "version": __version__,
            "verdict": self.verdict.value,
            "checks": [c.to_dict() for c in self.checks],
            "inputs": dict(sorted(self.inputs.items())),
            "config": self.config,
        }
        if self.artifact is not None:
            out["artifact"] = self.artifact
        out["run"] = {"trace_id": self.trace_id, "wall_time": round(self.wall_time, 6)}
        return out
