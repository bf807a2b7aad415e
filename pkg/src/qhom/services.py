"""Services behind the ``qhom`` commands.

Each service method reads its input files, runs the numerical checks and
returns a :class:`~qhom.report.RunReport`. Services never print.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

from . import formats
from .channels import kraus_rank
from .correlations import QnsCorrelation, simulate, star_compose, verify_qns
from .errors import InvalidChannelError, NotNoSignallingError, WitnessError
from .homomorphisms import CorrelationType, HomInstance, decide_ns, verify_hom
from .hypergraphs import (
    ClassicalHypergraph,
    QuantumHypergraph,
    arrow_forward,
    arrow_iff,
    classical_loc_homomorphism,
    embed_classical,
    fit_residual,
    is_classical,
)
from .report import CheckResult, RunReport, Verdict
from .settings import RunSettings

log = logging.getLogger(__name__)


class Service:
    """Shared plumbing: settings, batch execution and report assembly."""

    def __init__(self, settings: RunSettings | None = None) -> None:
        self.settings = settings or RunSettings()

    @property
    def tol(self) -> float:
        return self.settings.tol

    def _report(self, command: str, **arguments: object) -> RunReport:
        return RunReport(
            command,
            {k: str(v) if isinstance(v, Path) else v for k, v in arguments.items()},
            config=self.settings.as_dict(),
        )

    def _batch(self, paths: list[Path], one: Callable[[Path], tuple[list[CheckResult], str]]) -> tuple[list[CheckResult], dict[str, str]]:
        """Run ``one`` per path, on a thread pool when ``jobs > 1``; results keep input order."""

        if self.settings.jobs > 1 and len(paths) > 1:
            with ThreadPoolExecutor(max_workers=self.settings.jobs) as pool:
                results = list(pool.map(one, paths))
        else:
            results = [one(p) for p in paths]
        checks: list[CheckResult] = []
        digests: dict[str, str] = {}
        for path, (found, digest) in zip(paths, results):
            checks.extend(found)
            digests[str(path)] = digest
        return checks, digests


class ChannelService(Service):
    def check_channel(self, path: Path) -> RunReport:
        report = self._report("check-channel", file=path)
        ch, digest = formats.load(path, "channel")
        report.inputs[str(path)] = digest
        residuals = {"cp": ch.cp_residual(), "tp": ch.tp_residual()}
        try:
            ch.validate(self.tol)
            verdict = Verdict.PASS
            details = {"kraus_rank": kraus_rank(ch, self.tol)}
        except InvalidChannelError as exc:
            verdict, details = Verdict.FAIL, {"reason": str(exc)}
        report.checks.append(CheckResult("cptp", verdict, residuals, details))
        return report


class CorrelationService(Service):
    def _check_one(self, path: Path) -> tuple[list[CheckResult], str]:
        doc, digest = formats.load(path, "correlation")
        ch = doc.resolved_channel()
        qns = verify_qns(ch, doc.quad, self.tol)
        failed = {"failed": list(qns.failed)} if qns.failed else {}
        checks = [CheckResult(f"{path.name}:qns", Verdict.of(qns.is_qns), qns.residuals, failed)]
        if doc.witness is not None:
            try:
                doc.to_correlation(self.tol)
                checks.append(CheckResult(f"{path.name}:witness", Verdict.PASS))
            except (WitnessError, NotNoSignallingError, InvalidChannelError) as exc:
                checks.append(CheckResult(f"{path.name}:witness", Verdict.FAIL, details={"reason": str(exc)}))
        log.info("%s: qns=%s max residual %.3e", path, qns.is_qns, qns.max_residual)
        return checks, digest

    def check_correlation(self, paths: list[Path]) -> RunReport:
        report = self._report("check-correlation", files=[str(p) for p in paths])
        report.checks, report.inputs = self._batch(list(paths), self._check_one)
        return report

    def compose(self, first: Path, second: Path) -> RunReport:
        """``Γ₂ ∗ Γ₁`` with ``Γ₁`` read from ``first`` and ``Γ₂`` from ``second``."""

        report = self._report("compose", first=first, second=second)
        doc1, d1 = formats.load(first, "correlation")
        doc2, d2 = formats.load(second, "correlation")
        report.inputs.update({str(first): d1, str(second): d2})
        g = star_compose(doc2.to_correlation(self.tol), doc1.to_correlation(self.tol), self.tol)
        qns = verify_qns(g.channel, g.quad, self.tol)
        report.checks.append(CheckResult("composed:qns", Verdict.of(qns.is_qns), qns.residuals))
        report.artifact = formats.encode_correlation(g)
        return report

    def simulate(self, corr_path: Path, channel_path: Path) -> RunReport:
        report = self._report("simulate", correlation=corr_path, channel=channel_path)
        doc, d1 = formats.load(corr_path, "correlation")
        ch, d2 = formats.load(channel_path, "channel")
        report.inputs.update({str(corr_path): d1, str(channel_path): d2})
        ch.validate(self.tol)
        out = simulate(doc.to_correlation(self.tol), ch, self.tol)
        report.checks.append(
            CheckResult("simulated:cptp", Verdict.PASS, {"cp": out.cp_residual(), "tp": out.tp_residual()})
        )
        report.artifact = formats.encode_channel(out)
        return report


def _as_source(h: QuantumHypergraph | ClassicalHypergraph) -> QuantumHypergraph:
    """Source side lives over ``(X₁, Ȳ₁)``; hypergraphs stored as ``(X̄, Y)`` are conjugated."""

    if isinstance(h, ClassicalHypergraph):
        return embed_classical(h).conjugate()
    return h.conjugate() if h.signature == (True, False) else h


def _as_target(h: QuantumHypergraph | ClassicalHypergraph) -> QuantumHypergraph:
    return embed_classical(h) if isinstance(h, ClassicalHypergraph) else h


class HypergraphService(Service):
    def fits(self, channel_path: Path, hypergraph_path: Path) -> RunReport:
        report = self._report("fits", channel=channel_path, hypergraph=hypergraph_path)
        ch, d1 = formats.load(channel_path, "channel")
        k, d2 = formats.load_hypergraph(hypergraph_path, self.tol)
        report.inputs.update({str(channel_path): d1, str(hypergraph_path): d2})
        k = _as_target(k)
        ranged = fit_residual(ch, k, "range", self.tol)
        krausy = fit_residual(ch, k, "kraus", self.tol)
        verdict = Verdict.of(ranged <= self.tol)
        details = {"kraus_path_agrees": (krausy <= self.tol) == (ranged <= self.tol)}
        report.checks.append(CheckResult("fits", verdict, {"range": ranged, "kraus": krausy}, details))
        return report

    def embed(self, path: Path, conjugate: bool = False) -> RunReport:
        report = self._report("embed", file=path, conjugate=conjugate)
        e, digest = formats.load(path, "classical_hypergraph")
        report.inputs[str(path)] = digest
        u = embed_classical(e)
        if conjugate:
            u = u.conjugate()
        ok, recovered = is_classical(u, self.tol)
        report.checks.append(
            CheckResult("round-trip", Verdict.of(ok and recovered.edges == e.edges), details={"rank": u.rank})
        )
        report.artifact = formats.encode_quantum_hypergraph(u)
        return report

    def arrow(self, u1_path: Path, u2_path: Path, iff: bool = False) -> RunReport:
        report = self._report("arrow", u1=u1_path, u2=u2_path, iff=iff)
        h1, d1 = formats.load_hypergraph(u1_path, self.tol)
        h2, d2 = formats.load_hypergraph(u2_path, self.tol)
        report.inputs.update({str(u1_path): d1, str(u2_path): d2})
        build = arrow_iff if iff else arrow_forward
        k = build(_as_source(h1), _as_target(h2)).shuffled()
        report.checks.append(CheckResult("arrow", Verdict.PASS, details={"rank": k.rank}))
        report.artifact = formats.encode_quantum_hypergraph(k)
        return report


class HomService(Service):
    def hom(self, instance_path: Path, witness_path: Path | None = None) -> RunReport:
        report = self._report("hom", instance=instance_path, witness=witness_path)
        inst, digest = formats.load(instance_path, "hom_instance")
        report.inputs[str(instance_path)] = digest
        if witness_path is None:
            report.checks.append(self._without_witness(inst))
            return report
        doc, d2 = formats.load(witness_path, "correlation")
        report.inputs[str(witness_path)] = d2
        try:
            corr = doc.to_correlation(self.tol)
        except (NotNoSignallingError, WitnessError, InvalidChannelError) as exc:
            report.checks.append(CheckResult("hom", Verdict.FAIL, details={"reason": str(exc)}))
            return report
        res = verify_hom(corr, inst, self.tol)
        details = {"checks": res.checks}
        if res.offender:
            details["offender"] = res.offender
        report.checks.append(CheckResult("hom", Verdict(res.verdict), res.residuals, details))
        return report

    def _without_witness(self, inst: HomInstance) -> CheckResult:
        ok1, e1 = is_classical(inst.u1, self.tol)
        ok2, e2 = is_classical(inst.u2, self.tol)
        if inst.ctype is CorrelationType.LOC and ok1 and ok2:
            found = classical_loc_homomorphism(e1, e2, inst.mode.iff)
            details = {"oracle": "classical"}
            if found is not None:
                details["maps"] = {"f": list(found[0]), "g": list(found[1])}
            return CheckResult("hom", Verdict.of(found is not None), details=details)
        return CheckResult("hom", Verdict.WITNESS_REQUIRED)

    def _decision_check(self, name: str, inst: HomInstance) -> tuple[CheckResult, QnsCorrelation | None]:
        decision = decide_ns(inst, self.settings.solver, self.tol)
        details: dict[str, object] = {"status": decision.status, "iterations": decision.iterations}
        if decision.certificate:
            details["certificate"] = decision.certificate
        if decision.invertible is not None:
            details["invertible"] = decision.invertible
        check = CheckResult(f"{name}:decide-ns", Verdict.of(decision.feasible), {"residual": decision.residual}, details)
        return check, decision.correlation

    def decide_ns(self, paths: list[Path]) -> RunReport:
        report = self._report("decide-ns", files=[str(p) for p in paths])
        found: dict[Path, QnsCorrelation | None] = {}

        def one(path: Path) -> tuple[list[CheckResult], str]:
            inst, digest = formats.load(path, "hom_instance")
            check, found[path] = self._decision_check(path.name, inst)
            return [check], digest

        report.checks, report.inputs = self._batch(list(paths), one)
        if len(paths) == 1 and found.get(paths[0]) is not None:
            report.artifact = formats.encode_correlation(found[paths[0]])
        return report
