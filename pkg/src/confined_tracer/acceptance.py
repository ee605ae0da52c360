"""Acceptance checks, shared by the test suite and ``confined-tracer verify``.

Each check returns a :class:`CheckResult`. Statistical checks accept a
``quick`` flag that divides replica counts by 10 and widens the tolerance by
sqrt(10), which keeps the same nominal confidence. ``tolerance_scale``
multiplies every tolerance; 0 is a negative control that makes every inexact
check fail.
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import cgf as _cgf
from .figures import G_FILE, H_FILE, seam_residuals, write_figures
from .model import WallParams, conductivity, green_kubo_variance, j_star, mean_gap
from .rate import legendre, scaling_convergence
from .sim import DEFAULT_SEED, SimConfig, empirical_cgf, run_ensemble, stationary_speed_test
from .tilt import TiltSpec, entropy_limit, run_tilted

NONEQ = WallParams(0.5, 1.0)
EQ = WallParams(1.0, 1.0)
QUICK_FACTOR = 10


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    value: float
    target: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] #{self.number:<2d} {self.name}: value={self.value:.6g} "
            f"target={self.target:.6g} tol={self.tolerance:.3g}"
            + (f"  ({self.detail})" if self.detail else "")
        )


class Suite:
    """Runs the checks with shared settings and caches the equilibrium ensemble."""

    def __init__(self, quick: bool = False, seed: int = DEFAULT_SEED, workers: int | None = None,
                 tolerance_scale: float = 1.0) -> None:
        self.quick = quick
        self.seed = seed
        self.workers = workers
        self.scale = tolerance_scale
        self._eq_ensemble = None

    def replicas(self, n: int) -> int:
        return max(1, n // QUICK_FACTOR) if self.quick else n

    def stat_tol(self, tol: float) -> float:
        return tol * (math.sqrt(QUICK_FACTOR) if self.quick else 1.0) * self.scale

    def exact_tol(self, tol: float) -> float:
        return tol * self.scale

    def equilibrium_ensemble(self):
        if self._eq_ensemble is None:
            cfg = SimConfig(EQ, 1e5, self.seed)
            self._eq_ensemble = run_ensemble(cfg, self.replicas(400), self.workers)
        return self._eq_ensemble

    # 1
    def mean_current(self) -> CheckResult:
        target = j_star(NONEQ)
        ens = run_ensemble(SimConfig(NONEQ, 1e5, self.seed), self.replicas(200), self.workers)
        tol = self.stat_tol(0.02)
        rel = abs(ens.mean_current - target) / target
        return CheckResult(1, "mean current J/t", ens.mean_current, target, tol, rel <= tol,
                           f"rel err {rel:.2e}, stderr {ens.stderr_current:.2e}, {ens.replicas} replicas")

    # 2
    def green_kubo(self) -> CheckResult:
        target = green_kubo_variance(1.0)
        ens = self.equilibrium_ensemble()
        tol = self.stat_tol(0.05)
        rel = abs(ens.variance_rate - target) / target
        return CheckResult(2, "Green-Kubo Var(J)/t", ens.variance_rate, target, tol, rel <= tol,
                           f"rel err {rel:.2e}; 2*kappa*T^2 = {2 * conductivity(EQ):.6f}")

    # 3
    def renewal_rate(self) -> CheckResult:
        target = 1.0 / mean_gap(1.0)
        ens = self.equilibrium_ensemble()
        tol = self.stat_tol(0.01)
        rel = abs(ens.mean_collision_rate - target) / target
        return CheckResult(3, "renewal rate N_t/t", ens.mean_collision_rate, target, tol, rel <= tol,
                           f"rel err {rel:.2e}")

    # 4
    def flat_window(self) -> CheckResult:
        lams = np.linspace(NONEQ.beta_left - NONEQ.beta_right, 0.0, 20)
        sols = [_cgf.solve_cgf(float(l), NONEQ) for l in lams]
        worst = max(abs(s.eta0) for s in sols)
        ok = all(s.eta0 == 0.0 and s.region == "flat" for s in sols)
        return CheckResult(4, "CGF flat window exactly 0", worst, 0.0, 0.0, ok, "20 lambda values")

    # 5
    def gc_symmetry(self) -> CheckResult:
        d = NONEQ.beta_left - NONEQ.beta_right
        lams = np.linspace(-0.95, 0.45, 50)
        worst = max(abs(_cgf.cgf(float(l), NONEQ) - _cgf.cgf(d - float(l), NONEQ)) for l in lams)
        tol = self.exact_tol(1e-8)
        return CheckResult(5, "Gallavotti-Cohen f(l) = f(dB - l)", worst, 0.0, tol, worst <= tol, "50-point grid")

    # 6
    def slope_at_origin(self) -> CheckResult:
        target = j_star(NONEQ)
        h = 1e-6
        slope = (_cgf.cgf(h, NONEQ) - _cgf.cgf(0.0, NONEQ)) / h
        tol = self.exact_tol(1e-3)
        rel = abs(slope - target) / target
        return CheckResult(6, "CGF slope at 0+", slope, target, tol, rel <= tol, f"rel err {rel:.2e}")

    # 7
    def empirical_cgf(self) -> CheckResult:
        lam = 0.1
        target = _cgf.cgf(lam, NONEQ)
        est = empirical_cgf(NONEQ, lam, 2e3, self.replicas(10_000), self.seed, self.workers)
        tol = self.stat_tol(0.05)
        rel = abs(est.tilted - target) / target
        return CheckResult(7, "empirical CGF at lambda=0.1", est.tilted, target, tol, rel <= tol,
                           f"rel err {rel:.2e}; untilted estimator {est.naive:.5f}; ESS {est.effective_samples:.0f}")

    # 8
    def legendre_plateau(self) -> CheckResult:
        js = j_star(NONEQ)
        d = NONEQ.beta_right - NONEQ.beta_left
        flat = max(abs(legendre(float(j), NONEQ)) for j in np.linspace(0.0, js, 21))
        lin = max(abs(legendre(float(j), NONEQ) - d * abs(j)) for j in np.linspace(-js, 0.0, 21))
        worst = max(flat, lin)
        tol = self.exact_tol(1e-6)
        return CheckResult(8, "Legendre plateau and linear branch", worst, 0.0, tol, worst <= tol,
                           f"plateau {flat:.1e}, linear {lin:.1e}")

    # 9
    def scaling_limits(self) -> CheckResult:
        grid = np.linspace(-2.0, 2.0, 41 if self.quick else 101)
        eps = (0.1, 0.05, 0.025)
        tol = self.exact_tol(5e-3)
        rh = scaling_convergence(grid, 1.0, 1.0, eps, "H", tol)
        rg = scaling_convergence(grid, 1.0, 1.0, eps, "G", tol)
        worst = max(rh.gaps[-1], rg.gaps[-1])
        detail = ("H gaps " + ", ".join(f"{g:.2e}" for g in rh.gaps)
                  + "; G gaps " + ", ".join(f"{g:.2e}" for g in rg.gaps))
        return CheckResult(9, "scaling limits H and G", worst, 0.0, tol, rh.passed and rg.passed, detail)

    # 10
    def figures(self) -> CheckResult:
        with tempfile.TemporaryDirectory() as tmp:
            write_figures(tmp)
            res = {**{("G", s): r for s, r in seam_residuals(f"{tmp}/{G_FILE}", "G").items()},
                   **{("H", s): r for s, r in seam_residuals(f"{tmp}/{H_FILE}", "H").items()}}
        worst = max(res.values())
        tol = self.exact_tol(1e-10)
        return CheckResult(10, "figure seam continuity", worst, 0.0, tol, worst <= tol, f"{len(res)} seams")

    # 11
    def tilted_concentration(self) -> CheckResult:
        target = 0.5 * j_star(NONEQ)
        spec = TiltSpec.for_target(target, NONEQ, 1e-2, 0.1)
        ens = run_tilted(spec, NONEQ, 1e5, self.replicas(200), self.seed, self.workers)
        tol = self.stat_tol(0.05)
        rel = abs(ens.result.mean_current - target) / target
        return CheckResult(11, "tilted mean at j*/2", ens.result.mean_current, target, tol, rel <= tol,
                           f"rel err {rel:.2e}, tilted at t in {100 * ens.switch_frequency:.0f}% of replicas")

    # 12
    def entropy_certificate(self) -> CheckResult:
        js = j_star(NONEQ)
        target = (NONEQ.beta_right - NONEQ.beta_left) * js / 2.0
        rev_end, rev_lim, _ = entropy_limit(-js / 2.0, NONEQ)
        fwd_end, fwd_lim, _ = entropy_limit(js / 2.0, NONEQ)
        tol = self.exact_tol(1e-2)
        gap = abs(rev_lim - target)
        ok = gap <= tol and fwd_lim <= tol
        return CheckResult(12, "entropy certificate (reversed limit)", rev_lim, target, tol, ok,
                           f"forward limit {fwd_lim:.2e}; at ladder end: reversed {rev_end:.4f}, forward {fwd_end:.4f}")

    # 13
    def stationary_speed(self) -> CheckResult:
        n = self.replicas(10_000)
        t = 100.0 * mean_gap(1.0)
        # a smaller tolerance scale means a stricter test, i.e. a larger significance level
        alpha = min(1.0, 0.01 / self.scale) if self.scale > 0.0 else 1.0
        rep = stationary_speed_test(SimConfig(EQ, t, self.seed), [t], n, self.workers, alpha=alpha)
        return CheckResult(13, "stationary speed law (KS)", rep.pvalue, 0.01, rep.alpha, rep.passed,
                           f"D={rep.statistic:.4f}, {rep.samples} samples")

    def checks(self) -> list[Callable[[], CheckResult]]:
        return [
            self.mean_current, self.green_kubo, self.renewal_rate, self.flat_window,
            self.gc_symmetry, self.slope_at_origin, self.empirical_cgf, self.legendre_plateau,
            self.scaling_limits, self.figures, self.tilted_concentration,
            self.entropy_certificate, self.stationary_speed,
        ]

    def run(self, report: Callable[[str], None] | None = print) -> list[CheckResult]:
        out = []
        for check in self.checks():
            res = check()
            if report is not None:
                report(res.line())
            out.append(res)
        return out
