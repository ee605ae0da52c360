"""Rate function of the energy current and its small-gradient limits.

I(j) = sup_lambda { lambda j - f(lambda) } is computed by golden-section
search on the concave map lambda -> lambda j - f(lambda). For
beta_L <= beta_R it vanishes on [0, j*], equals (beta_R - beta_L)|j| on
[-j*, 0] and is strictly convex outside.

With wall temperatures T +- eps*tau/2 one has, as eps -> 0,

    eps^-2 f(eps lambda) -> H(lambda),    eps^-2 I(eps j) -> G(j),

    H(lambda) = kappa tau lambda + kappa T^2 lambda^2           if lambda tau > 0
              = 0                                               if lambda tau in [-tau^2/T^2, 0]
              = -kappa tau m + kappa T^2 m^2, m = lambda + tau/T^2  otherwise

    G(j) = 0                                  if j tau in [0, kappa tau^2]
         = -j tau / T^2                       if j tau in [-kappa tau^2, 0)
         = (j - kappa tau)^2 / (4 kappa T^2)  otherwise

with kappa = sqrt(T / 2 pi). G is the Legendre transform of H, both satisfy
the scaled symmetry G(j) - G(-j) = -j tau / T^2, and all seams are
continuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cgf import ENDPOINT_GUARD, cgf, flat_window
from .model import ScaledParams, WallParams, j_star, scaling_conductivity

__all__ = [
    "GOLDEN_TOL",
    "RateCurve",
    "GCReport",
    "ScalingReport",
    "golden_max",
    "legendre",
    "legendre_argmax",
    "plateau_rate",
    "rate_region",
    "rate_curve",
    "gc_symmetry_check",
    "limit_H",
    "limit_G",
    "h_region",
    "g_region",
    "limit_curve",
    "conjugate",
    "scaling_convergence",
]

GOLDEN_TOL = 1e-8
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(fn: Callable[[float], float], a: float, b: float, tol: float = GOLDEN_TOL) -> tuple[float, float, int]:
    """Maximize a unimodal ``fn`` on [a, b] until the bracket is shorter than ``tol``.

    Returns (argmax, max, iterations). The best point seen is returned, so a
    maximum sitting on a kink is located as well as a smooth one.
    """
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return (c, fc, it) if fc >= fd else (d, fd, it)


def _canonical(j: float, params: WallParams) -> tuple[float, WallParams]:
    # I(j; bL, bR) = I(-j; bR, bL) because f(l; bL, bR) = f(-l; bR, bL)
    if params.beta_left <= params.beta_right:
        return j, params
    return -j, params.swapped()


def legendre_argmax(j: float, params: WallParams, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """(maximizing lambda, I(j)) by golden-section on (-beta_R + d, beta_L - d), d = 1e-6.

    When the maximizer set is an interval (j = 0) the smallest maximizer is
    reported.
    """
    j = float(j)
    jc, p = _canonical(j, params)
    sign = 1.0 if p is params else -1.0
    if jc == 0.0:
        lo, _ = flat_window(p)
        return sign * lo, 0.0
    delta = 10.0 * ENDPOINT_GUARD
    lam, val, _ = golden_max(lambda l: l * jc - cgf(l, p), -p.beta_right + delta, p.beta_left - delta, tol)
    return sign * lam, max(val, 0.0)


def legendre(j: float, params: WallParams, tol: float = GOLDEN_TOL) -> float:
    """I(j) = sup over lambda of lambda j - f(lambda)."""
    return legendre_argmax(j, params, tol)[1]


def plateau_rate(j: float, params: WallParams) -> float | None:
    """Closed form of I on [-|j*|, |j*|]; None outside that segment."""
    js = j_star(params)
    d = params.beta_right - params.beta_left
    if js >= 0.0:
        if 0.0 <= j <= js:
            return 0.0
        if -js <= j < 0.0:
            return d * abs(j)
    else:
        if js <= j <= 0.0:
            return 0.0
        if 0.0 < j <= -js:
            return -d * abs(j)
    return None


def rate_region(j: float, params: WallParams) -> str:
    js = j_star(params)
    s = 1.0 if js >= 0.0 else -1.0
    x, jp = s * j, abs(js)
    if 0.0 <= x <= jp:
        return "flat"
    if -jp <= x < 0.0:
        return "linear"
    return "quadratic-right" if x > jp else "quadratic-left"


@dataclass
class RateCurve:
    """Samples (x, value) of a rate-type curve with branch labels."""

    kind: str
    x: np.ndarray
    value: np.ndarray
    region: list[str]
    affinity: float
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        from .io import write_csv

        rows = zip(self.x.tolist(), self.value.tolist(), self.region)
        write_csv(path, f"curve_{self.kind}", ["x", "value", "region"], rows, meta=self.meta)


def rate_curve(js: Sequence[float], params: WallParams, shortcut: bool = False) -> RateCurve:
    """I on a grid of currents.

    With ``shortcut`` the plateau segment uses its closed form, after checking
    once that the numerical transform reproduces it at +-j*/2.
    """
    js = np.asarray(js, dtype=float)
    if shortcut:
        jh = 0.5 * j_star(params)
        for probe in (jh, -jh):
            closed = plateau_rate(probe, params)
            if abs(legendre(probe, params) - closed) > 1e-6:
                raise RuntimeError("numerical transform disagrees with the plateau closed form")
    vals = []
    for j in js:
        closed = plateau_rate(float(j), params) if shortcut else None
        vals.append(closed if closed is not None else legendre(float(j), params))
    return RateCurve(
        "I",
        js,
        np.array(vals),
        [rate_region(float(j), params) for j in js],
        affinity=params.beta_left - params.beta_right,
        meta={"beta_left": params.beta_left, "beta_right": params.beta_right},
    )


@dataclass(frozen=True)
class GCReport:
    max_residual: float
    passed: bool
    tolerance: float


def gc_symmetry_check(curve: RateCurve, tolerance: float = 1e-6) -> GCReport:
    """max |I(j) - a j - I(-j)| over a symmetric grid, a being the curve's affinity."""
    x = curve.x
    if x.size == 0 or not np.allclose(x, -x[::-1], rtol=0.0, atol=1e-12):
        raise ValueError("grid must be symmetric about 0")
    res = np.abs(curve.value - curve.affinity * x - curve.value[::-1])
    worst = float(res.max())
    return GCReport(worst, worst <= tolerance, tolerance)


def _check_T(T: float) -> None:
    if not T > 0.0:
        raise ValueError(f"T must be > 0, got {T!r}")


def h_region(lam: float, tau: float, T: float) -> str:
    if tau == 0.0:
        return "quadratic-right" if lam >= 0.0 else "quadratic-left"
    x = lam * tau
    if x > 0.0:
        return "quadratic-right"
    if x >= -tau * tau / (T * T):
        return "flat"
    return "quadratic-left"


def limit_H(lam: float, tau: float, T: float, kappa: float | None = None) -> float:
    """Small-gradient limit of eps^-2 f(eps lambda); kappa defaults to sqrt(T/2pi)."""
    _check_T(T)
    k = scaling_conductivity(T) if kappa is None else kappa
    region = h_region(lam, tau, T)
    if tau == 0.0:
        return k * lam * lam * T * T
    if region == "quadratic-right":
        return k * tau * lam + k * lam * lam * T * T
    if region == "flat":
        return 0.0
    m = lam + tau / (T * T)
    return -k * tau * m + k * m * m * T * T


def g_region(j: float, tau: float, T: float, kappa: float | None = None) -> str:
    k = scaling_conductivity(T) if kappa is None else kappa
    if tau == 0.0:
        return "quadratic-right" if j >= 0.0 else "quadratic-left"
    x, edge = j * tau, k * tau * tau
    if x > edge:
        return "quadratic-right"
    if x >= 0.0:
        return "flat"
    if x >= -edge:
        return "linear"
    return "quadratic-left"


def limit_G(j: float, tau: float, T: float, kappa: float | None = None) -> float:
    """Small-gradient limit of eps^-2 I(eps j); the Legendre transform of :func:`limit_H`."""
    _check_T(T)
    k = scaling_conductivity(T) if kappa is None else kappa
    region = g_region(j, tau, T, k)
    if region == "flat":
        return 0.0
    if region == "linear":
        return -j * tau / (T * T)
    return (j - k * tau) ** 2 / (4.0 * k * T * T)


def limit_curve(kind: str, xs: Sequence[float], tau: float, T: float, kappa: float | None = None) -> RateCurve:
    """H (kind 'H') or G (kind 'G') sampled on ``xs``."""
    xs = np.asarray(xs, dtype=float)
    k = scaling_conductivity(T) if kappa is None else kappa
    if kind == "H":
        vals = [limit_H(x, tau, T, k) for x in xs]
        regions = [h_region(x, tau, T) for x in xs]
    elif kind == "G":
        vals = [limit_G(x, tau, T, k) for x in xs]
        regions = [g_region(x, tau, T, k) for x in xs]
    else:
        raise ValueError("kind must be 'H' or 'G'")
    return RateCurve(kind, xs, np.array(vals), regions, affinity=-tau / (T * T),
                     meta={"tau": tau, "T": T, "kappa": k})


def conjugate(fn: Callable[[float], float], x: float, bound: float = 50.0, tol: float = 1e-10) -> float:
    """Numerical sup over |y| <= bound of y x - fn(y) for convex ``fn``."""
    return golden_max(lambda y: y * x - fn(y), -bound, bound, tol)[1]


@dataclass(frozen=True)
class ScalingReport:
    kind: str
    epsilons: tuple[float, ...]
    gaps: tuple[float, ...]
    monotone: bool
    passed: bool
    tolerance: float


def scaling_convergence(
    grid: Sequence[float],
    tau: float,
    T: float,
    epsilons: Sequence[float],
    kind: str = "H",
    tolerance: float = 5e-3,
) -> ScalingReport:
    """Sup-norm gap between eps^-2 f(eps .) and H, or eps^-2 I(eps .) and G.

    Passes when the gaps shrink strictly along the decreasing ``epsilons``
    and the last one is at most ``tolerance``.
    """
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])) or any(e <= 0.0 for e in eps):
        raise ValueError("epsilons must be positive and strictly decreasing")
    grid = np.asarray(grid, dtype=float)
    gaps = []
    for e in eps:
        walls = ScaledParams(T, tau, e).walls()
        if kind == "H":
            lo, hi = -walls.beta_right + ENDPOINT_GUARD, walls.beta_left - ENDPOINT_GUARD
            if np.any(e * grid <= lo) or np.any(e * grid >= hi):
                raise ValueError(f"epsilon={e:g} puts eps*lambda outside the CGF domain")
            num = np.array([cgf(e * x, walls) for x in grid]) / (e * e)
            ref = np.array([limit_H(x, tau, T) for x in grid])
        elif kind == "G":
            num = np.array([legendre(e * x, walls) for x in grid]) / (e * e)
            ref = np.array([limit_G(x, tau, T) for x in grid])
        else:
            raise ValueError("kind must be 'H' or 'G'")
        gaps.append(float(np.max(np.abs(num - ref))))
    monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
    return ScalingReport(kind, tuple(eps), tuple(gaps), monotone, monotone and gaps[-1] <= tolerance, tolerance)
