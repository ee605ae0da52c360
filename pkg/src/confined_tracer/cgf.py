"""Scaled cumulant generating function of the energy current.

For one left-right cycle the reward is R = (v_a^2 - v_b^2)/2 and the duration
C = 1/v_a + 1/v_b. The growth rate f(lambda) of log E[exp(lambda J[0,t])] is
the root eta0 >= 0 of

    F(lambda, eta) = beta_L beta_R C(beta_R + lambda, eta) C(beta_L - lambda, eta) = 1,

    C(x, eta) = int_0^inf v exp(-eta/v - x v^2/2) dv,

when such a root exists, and 0 on the window between beta_L - beta_R and 0
where F(lambda, 0) <= 1. Outside (-beta_R, beta_L) f is infinite.

Quadrature
----------
With v = u / sqrt(x) one has C(x, eta) = K(eta sqrt(x)) / x where
K(a) = int u exp(-a/u - u^2/2) du. The integrand is analytic and decays
doubly exponentially in s = log u, so the trapezoid rule in s converges
geometrically. The grid is centred on the peak of u^2 exp(-a/u - u^2/2),
the positive root of u^3 - 2u - a = 0, and cut where the integrand falls
below exp(-75) of its peak. The step is halved until the rule agrees with
the rule on every second node to 1e-6, at which point its own error is far
below 1e-10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .model import WallParams

__all__ = [
    "DomainError",
    "SolverError",
    "CgfSolution",
    "Slope",
    "ENDPOINT_GUARD",
    "ROOT_TOL",
    "kernel_C",
    "quad_nodes",
    "big_F",
    "dF_dlambda",
    "dF_deta",
    "flat_window",
    "classify",
    "solve_cgf",
    "cgf",
    "cgf_derivative",
    "cgf_curve",
    "write_cgf_csv",
]

ENDPOINT_GUARD = 1e-6
ROOT_TOL = 1e-10
_TAIL = 75.0
_H_MAX = 0.125
_REFINE_TOL = 1e-6


class DomainError(ValueError):
    """Argument outside the region where the requested quantity is finite."""


class SolverError(RuntimeError):
    """The root of F(lambda, .) = 1 could not be bracketed or resolved."""


def _peak(a: float) -> float:
    """Positive root of u^3 - 2u - a = 0 (Newton from the right, monotone)."""
    u = max(math.sqrt(2.0), a ** (1.0 / 3.0)) + 1.0
    for _ in range(100):
        g = u * u * u - 2.0 * u - a
        step = g / (3.0 * u * u - 2.0)
        u -= step
        if abs(step) <= 1e-15 * u:
            break
    return u


@lru_cache(maxsize=4096)
def _unit_grid(a: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes u_i and weights w_i with sum w_i g(u_i) ~ int g(u) exp(-a/u - u^2/2) du."""
    us = _peak(a)
    hi = math.log(math.sqrt(3.0 * us * us + 2.0 * _TAIL + 30.0))
    lo_flat = math.log(us) - 0.5 * (_TAIL + 0.5 * us * us)
    lo = lo_flat if a == 0.0 else max(lo_flat, math.log(a / (_TAIL + 0.5 * us * us + a / us)))
    width = 1.0 / math.sqrt(a / us + 2.0 * us * us)
    h = min(_H_MAX, width / 3.0)
    while True:
        n = int(math.ceil((hi - lo) / h))
        s = lo + h * np.arange(n + 1)
        u = np.exp(s)
        w = h * u * np.exp(-a / u - 0.5 * u * u)
        fine = float(np.dot(w, u))
        coarse = 2.0 * float(np.dot(w[::2], u[::2]))
        if abs(fine - coarse) <= _REFINE_TOL * fine or h < 1e-4:
            return u, w
        h *= 0.5


def quad_nodes(x: float, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for int_0^inf g(v) exp(-eta/v - x v^2/2) dv."""
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"x must be > 0, got {x!r}")
    if not eta >= 0.0 or not math.isfinite(eta):
        raise DomainError(f"eta must be >= 0, got {eta!r}")
    r = math.sqrt(x)
    u, w = _unit_grid(eta * r)
    return u / r, w / r


def kernel_C(x: float, eta: float) -> float:
    """C(x, eta) = int_0^inf v exp(-eta/v - x v^2/2) dv."""
    v, w = quad_nodes(x, eta)
    return float(np.dot(w, v))


def _check_lambda(lam: float, params: WallParams) -> None:
    if not -params.beta_right < lam < params.beta_left:
        raise DomainError(
            f"lambda={lam!r} outside ({-params.beta_right!r}, {params.beta_left!r})"
        )


def big_F(lam: float, eta: float, params: WallParams) -> float:
    """F(lambda, eta) = beta_L beta_R C(beta_R + lambda, eta) C(beta_L - lambda, eta)."""
    _check_lambda(lam, params)
    bl, br = params.beta_left, params.beta_right
    return bl * br * kernel_C(br + lam, eta) * kernel_C(bl - lam, eta)


def _pair_grid(lam: float, eta: float, params: WallParams):
    _check_lambda(lam, params)
    v1, w1 = quad_nodes(params.beta_right + lam, eta)
    v2, w2 = quad_nodes(params.beta_left - lam, eta)
    return v1[:, None], v2[None, :], np.outer(w1, w2)


def dF_dlambda(lam: float, eta: float, params: WallParams) -> float:
    """beta_L beta_R  int int v1 v2 (v2^2 - v1^2)/2 e^{...} dv1 dv2."""
    v1, v2, w = _pair_grid(lam, eta, params)
    g = v1 * v2 * 0.5 * (v2 * v2 - v1 * v1)
    return params.beta_left * params.beta_right * float(np.sum(w * g))


def dF_deta(lam: float, eta: float, params: WallParams) -> float:
    """-beta_L beta_R  int int (v1 + v2) e^{...} dv1 dv2; always negative."""
    v1, v2, w = _pair_grid(lam, eta, params)
    return -params.beta_left * params.beta_right * float(np.sum(w * (v1 + v2)))


def flat_window(params: WallParams) -> tuple[float, float]:
    """Closed interval of lambda where f vanishes."""
    d = params.beta_left - params.beta_right
    return min(0.0, d), max(0.0, d)


def classify(lam: float, params: WallParams) -> str:
    """One of 'flat', 'analytic-positive', 'analytic-negative', 'infinite'."""
    if not -params.beta_right < lam < params.beta_left:
        return "infinite"
    lo, hi = flat_window(params)
    if lo <= lam <= hi:
        return "flat"
    return "analytic-positive" if lam > hi else "analytic-negative"


@dataclass(frozen=True)
class CgfSolution:
    """Root of F(lambda, eta0) = 1 with solver diagnostics."""

    lam: float
    eta0: float
    region: str
    residual: float
    iterations: int


def _solve_canonical(lam: float, params: WallParams) -> CgfSolution:
    bl, br = params.beta_left, params.beta_right
    region = classify(lam, params)
    if region == "infinite":
        return CgfSolution(lam, math.inf, region, math.nan, 0)
    if lam - (-br) < ENDPOINT_GUARD or bl - lam < ENDPOINT_GUARD:
        raise DomainError(f"lambda={lam!r} within {ENDPOINT_GUARD:g} of the domain boundary")
    if region == "flat":
        return CgfSolution(lam, 0.0, region, 0.0, 0)

    def g(eta: float) -> float:
        return big_F(lam, eta, params) - 1.0

    if g(0.0) <= 0.0:
        # F(., 0) - 1 vanishes quadratically at the window edges, so points a
        # rounding error past an edge are flat to working precision
        lo_w, hi_w = flat_window(params)
        if min(abs(lam - lo_w), abs(lam - hi_w)) <= 1e-9 * max(1.0, abs(lam)):
            return CgfSolution(lam, 0.0, "flat", 0.0, 0)
        raise SolverError(f"F(lambda={lam!r}, 0) <= 1 outside the flat window; quadrature failure")
    lo, hi = 0.0, 1.0
    doublings = 0
    while g(hi) >= 0.0:
        lo, hi = hi, 2.0 * hi
        doublings += 1
        if doublings > 200:
            raise SolverError(f"no bracket for lambda={lam!r} after 200 doublings")
    root, info = brentq(g, lo, hi, xtol=1e-16, rtol=4.0 * np.finfo(float).eps, full_output=True, maxiter=200)
    if not info.converged:
        raise SolverError(f"root iteration did not converge for lambda={lam!r}: {info.flag}")
    residual = abs(g(root))
    if residual > ROOT_TOL:
        raise SolverError(f"residual {residual:.3e} above {ROOT_TOL:g} at lambda={lam!r}")
    return CgfSolution(lam, float(root), region, residual, doublings + info.iterations)


_SWAP_REGION = {
    "analytic-positive": "analytic-negative",
    "analytic-negative": "analytic-positive",
    "flat": "flat",
    "infinite": "infinite",
}


def solve_cgf(lam: float, params: WallParams) -> CgfSolution:
    """f(lambda) with diagnostics.

    Parameters with beta_L > beta_R are solved through the swapped walls,
    using f(lambda; beta_L, beta_R) = f(-lambda; beta_R, beta_L).
    """
    lam = float(lam)
    if params.beta_left <= params.beta_right:
        return _solve_canonical(lam, params)
    sol = _solve_canonical(-lam, params.swapped())
    return CgfSolution(lam, sol.eta0, _SWAP_REGION[sol.region], sol.residual, sol.iterations)


def cgf(lam: float, params: WallParams) -> float:
    """f(lambda); +inf outside (-beta_R, beta_L)."""
    return solve_cgf(lam, params).eta0


class Slope(NamedTuple):
    value: float
    region: str


def cgf_derivative(lam: float, params: WallParams, side: str | None = None) -> Slope:
    """f'(lambda) = -F_lambda / F_eta at (lambda, f(lambda)).

    At the ends of the flat window f has a kink; there ``side`` must be
    '+' or '-' to pick the one-sided derivative. Inside the flat window the
    slope is 0.
    """
    lam = float(lam)
    region = classify(lam, params)
    if region == "infinite":
        raise DomainError(f"lambda={lam!r} outside the domain")
    lo, hi = flat_window(params)
    if lo < hi and lam in (lo, hi):
        if side not in ("+", "-"):
            raise DomainError(f"f has a kink at lambda={lam!r}; request side='+' or side='-'")
        if (side == "+") == (lam == lo):
            return Slope(0.0, "flat")
        region = "analytic-positive" if side == "+" else "analytic-negative"
    elif region == "flat":
        return Slope(0.0, "flat")
    eta0 = solve_cgf(lam, params).eta0
    return Slope(-dF_dlambda(lam, eta0, params) / dF_deta(lam, eta0, params), region)


def cgf_curve(lams: Sequence[float], params: WallParams) -> list[CgfSolution]:
    return [solve_cgf(l, params) for l in lams]


def write_cgf_csv(path, solutions: Sequence[CgfSolution], params: WallParams) -> None:
    from .io import write_csv

    rows = ((s.lam, s.eta0, s.region, s.residual, s.iterations) for s in solutions)
    write_csv(
        path,
        "cgf",
        ["lambda", "eta0", "region", "residual", "iterations"],
        rows,
        meta={"beta_left": params.beta_left, "beta_right": params.beta_right},
    )
