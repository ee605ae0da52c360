"""Tilted wall laws forcing the current to a target value in [-j*, j*].

For a wall at inverse temperature beta let gamma be the half-Gaussian speed
density sqrt(2 beta/pi) exp(-beta p^2/2), whose size-biased version is the
wall law phi_beta. Given alpha in [0, 1] and a threshold eps, the base law is
reweighted to

    pi(dp) = rho(p) gamma(dp),   rho = (1 - alpha)/gamma((0, eps]) on (0, eps],
                                       alpha / gamma((eps, inf)) on (eps, inf),

and the emitted speed follows the size-biased pi~(dp) = p pi(dp) / pi(p).
So pi~ is a mixture of phi_beta truncated to (0, eps] and to (eps, inf). As
eps -> 0 the slow component carries vanishing mass but makes the mean flight
time 1/pi(p) close to E_phi[1/v] / alpha. Each flight is therefore about
1/alpha times longer, and the current drops to alpha j*.

The first T_t = floor(2 (1 + eta) t / (m+ + m-)) flights use the tilted laws,
where m+- are the mean flight times 1/pi(p). All later flights use the
untilted ones. In the forward direction the left wall uses the tilt of its
own law. In the reversed direction the walls exchange tilted laws, which
reverses the current.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .model import WallParams, j_star
from .sim import DEFAULT_SEED, EnsembleResult, _chunk_size, map_replicas, rayleigh_speeds, replica_rng, simulate_path
from .model import CurrentStats

__all__ = [
    "TiltSpec",
    "TiltedLaw",
    "TiltedEnsemble",
    "CertificateRow",
    "Certificate",
    "tilted_measure",
    "switch_index",
    "simulate_tilted",
    "run_tilted",
    "kl_divergence",
    "entropy_rate",
    "entropy_limit",
    "lower_bound_certificate",
    "DEFAULT_EPSILONS",
    "DEFAULT_ETAS",
]

DEFAULT_EPSILONS = (0.1, 0.03, 0.01)
DEFAULT_ETAS = (0.3, 0.1, 0.03)
_J_SLACK = 1e-12


@dataclass(frozen=True)
class TiltSpec:
    """Target current, tilt strength alpha, threshold eps, horizon inflation eta."""

    target_j: float
    alpha: float
    epsilon: float
    eta: float
    direction: str = "forward"

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        if not self.epsilon > 0.0 or not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be > 0, got {self.epsilon!r}")
        if not self.eta > 0.0 or not math.isfinite(self.eta):
            raise ValueError(f"eta must be > 0, got {self.eta!r}")
        if self.direction not in ("forward", "reversed"):
            raise ValueError("direction must be 'forward' or 'reversed'")

    @classmethod
    def for_target(
        cls,
        target_j: float,
        params: WallParams,
        epsilon: float,
        eta: float,
        direction: str | None = None,
    ) -> "TiltSpec":
        """Spec reaching ``target_j``; the direction follows the sign of target_j * j*."""
        js = j_star(params)
        if abs(target_j) > abs(js) * (1.0 + _J_SLACK):
            raise ValueError(f"target {target_j!r} outside [-|j*|, |j*|] with j* = {js!r}")
        if target_j == 0.0:
            alpha = 0.0
            direction = direction or "forward"
        else:
            alpha = min(1.0, abs(target_j) / abs(js))
            natural = "forward" if target_j * js > 0.0 else "reversed"
            if direction is not None and direction != natural:
                raise ValueError(f"target {target_j!r} needs the {natural} direction")
            direction = natural
        return cls(float(target_j), alpha, float(epsilon), float(eta), direction)


class TiltedLaw:
    """pi~ for one wall: mixture of phi_beta truncated below and above eps."""

    def __init__(self, beta: float, alpha: float, epsilon: float) -> None:
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")
        self.beta, self.alpha, self.epsilon = float(beta), float(alpha), float(epsilon)
        z = epsilon * math.sqrt(beta / 2.0)
        self.gamma_low = math.erf(z)
        self.gamma_high = math.erfc(z)
        self.phi_low = -math.expm1(-0.5 * beta * epsilon * epsilon)
        self.phi_high = math.exp(-0.5 * beta * epsilon * epsilon)
        if not (self.gamma_low > 0.0 and self.gamma_high > 0.0 and self.phi_low > 0.0 and self.phi_high > 0.0):
            raise ValueError(f"epsilon={epsilon!r} leaves a component with zero mass")
        c = math.sqrt(2.0 / (math.pi * beta))
        low = (1.0 - alpha) * c * self.phi_low / self.gamma_low
        high = alpha * c * self.phi_high / self.gamma_high
        self.mean_speed_base = low + high
        self.w_low = low / self.mean_speed_base
        self.w_high = high / self.mean_speed_base

    # base law pi

    def rho(self, p: np.ndarray | float) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.where(p <= self.epsilon, (1.0 - self.alpha) / self.gamma_low, self.alpha / self.gamma_high)

    def gamma_pdf(self, p: np.ndarray | float) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return math.sqrt(2.0 * self.beta / math.pi) * np.exp(-0.5 * self.beta * p * p)

    def base_pdf(self, p: np.ndarray | float) -> np.ndarray:
        return self.rho(p) * self.gamma_pdf(p)

    # emitted law pi~

    def pdf(self, p: np.ndarray | float) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        phi = self.beta * p * np.exp(-0.5 * self.beta * p * p)
        scale = np.where(p <= self.epsilon, self.w_low / self.phi_low, self.w_high / self.phi_high)
        return np.where(p > 0.0, scale * phi, 0.0)

    def cdf(self, p: np.ndarray | float) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        low = self.w_low * -np.expm1(-0.5 * self.beta * np.minimum(p, self.epsilon) ** 2) / self.phi_low
        tail = np.exp(-0.5 * self.beta * (np.maximum(p, self.epsilon) ** 2 - self.epsilon**2))
        return np.where(p <= 0.0, 0.0, low + self.w_high * (1.0 - tail))

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF for u in [0, 1)."""
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        low = u < self.w_low
        if np.any(low):
            x = u[low] / self.w_low
            out[low] = np.sqrt(-2.0 * np.log1p(-x * self.phi_low) / self.beta)
        high = ~low
        if np.any(high):
            x = (u[high] - self.w_low) / self.w_high
            out[high] = np.sqrt(self.epsilon**2 - 2.0 * np.log1p(-x) / self.beta)
        return out

    def mean_flight_time(self) -> float:
        """E[1/p] under pi~, by quadrature of the density (equals 1 / pi(p))."""
        beta, eps = self.beta, self.epsilon
        total = 0.0
        if self.w_low > 0.0:
            total += self.w_low / self.phi_low * integrate.quad(lambda p: beta * math.exp(-0.5 * beta * p * p), 0.0, eps)[0]
        if self.w_high > 0.0:
            total += self.w_high / self.phi_high * integrate.quad(lambda p: beta * math.exp(-0.5 * beta * p * p), eps, math.inf)[0]
        return total

    def second_moment(self) -> float:
        """E[p^2] under pi~ in closed form."""
        beta, eps = self.beta, self.epsilon
        high = eps * eps + 2.0 / beta
        if self.w_low == 0.0:
            return self.w_high * high
        # E[p^2 | p <= eps] for the Rayleigh law
        low = (2.0 / beta - (eps * eps + 2.0 / beta) * self.phi_high) / self.phi_low
        return self.w_low * low + self.w_high * high

    def kl_closed_form(self, beta_ref: float) -> float:
        """Relative entropy of pi~ with respect to phi at ``beta_ref``."""
        h = 0.0
        if self.w_low > 0.0:
            h += self.w_low * math.log(self.w_low / self.phi_low)
        if self.w_high > 0.0:
            h += self.w_high * math.log(self.w_high / self.phi_high)
        return h + math.log(self.beta / beta_ref) - 0.5 * (self.beta - beta_ref) * self.second_moment()


def tilted_measure(spec: TiltSpec, wall: str, params: WallParams) -> TiltedLaw:
    """pi~ built on the left wall's law ('+', 'left') or the right wall's ('-', 'right')."""
    if wall in ("+", "left"):
        beta = params.beta_left
    elif wall in ("-", "right"):
        beta = params.beta_right
    else:
        raise ValueError("wall must be '+', '-', 'left' or 'right'")
    return TiltedLaw(beta, spec.alpha, spec.epsilon)


def kl_divergence(law: TiltedLaw, beta_ref: float) -> float:
    """H(pi~ | phi_beta_ref) by numerical integration of the closed-form densities."""
    beta, eps = law.beta, law.epsilon
    log_ratio0 = math.log(beta / beta_ref)

    def piece(weight: float, mass: float, a: float, b: float) -> float:
        if weight == 0.0:
            return 0.0
        c = weight / mass
        lc = math.log(c)

        def integrand(p: float) -> float:
            phi = beta * p * math.exp(-0.5 * beta * p * p)
            return c * phi * (lc + log_ratio0 - 0.5 * (beta - beta_ref) * p * p)

        val, _ = integrate.quad(integrand, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        return val

    total = piece(law.w_low, law.phi_low, 0.0, eps) + piece(law.w_high, law.phi_high, eps, math.inf)
    if not math.isfinite(total):
        raise ArithmeticError("relative entropy integral did not converge")
    return total


def _laws(spec: TiltSpec, params: WallParams) -> tuple[TiltedLaw, TiltedLaw]:
    plus = tilted_measure(spec, "+", params)
    minus = tilted_measure(spec, "-", params)
    return plus, minus


def switch_index(spec: TiltSpec, params: WallParams, t: float) -> int:
    """T_t = floor(2 (1 + eta) t / (m+ + m-))."""
    plus, minus = _laws(spec, params)
    m = plus.mean_flight_time() + minus.mean_flight_time()
    return int(math.floor(2.0 * (1.0 + spec.eta) * t / m))


def entropy_rate(spec: TiltSpec, params: WallParams) -> float:
    """Relative entropy per unit time of the tilted path law.

    Equal to T_t / t times the mean of the two per-flight divergences: each
    tilted law against the untilted law of the wall that uses it.
    """
    plus, minus = _laws(spec, params)
    m = plus.mean_flight_time() + minus.mean_flight_time()
    if spec.direction == "forward":
        kl = kl_divergence(plus, params.beta_left) + kl_divergence(minus, params.beta_right)
    else:
        kl = kl_divergence(minus, params.beta_left) + kl_divergence(plus, params.beta_right)
    return max(0.0, 2.0 * (1.0 + spec.eta) / m * 0.5 * kl)


class _TiltedFlights:
    """Flight k <= T_t from the tilted laws, afterwards from phi."""

    def __init__(self, spec: TiltSpec, params: WallParams, switch: int) -> None:
        plus, minus = _laws(spec, params)
        if spec.direction == "forward":
            self.left, self.right = plus, minus
        else:
            self.left, self.right = minus, plus
        self.beta_left, self.beta_right = params.beta_left, params.beta_right
        self.switch = switch

    def __call__(self, k: np.ndarray, walls: np.ndarray, u: np.ndarray) -> np.ndarray:
        out = rayleigh_speeds(np.where(walls < 0, self.beta_left, self.beta_right), u)
        tilted = k <= self.switch
        for law, mask in ((self.left, tilted & (walls < 0)), (self.right, tilted & (walls > 0))):
            if np.any(mask):
                out[mask] = law.sample(u[mask])
        return out


@dataclass(frozen=True)
class _TiltedReplica:
    spec: TiltSpec
    params: WallParams
    t: float
    seed: int
    switch: int

    def __call__(self, i: int) -> tuple[float, int]:
        res = simulate_path(
            _TiltedFlights(self.spec, self.params, self.switch),
            self.t,
            replica_rng(self.seed, i),
            p0_beta=self.params.beta_left,
            chunk=_chunk_size(self.switch / (1.0 + self.spec.eta)),
        )
        return res.stats.current, res.stats.collisions


def simulate_tilted(spec: TiltSpec, params: WallParams, t: float, seed: int = DEFAULT_SEED, replica: int = 0) -> CurrentStats:
    """One trajectory under the tilted law up to time t."""
    if not t > 0.0:
        raise ValueError("t must be > 0")
    j, n = _TiltedReplica(spec, params, float(t), seed, switch_index(spec, params, t))(replica)
    return CurrentStats(float(t), j, n)


@dataclass(frozen=True, eq=False)
class TiltedEnsemble:
    result: EnsembleResult
    switch: int

    @property
    def switch_frequency(self) -> float:
        """Fraction of replicas still on the tilted laws at t (N_t < T_t)."""
        return float(np.mean(self.result.collisions < self.switch))


def run_tilted(
    spec: TiltSpec,
    params: WallParams,
    t: float,
    replicas: int,
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
) -> TiltedEnsemble:
    switch = switch_index(spec, params, t)
    out = map_replicas(_TiltedReplica(spec, params, float(t), seed, switch), replicas, workers)
    res = EnsembleResult(
        float(t),
        np.array([o[0] for o in out], dtype=float),
        np.array([o[1] for o in out], dtype=np.int64),
        seed=seed,
        params=params,
    )
    return TiltedEnsemble(res, switch)


def _ladder_next(seq: Sequence[float]) -> float:
    ratio = seq[-1] / seq[-2] if len(seq) > 1 else 0.5
    return seq[-1] * ratio


def entropy_limit(
    target_j: float,
    params: WallParams,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    etas: Sequence[float] = DEFAULT_ETAS,
    direction: str | None = None,
    tol: float = 1e-5,
    max_steps: int = 60,
) -> tuple[float, float, int]:
    """Limit of the entropy rate as (eps, eta) descend the ladders jointly.

    The ladders are extended geometrically with their last ratio until two
    successive values differ by less than ``tol``. Returns
    (value at the end of the given ladders, extrapolated limit, steps used).
    """
    eps, etas_ = list(epsilons), list(etas)
    n = min(len(eps), len(etas_))
    eps, etas_ = eps[:n], etas_[:n]

    def rate(e: float, h: float) -> float:
        return entropy_rate(TiltSpec.for_target(target_j, params, e, h, direction), params)

    last = rate(eps[-1], etas_[-1])
    prev = last
    for step in range(1, max_steps + 1):
        e_next, h_next = _ladder_next(eps), _ladder_next(etas_)
        if e_next < 1e-100:
            break
        eps.append(e_next)
        etas_.append(h_next)
        cur = rate(e_next, h_next)
        if abs(cur - prev) < tol:
            return last, cur, step
        prev = cur
    return last, prev, max_steps


@dataclass(frozen=True)
class CertificateRow:
    epsilon: float
    eta: float
    t: float
    mean_j: float
    stderr_j: float
    entropy_rate: float
    I_target: float
    passed: bool


@dataclass(frozen=True)
class Certificate:
    target_j: float
    direction: str
    rows: tuple[CertificateRow, ...]
    entropy_at_ladder_end: float
    entropy_limit: float
    I_target: float
    mean_tolerance: float
    inconclusive: bool
    passed: bool

    def to_csv(self, path) -> None:
        from .io import write_csv

        cols = ["epsilon", "eta", "t", "mean_j", "stderr_j", "entropy_rate", "I_target", "pass"]
        rows = ((r.epsilon, r.eta, r.t, r.mean_j, r.stderr_j, r.entropy_rate, r.I_target, r.passed) for r in self.rows)
        write_csv(path, "certificate", cols, rows, meta={
            "target_j": self.target_j,
            "direction": self.direction,
            "entropy_limit": self.entropy_limit,
            "inconclusive": self.inconclusive,
            "passed": self.passed,
        })


def lower_bound_certificate(
    target_j: float,
    params: WallParams,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    etas: Sequence[float] = DEFAULT_ETAS,
    t: float = 1e5,
    replicas: int = 200,
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
    direction: str | None = None,
) -> Certificate:
    """Table over the (eps, eta) grid of mean J/t, its standard error and the entropy rate.

    Passes when the mean at the smallest (eps, eta) is within 5% of |j*| of the
    target and the limiting entropy rate is at most I(target) + 1e-2. When
    two standard errors exceed the mean tolerance the table is flagged
    inconclusive and does not pass.
    """
    from .rate import legendre

    I_target = legendre(target_j, params)
    mean_tol = 0.05 * abs(j_star(params))
    rows = []
    for e in epsilons:
        for h in etas:
            spec = TiltSpec.for_target(target_j, params, e, h, direction)
            ens = run_tilted(spec, params, t, replicas, seed, workers).result
            er = entropy_rate(spec, params)
            ok = abs(ens.mean_current - target_j) <= mean_tol and er <= I_target + 1e-2
            rows.append(CertificateRow(e, h, t, ens.mean_current, ens.stderr_current, er, I_target, ok))
    at_end, limit, _ = entropy_limit(target_j, params, epsilons, etas, direction)
    final = min(rows, key=lambda r: (r.epsilon, r.eta))
    inconclusive = 2.0 * final.stderr_j > mean_tol
    passed = (not inconclusive) and abs(final.mean_j - target_j) <= mean_tol and limit <= I_target + 1e-2
    dir_used = TiltSpec.for_target(target_j, params, epsilons[0], etas[0], direction).direction
    return Certificate(target_j, dir_used, tuple(rows), at_end, limit, I_target, mean_tol, inconclusive, passed)
