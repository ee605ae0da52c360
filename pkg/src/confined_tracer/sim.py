"""Event-driven simulation of the confined tracer and Monte Carlo ensembles.

Between wall hits the tracer moves at constant speed across the unit
interval, so a flight at speed v lasts exactly 1/v. Only the hit times
S_k, the wall signs sigma_k and the incoming speeds v_k are generated. The
flights of one trajectory are drawn in vectorized chunks; the current is
accumulated with exact (``math.fsum``) partial sums so memory stays bounded
by the chunk size.

Every replica i of a run with seed s draws from its own PCG64 stream keyed by
``SeedSequence(s, spawn_key=(i,))``. Ensembles are therefore bit-identical
for any number of worker processes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .model import CollisionRecord, CurrentStats, WallParams, mean_gap

__all__ = [
    "DEFAULT_SEED",
    "SimConfig",
    "CollisionLog",
    "PathResult",
    "EnsembleResult",
    "RenewalReport",
    "KSReport",
    "EmpiricalCgf",
    "sample_speed",
    "rayleigh_speeds",
    "replica_rng",
    "simulate",
    "simulate_path",
    "run_ensemble",
    "map_replicas",
    "renewal_rate_check",
    "stationary_speed_test",
    "halfgauss_ks",
    "empirical_cgf",
]

DEFAULT_SEED = 12345
_CHUNK_MIN = 64
_CHUNK_MAX = 1 << 17

# speeds(k, emitting_wall, u) -> v; k is the flight index (>= 1), emitting_wall
# is -1 (left) or +1 (right), u is uniform on [0, 1).
SpeedLaw = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def sample_speed(beta: float, u: float) -> float:
    """Inverse-CDF draw v = sqrt(-2 ln(u) / beta) from phi_beta."""
    if not beta > 0.0:
        raise ValueError(f"beta must be > 0, got {beta!r}")
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie strictly inside (0, 1), got {u!r}")
    return math.sqrt(-2.0 * math.log(u) / beta)


def rayleigh_speeds(beta: np.ndarray | float, u: np.ndarray) -> np.ndarray:
    """Vectorized draw from phi_beta for u in [0, 1), using 1 - u in (0, 1]."""
    return np.sqrt(-2.0 * np.log1p(-u) / beta)


class _WallLaw:
    """Untilted wall laws: phi at the emitting wall's inverse temperature."""

    def __init__(self, params: WallParams) -> None:
        self.beta_left = params.beta_left
        self.beta_right = params.beta_right

    def __call__(self, k: np.ndarray, walls: np.ndarray, u: np.ndarray) -> np.ndarray:
        beta = np.where(walls < 0, self.beta_left, self.beta_right)
        return rayleigh_speeds(beta, u)


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Independent generator for one replica of a seeded run."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SimConfig:
    """One trajectory specification.

    ``initial_state`` is ``(q0, p0)``; when omitted the tracer starts at the
    left wall with p0 drawn from the left wall's law.
    """

    params: WallParams
    horizon: float
    seed: int = DEFAULT_SEED
    initial_state: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        h = float(self.horizon)
        if not math.isfinite(h) or h <= 0.0:
            raise ValueError(f"horizon must be finite and > 0, got {self.horizon!r}")
        object.__setattr__(self, "horizon", h)
        if self.initial_state is not None:
            q0, p0 = (float(x) for x in self.initial_state)
            if not (math.isfinite(q0) and math.isfinite(p0)):
                raise ValueError("initial state must be finite")
            if not 0.0 <= q0 <= 1.0:
                raise ValueError(f"q0 must lie in [0, 1], got {q0!r}")
            if p0 == 0.0:
                raise ValueError("p0 must be nonzero")
            object.__setattr__(self, "initial_state", (q0, p0))


@dataclass
class CollisionLog:
    """Columns k, S_k, sigma_k, v_k of (the tail of) a trajectory."""

    k: np.ndarray
    time: np.ndarray
    sign: np.ndarray
    speed: np.ndarray
    truncated: bool = False

    def __len__(self) -> int:
        return int(self.k.size)

    def records(self) -> list[CollisionRecord]:
        return [
            CollisionRecord(int(k), float(s), int(g), float(v))
            for k, s, g, v in zip(self.k, self.time, self.sign, self.speed)
        ]

    def current(self) -> float:
        """J recomputed from the logged collisions (exact summation)."""
        return math.fsum(_energy_terms(self.speed, self.sign).tolist())

    def to_csv(self, path: str | os.PathLike) -> None:
        from .io import write_csv

        rows = zip(self.k.tolist(), self.time.tolist(), self.sign.tolist(), self.speed.tolist())
        write_csv(path, "collision_log", ["k", "S_k", "sigma_k", "v_k"], rows,
                  meta={"truncated": self.truncated})


@dataclass
class PathResult:
    """Everything one simulated trajectory reports."""

    stats: CurrentStats
    s0: float
    p0: float
    emitted_left: int
    emitted_right: int
    pending_wall: int
    pending_speed: float
    log: CollisionLog | None = None
    probe_speeds: np.ndarray | None = None


def _energy_terms(speed: np.ndarray, sign: np.ndarray) -> np.ndarray:
    return 0.5 * speed * speed * sign


def _chunk_size(expected_flights: float) -> int:
    n = int(1.02 * expected_flights) + _CHUNK_MIN
    return max(_CHUNK_MIN, min(n, _CHUNK_MAX))


def _expected_flights(params: WallParams, horizon: float) -> float:
    return 2.0 * horizon / (mean_gap(params.beta_left) + mean_gap(params.beta_right))


def simulate_path(
    law: SpeedLaw,
    horizon: float,
    rng: np.random.Generator,
    *,
    p0_beta: float,
    initial_state: tuple[float, float] | None = None,
    chunk: int = 4096,
    log_limit: int | None = 0,
    probes: Sequence[float] | None = None,
) -> PathResult:
    """Run one trajectory with flight speeds supplied by ``law``.

    Parameters
    ----------
    law
        Speed law for flight k given its emitting wall.
    horizon
        Observation time t; hits with S_k <= t are counted.
    rng
        Source of uniforms. One uniform is consumed for a random p0 and then
        ``chunk`` per block of flights.
    p0_beta
        Inverse temperature used for p0 when ``initial_state`` is None.
    log_limit
        0 keeps no log, None keeps every collision, n > 0 keeps the last n.
    probes
        Sorted times in [0, horizon] at which |p_t| is recorded.
    """
    if initial_state is None:
        q0, p0 = 0.0, float(rayleigh_speeds(p0_beta, np.array([rng.random()]))[0])
    else:
        q0, p0 = initial_state
    sigma0 = 1 if p0 > 0 else -1
    speed0 = abs(p0)
    s0 = sigma0 * ((sigma0 + 1) / 2 - q0) / speed0 if speed0 > 0.0 else math.inf

    probe_t = None if probes is None else np.asarray(probes, dtype=float)
    probe_v = None
    if probe_t is not None:
        if probe_t.size and (np.any(np.diff(probe_t) < 0) or probe_t[0] < 0 or probe_t[-1] > horizon):
            raise ValueError("probe times must be sorted and lie in [0, horizon]")
        probe_v = np.full(probe_t.size, speed0)

    parts: list[float] = []
    log_parts: list[tuple[np.ndarray, ...]] = []
    truncated = False
    n_hits = 0
    pending_wall, pending_speed = 0, math.nan
    k_next = 1
    s_prev = s0
    while s_prev <= horizon:
        k = np.arange(k_next, k_next + chunk, dtype=np.int64)
        walls = np.where((k - 1) % 2 == 0, sigma0, -sigma0).astype(np.int8)
        v = law(k, walls, rng.random(chunk))
        with np.errstate(divide="ignore"):
            times = s_prev + np.cumsum(1.0 / v)
        m = int(np.searchsorted(times, horizon, side="right"))

        if probe_t is not None:
            lo = int(np.searchsorted(probe_t, s_prev, side="left"))
            hi = int(np.searchsorted(probe_t, times[-1], side="left"))
            if hi > lo:
                idx = np.searchsorted(times, probe_t[lo:hi], side="right")
                probe_v[lo:hi] = v[idx]

        if m:
            sign = -walls[:m]
            terms = _energy_terms(v[:m], sign).tolist()
            hi_part = math.fsum(terms)
            terms.append(-hi_part)
            parts.extend((hi_part, math.fsum(terms)))
            n_hits += m
            if log_limit != 0:
                log_parts.append((k[:m], times[:m], sign.astype(np.int8), v[:m]))
                if log_limit is not None:
                    log_parts, cut = _trim(log_parts, log_limit)
                    truncated = truncated or cut
        if m < chunk:
            pending_wall, pending_speed = int(walls[m]), float(v[m])
            break
        s_prev = float(times[-1])
        k_next += chunk

    emitted_first = (n_hits + 1) // 2
    emitted_other = n_hits // 2
    if sigma0 < 0:
        emitted_left, emitted_right = emitted_first, emitted_other
    else:
        emitted_left, emitted_right = emitted_other, emitted_first

    log = None
    if log_limit != 0:
        if log_parts:
            cols = [np.concatenate(c) for c in zip(*log_parts)]
        else:
            cols = [np.empty(0, np.int64), np.empty(0), np.empty(0, np.int8), np.empty(0)]
        log = CollisionLog(*cols, truncated=truncated)

    return PathResult(
        stats=CurrentStats(horizon, math.fsum(parts), n_hits),
        s0=s0,
        p0=p0,
        emitted_left=emitted_left,
        emitted_right=emitted_right,
        pending_wall=pending_wall,
        pending_speed=pending_speed,
        log=log,
        probe_speeds=probe_v,
    )


def _trim(parts: list[tuple[np.ndarray, ...]], limit: int) -> tuple[list, bool]:
    total = sum(p[0].size for p in parts)
    if total <= limit:
        return parts, False
    cols = [np.concatenate(c)[-limit:] for c in zip(*parts)]
    return [tuple(cols)], True


def simulate(config: SimConfig, *, replica: int = 0, log_limit: int | None = None) -> tuple[CurrentStats, CollisionLog]:
    """Simulate one trajectory; returns the statistics and the collision log."""
    res = simulate_path(
        _WallLaw(config.params),
        config.horizon,
        replica_rng(config.seed, replica),
        p0_beta=config.params.beta_left,
        initial_state=config.initial_state,
        chunk=_chunk_size(_expected_flights(config.params, config.horizon)),
        log_limit=log_limit,
    )
    return res.stats, res.log


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Per-replica J[0,t] and N_t, with aggregates derived from them."""

    horizon: float
    currents: np.ndarray
    collisions: np.ndarray
    seed: int = DEFAULT_SEED
    params: WallParams | None = None

    @property
    def replicas(self) -> int:
        return int(self.currents.size)

    @property
    def stats(self) -> list[CurrentStats]:
        return [CurrentStats(self.horizon, float(j), int(n)) for j, n in zip(self.currents, self.collisions)]

    @property
    def current_rates(self) -> np.ndarray:
        return self.currents / self.horizon

    @property
    def collision_rates(self) -> np.ndarray:
        return self.collisions / self.horizon

    @property
    def mean_current(self) -> float:
        return float(np.mean(self.current_rates))

    @property
    def var_current(self) -> float:
        """Sample variance of J/t across replicas."""
        return float(np.var(self.current_rates, ddof=1)) if self.replicas > 1 else 0.0

    @property
    def stderr_current(self) -> float:
        return math.sqrt(self.var_current / self.replicas)

    @property
    def variance_rate(self) -> float:
        """Sample estimate of Var(J[0,t]) / t."""
        return self.var_current * self.horizon

    @property
    def mean_collision_rate(self) -> float:
        return float(np.mean(self.collision_rates))

    @property
    def var_collision_rate(self) -> float:
        return float(np.var(self.collision_rates, ddof=1)) if self.replicas > 1 else 0.0

    @property
    def stderr_collision_rate(self) -> float:
        return math.sqrt(self.var_collision_rate / self.replicas)

    def to_csv(self, path: str | os.PathLike, meta: dict | None = None) -> None:
        from .io import write_csv

        rows = ((i, self.horizon, float(j), int(n)) for i, (j, n) in enumerate(zip(self.currents, self.collisions)))
        write_csv(path, "ensemble", ["replica", "t", "J", "N_t"], rows, meta=meta)


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        return 1
    if workers <= 0:
        return os.cpu_count() or 1
    return int(workers)


def map_replicas(fn: Callable[[int], object], replicas: int, workers: int | None = None) -> list:
    """Evaluate ``fn(i)`` for i < replicas, in replica order.

    ``fn`` must be picklable when ``workers > 1``. Output order and values do
    not depend on the worker count.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    workers = min(_resolve_workers(workers), replicas)
    if workers == 1:
        return [fn(i) for i in range(replicas)]
    block = max(1, replicas // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(replicas), chunksize=block))


@dataclass(frozen=True)
class _ReplicaStats:
    config: SimConfig

    def __call__(self, i: int) -> tuple[float, int]:
        stats, _ = simulate(self.config, replica=i, log_limit=0)
        return stats.current, stats.collisions


def run_ensemble(config: SimConfig, replicas: int, workers: int | None = None) -> EnsembleResult:
    """Independent replicas 0..replicas-1 of ``config``."""
    out = map_replicas(_ReplicaStats(config), replicas, workers)
    j = np.array([o[0] for o in out], dtype=float)
    n = np.array([o[1] for o in out], dtype=np.int64)
    return EnsembleResult(config.horizon, j, n, seed=config.seed, params=config.params)


@dataclass(frozen=True)
class RenewalReport:
    mean: float
    variance: float
    stderr: float
    expected: float
    deviation: float
    passed: bool


def renewal_rate_check(result: EnsembleResult, beta: float) -> RenewalReport:
    """Compare the mean of N_t/t with 1/E[1/v]; fail beyond 4 standard errors."""
    if result.params is not None and not (
        result.params.beta_left == beta and result.params.beta_right == beta
    ):
        raise ValueError("renewal check needs an equilibrium ensemble at the given beta")
    expected = 1.0 / mean_gap(beta)
    mean = result.mean_collision_rate
    se = result.stderr_collision_rate
    dev = mean - expected
    return RenewalReport(mean, result.var_collision_rate, se, expected, dev, abs(dev) <= 4.0 * se)


@dataclass(frozen=True)
class KSReport:
    statistic: float
    pvalue: float
    samples: int
    passed: bool
    alpha: float = 0.01


def halfgauss_ks(samples: np.ndarray, beta: float, alpha: float = 0.01) -> KSReport:
    """KS test of speed samples against the density sqrt(2 beta/pi) exp(-beta p^2/2)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 1000:
        raise ValueError(f"KS test needs at least 1000 samples, got {samples.size}")
    res = sps.kstest(samples, sps.halfnorm(scale=1.0 / math.sqrt(beta)).cdf)
    return KSReport(float(res.statistic), float(res.pvalue), int(samples.size), bool(res.pvalue >= alpha), alpha)


@dataclass(frozen=True)
class _ReplicaProbe:
    config: SimConfig
    probes: tuple[float, ...]

    def __call__(self, i: int) -> np.ndarray:
        res = simulate_path(
            _WallLaw(self.config.params),
            self.config.horizon,
            replica_rng(self.config.seed, i),
            p0_beta=self.config.params.beta_left,
            initial_state=self.config.initial_state,
            chunk=_chunk_size(_expected_flights(self.config.params, self.config.horizon)),
            probes=self.probes,
        )
        return res.probe_speeds


def stationary_speed_test(
    config: SimConfig,
    sample_times: Iterable[float],
    replicas: int,
    workers: int | None = None,
    alpha: float = 0.01,
) -> KSReport:
    """KS test of |p_t| at ``sample_times`` over ``replicas`` trajectories.

    The horizon of ``config`` is replaced by the last sample time.
    """
    params = config.params
    if not params.is_equilibrium:
        raise ValueError("stationary speed test needs equal wall temperatures")
    times = tuple(sorted(float(s) for s in sample_times))
    if not times:
        raise ValueError("no sample times given")
    if times[0] < 10.0 * mean_gap(params.beta_left):
        raise ValueError("sample times must be at least 10 mean flight times")
    n = replicas * len(times)
    if n < 1000:
        raise ValueError(f"{n} samples requested; the KS test needs at least 1000")
    cfg = SimConfig(params, times[-1], config.seed, config.initial_state)
    out = map_replicas(_ReplicaProbe(cfg, times), replicas, workers)
    return halfgauss_ks(np.concatenate(out), params.beta_left, alpha)


@dataclass(frozen=True)
class EmpiricalCgf:
    """Finite-time estimates of (1/t) log E[exp(lambda J[0,t])]."""

    lam: float
    t: float
    replicas: int
    tilted: float
    tilted_log_stderr: float
    naive: float
    effective_samples: float


@dataclass(frozen=True)
class _ReplicaTilted:
    params: WallParams
    lam: float
    t: float
    seed: int

    def __call__(self, i: int) -> float:
        bl, br, lam = self.params.beta_left, self.params.beta_right, self.lam
        proposal = WallParams(bl - lam, br + lam)
        res = simulate_path(
            _WallLaw(proposal),
            self.t,
            replica_rng(self.seed, i),
            p0_beta=bl,
            chunk=_chunk_size(_expected_flights(proposal, self.t)),
        )
        a_left = math.log(bl / (bl - lam))
        a_right = math.log(br / (br + lam))
        logw = res.emitted_left * a_left + res.emitted_right * a_right
        v = res.pending_speed
        if res.pending_wall < 0:
            logw += a_left - 0.5 * lam * v * v
        elif res.pending_wall > 0:
            logw += a_right + 0.5 * lam * v * v
        return logw


def empirical_cgf(
    params: WallParams,
    lam: float,
    t: float,
    replicas: int,
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
) -> EmpiricalCgf:
    """Monte Carlo estimate of the finite-time scaled CGF at ``lam``.

    The primary estimate simulates walls at inverse temperatures
    (beta_left - lam, beta_right + lam). Under that proposal e^{lam J} times
    the likelihood ratio is a product of per-flight constants, so the weight
    depends only on how many flights each wall emitted plus the flight still
    in progress at t. The plain average of e^{lam J} under the untilted law
    is reported alongside as ``naive``; it is dominated by rare paths and
    biased low at large lam * sqrt(t).
    """
    if not -params.beta_right < lam < params.beta_left:
        raise ValueError("lambda must lie in (-beta_right, beta_left)")
    logw = np.array(map_replicas(_ReplicaTilted(params, lam, t, seed), replicas, workers))

    def log_mean_exp(x: np.ndarray) -> float:
        m = float(np.max(x))
        return m + math.log(float(np.mean(np.exp(x - m))))

    w = np.exp(logw - logw.max())
    ess = float(w.sum() ** 2 / np.sum(w * w))
    rel_se = float(np.std(w, ddof=1) / (np.mean(w) * math.sqrt(replicas)))

    naive_cfg = SimConfig(params, t, seed + 1)
    naive = run_ensemble(naive_cfg, replicas, workers)
    return EmpiricalCgf(
        lam=lam,
        t=t,
        replicas=replicas,
        tilted=log_mean_exp(logw) / t,
        tilted_log_stderr=rel_se / t,
        naive=log_mean_exp(lam * naive.currents) / t,
        effective_samples=ess,
    )
