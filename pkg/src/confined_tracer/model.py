"""Parameter types and closed-form scalars for the confined tracer.

A tracer moves freely in [0, 1]. Each time it hits a wall it is re-emitted
with a speed drawn from the Rayleigh law phi_beta(v) = beta v exp(-beta v^2 / 2),
where beta is the inverse temperature of that wall. Natural units are used
throughout (Boltzmann constant and tracer mass equal to one).

Sign conventions
----------------
* Wall index -1 is the left wall (beta_left), +1 the right wall (beta_right).
* A positive current J means energy flows from the left wall to the right one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "WallParams",
    "ScaledParams",
    "CollisionRecord",
    "CurrentStats",
    "conductivity",
    "scaling_conductivity",
    "mean_gap",
    "speed_fourth_moment",
    "green_kubo_variance",
    "equilibrium_variance_rate",
    "j_star",
]


def _positive_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class WallParams:
    """Inverse temperatures of the two walls."""

    beta_left: float
    beta_right: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta_left", _positive_finite("beta_left", self.beta_left))
        object.__setattr__(self, "beta_right", _positive_finite("beta_right", self.beta_right))
        for name, temp in (("T_left", self.T_left), ("T_right", self.T_right)):
            if not math.isfinite(temp):
                raise ValueError(f"{name} = 1/beta is not finite")

    @classmethod
    def from_temperatures(cls, T_left: float, T_right: float) -> "WallParams":
        return cls(1.0 / _positive_finite("T_left", T_left), 1.0 / _positive_finite("T_right", T_right))

    @property
    def T_left(self) -> float:
        return 1.0 / self.beta_left

    @property
    def T_right(self) -> float:
        return 1.0 / self.beta_right

    @property
    def is_equilibrium(self) -> bool:
        return self.beta_left == self.beta_right

    def beta(self, wall: int) -> float:
        """Inverse temperature of wall -1 (left) or +1 (right)."""
        if wall == -1:
            return self.beta_left
        if wall == 1:
            return self.beta_right
        raise ValueError(f"wall must be -1 or +1, got {wall!r}")

    def swapped(self) -> "WallParams":
        return WallParams(self.beta_right, self.beta_left)

    def to_scaled(self) -> "ScaledParams":
        """Mean temperature and gradient, with epsilon = 1."""
        T = 0.5 * (self.T_left + self.T_right)
        return ScaledParams(T=T, tau=self.T_left - self.T_right, epsilon=1.0)


@dataclass(frozen=True)
class ScaledParams:
    """Small-gradient parametrization.

    The walls sit at temperatures T + eps*tau/2 (left) and T - eps*tau/2
    (right), so ``tau > 0`` drives energy from left to right.
    """

    T: float
    tau: float
    epsilon: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "T", _positive_finite("T", self.T))
        tau = float(self.tau)
        eps = float(self.epsilon)
        if not math.isfinite(tau):
            raise ValueError("tau must be finite")
        if not math.isfinite(eps) or eps < 0.0:
            raise ValueError(f"epsilon must be finite and >= 0, got {eps!r}")
        if abs(eps * tau) / 2.0 >= self.T:
            raise ValueError(
                f"|epsilon*tau|/2 = {abs(eps * tau) / 2.0:g} must be < T = {self.T:g}"
            )
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "epsilon", eps)

    @property
    def T_left(self) -> float:
        return self.T + 0.5 * self.epsilon * self.tau

    @property
    def T_right(self) -> float:
        return self.T - 0.5 * self.epsilon * self.tau

    def walls(self) -> WallParams:
        return WallParams(1.0 / self.T_left, 1.0 / self.T_right)


@dataclass(frozen=True)
class CollisionRecord:
    """One wall hit: index k >= 1, time S_k, wall sign sigma_k, incoming speed v_k."""

    k: int
    time: float
    sign: int
    speed: float


@dataclass(frozen=True)
class CurrentStats:
    """Energy current J[0, t] and collision count N_t over one trajectory."""

    t: float
    current: float
    collisions: int

    @property
    def current_rate(self) -> float:
        return self.current / self.t

    @property
    def collision_rate(self) -> float:
        return self.collisions / self.t


def mean_gap(beta: float) -> float:
    """Mean flight time E[1/v] = sqrt(beta*pi/2) under phi_beta."""
    beta = _positive_finite("beta", beta)
    return math.sqrt(beta * math.pi / 2.0)


def speed_fourth_moment(beta: float) -> float:
    """E[v^4] = 8 / beta^2 under phi_beta."""
    beta = _positive_finite("beta", beta)
    return 8.0 / beta**2


def conductivity(params: WallParams) -> float:
    """kappa with 1/kappa = mean_gap(beta_left) + mean_gap(beta_right)."""
    return 1.0 / (mean_gap(params.beta_left) + mean_gap(params.beta_right))


def scaling_conductivity(T: float) -> float:
    """Equal-temperature constant sqrt(T / 2 pi).

    Coincides with :func:`conductivity` at beta_left = beta_right = 1/T only.
    """
    T = _positive_finite("T", T)
    return math.sqrt(T / (2.0 * math.pi))


def j_star(params: WallParams) -> float:
    """Stationary mean current kappa * (T_left - T_right)."""
    return conductivity(params) * (params.T_left - params.T_right)


def green_kubo_variance(T: float) -> float:
    """Tabulated Green-Kubo coefficient 4 kappa(T) T^2.

    This is the closed form (2/beta^2) sqrt(2/(beta pi)) at beta = 1/T. The
    current variance rate actually produced by the dynamics is half of it,
    see :func:`equilibrium_variance_rate`.
    """
    T = _positive_finite("T", T)
    return 4.0 * conductivity(WallParams(1.0 / T, 1.0 / T)) * T * T


def equilibrium_variance_rate(T: float) -> float:
    """lim Var(J[0,t]) / t at equal wall temperatures T.

    Renewal-reward value E[R^2] / E[C] for one left-right cycle, where
    R = (v_a^2 - v_b^2)/2 and C = 1/v_a + 1/v_b, giving 2 kappa(T) T^2.
    """
    T = _positive_finite("T", T)
    return 2.0 * conductivity(WallParams(1.0 / T, 1.0 / T)) * T * T
