"""Robust adaptive wheel-velocity controller with barrier-bounded error.

The controller never models the plant.  It combines a proportional term
with a barrier term that stiffens as the tracking error approaches a
shrinking exponential envelope, and an adaptive gain that grows whenever
the error rides close to that envelope:

    theta_hat' = -delta * theta_hat + gamma * (e / (o^2 - e^2))^2
    command    = -(1/2) * k * e - gamma * (e / (o^2 - e^2)) * theta_hat

All operations require |e| < o; the supervisor performs that check first,
so no division by a non-positive envelope margin ever executes here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ContractError, InvalidParameterError


@dataclass(frozen=True)
class PpcParams:
    """Exponential performance envelope (shoot -> bound at rate 1/s)."""

    shoot: float
    bound: float
    rate: float

    def __post_init__(self):
        if not (self.shoot > self.bound > 0.0):
            raise InvalidParameterError(
                f"need shoot > bound > 0, got shoot={self.shoot!r} bound={self.bound!r}"
            )
        if not self.rate > 0.0:
            raise InvalidParameterError(f"rate must be positive, got {self.rate!r}")


def ppc_bound(t: float, p: PpcParams) -> float:
    """Envelope value (shoot - bound) * exp(-rate * t) + bound at t >= 0."""
    if t < 0.0:
        raise ContractError(f"t must be >= 0, got {t!r}")
    return (p.shoot - p.bound) * math.exp(-p.rate * t) + p.bound


@dataclass(frozen=True)
class AdaptiveState:
    """Adaptive gain theta_hat with its update and command constants."""

    theta_hat: float
    delta: float
    gamma: float
    k: float
    theta_hat0: float

    def __post_init__(self):
        for name in ("delta", "gamma", "k", "theta_hat0"):
            if not getattr(self, name) > 0.0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.theta_hat < 0.0:
            raise InvalidParameterError(f"theta_hat must be >= 0, got {self.theta_hat!r}")

    @classmethod
    def initial(cls, delta: float, gamma: float, k: float, theta_hat0: float) -> "AdaptiveState":
        return cls(theta_hat=theta_hat0, delta=delta, gamma=gamma, k=k, theta_hat0=theta_hat0)


def _barrier_ratio(e: float, o: float) -> float:
    denom = o * o - e * e
    if denom <= 0.0:
        raise ContractError(f"|e| >= o ({e!r} vs {o!r}); the safety layer owns this case")
    return e / denom


def adaptive_update(s: AdaptiveState, e: float, o: float, dt: float) -> AdaptiveState:
    """One forward-Euler step of the adaptive law at the controller rate.

    Requires |e| < o and dt*delta < 1, which keeps theta_hat nonnegative.
    """
    if not dt > 0.0 or dt * s.delta >= 1.0:
        raise ContractError(f"need 0 < dt and dt*delta < 1, got dt={dt!r} delta={s.delta!r}")
    ratio = _barrier_ratio(e, o)
    theta_new = s.theta_hat + dt * (-s.delta * s.theta_hat + s.gamma * ratio * ratio)
    return replace(s, theta_hat=theta_new)


def rac_command(e: float, o: float, s: AdaptiveState) -> float:
    """Robust adaptive command (rpm) for tracking error e inside envelope o."""
    return -0.5 * s.k * e - s.gamma * _barrier_ratio(e, o) * s.theta_hat


def blf_value(e: float, o: float) -> float:
    """Barrier metric log(o^2 / (o^2 - e^2)); +inf signals a violation.

    Total function: the violation signal is a value, not an exception.
    The supervisor decides what it means.  Evaluated as -log1p(-(e/o)^2),
    which is the same quantity without the rounding loss of the raw ratio
    at small errors.
    """
    x = (e / o) ** 2
    if x >= 1.0:
        return math.inf
    return -math.log1p(-x)


def lemma_check(e: float, o: float) -> bool:
    """Barrier metric is strictly below e^2/(o^2 - e^2) for 0 < |e| < o."""
    if not 0.0 < abs(e) < o:
        raise ContractError(f"need 0 < |e| < o, got e={e!r} o={o!r}")
    x = (e / o) ** 2
    if x < 1e-12:
        # true gap is x^2/2 + O(x^3), below float resolution of either side
        return True
    return blf_value(e, o) < x / (1.0 - x)


@dataclass(frozen=True)
class DiagnosticsConfig:
    """Offline analysis constants for bound plotting in simulation.

    These quantify the disturbance intensity and plant gain that the
    runtime controller never sees; they are supplied only by a tester who
    knows the simulated plant.
    """

    theta_star: float
    epsilon: float
    f_star: float
    gain: float

    def __post_init__(self):
        for name in ("theta_star", "epsilon", "f_star", "gain"):
            if not getattr(self, name) > 0.0:
                raise InvalidParameterError(f"{name} must be positive")

    def decay_envelope(self, s: AdaptiveState) -> tuple[float, float]:
        """Contraction rate and offset of the closed-loop energy bound."""
        rate = min(self.gain * s.k, s.delta)
        offset = 1.0 / (4.0 * self.epsilon) + 0.5 * self.gain * s.delta * self.theta_star**2
        return rate, offset
