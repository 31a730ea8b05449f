"""Per-side actuation plant: a lumped first-order velocity channel.

Each side of the vehicle is driven through a pump / motor / gearbox chain
that reduces, at the control level, to a first-order lag from the rpm
command to the wheel linear velocity:

    v' = A * n_eff + (F - v) / tau,   A = K_v / tau

with an additive disturbance velocity F (m/s) and an optionally scaled
effective command n_eff (rpm).  Integration is fixed-step RK4 with the
command held over the step (zero-order hold) and the disturbance profile
evaluated at the RK4 stage times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ContractError, InvalidParameterError, NumericFaultError

DISTURBANCE_KINDS = ("none", "control_scale", "additive_step", "sinusoid")


@dataclass(frozen=True)
class ActuationChain:
    """Pump-to-wheel geometry used to derive the steady-state gain.

    pump_disp / motor_disp in m^3/rad, gear_ratio dimensionless,
    wheel_radius in m.  All strictly positive.
    """

    pump_disp: float
    motor_disp: float
    gear_ratio: float
    wheel_radius: float

    def __post_init__(self):
        for name in ("pump_disp", "motor_disp", "gear_ratio", "wheel_radius"):
            value = getattr(self, name)
            if not (value > 0.0) or not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be strictly positive, got {value!r}")


def derive_gain(chain: ActuationChain) -> float:
    """Steady-state gain K_v (m/s per rpm) of the actuation chain.

    Flow continuity through the pump and series motors, the gear
    reduction and the wheel radius collapse to
    K_v = 2*pi*r*D_p / (60*G*D_m).
    """
    return (2.0 * math.pi * chain.wheel_radius * chain.pump_disp) / (
        60.0 * chain.gear_ratio * chain.motor_disp
    )


@dataclass(frozen=True)
class PlantParams:
    """First-order channel parameters.

    k_v: steady-state gain (m/s per rpm), tau: time constant (s),
    n_max: command saturation (rpm).  tau must be positive: an
    instantaneous actuation chain is not physically realistic.
    """

    k_v: float
    tau: float
    n_max: float

    def __post_init__(self):
        if not (self.k_v > 0.0 and math.isfinite(self.k_v)):
            raise InvalidParameterError(f"k_v must be strictly positive, got {self.k_v!r}")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise InvalidParameterError(f"tau must be strictly positive, got {self.tau!r}")
        if not (self.n_max > 0.0 and math.isfinite(self.n_max)):
            raise InvalidParameterError(f"n_max must be strictly positive, got {self.n_max!r}")

    @property
    def a(self) -> float:
        """Control gain A = K_v / tau (positive by construction)."""
        return self.k_v / self.tau

    @classmethod
    def from_chain(cls, chain: ActuationChain, tau: float, n_max: float) -> "PlantParams":
        return cls(k_v=derive_gain(chain), tau=tau, n_max=n_max)


@dataclass(frozen=True)
class PlantState:
    """Wheel linear velocity (m/s) and simulation time (s)."""

    v: float = 0.0
    t: float = 0.0


@dataclass(frozen=True)
class DisturbanceProfile:
    """External disturbance acting on one side from t_start onward.

    kind selects the channel:
      none          -- identity
      control_scale -- effective command becomes (1 + magnitude) * n_cmd
      additive_step -- constant additive velocity F = magnitude (m/s)
      sinusoid      -- F = magnitude * sin(2*pi*frequency*(t - t_start))
    """

    kind: str = "none"
    t_start: float = 0.0
    magnitude: float = 0.0
    frequency: float = 0.0

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise InvalidParameterError(
                f"kind must be one of {DISTURBANCE_KINDS}, got {self.kind!r}"
            )
        if self.t_start < 0.0:
            raise InvalidParameterError(f"t_start must be >= 0, got {self.t_start!r}")
        if not math.isfinite(self.magnitude):
            raise InvalidParameterError("magnitude must be finite")
        if self.kind == "sinusoid" and not (self.frequency > 0.0):
            raise InvalidParameterError("sinusoid requires frequency > 0")

    @classmethod
    def none(cls) -> "DisturbanceProfile":
        return cls()


def eval_disturbance(profile: DisturbanceProfile, t: float, n_cmd: float) -> tuple[float, float]:
    """Disturbance at time t for command n_cmd: returns (F, n_eff).

    Total function: before onset every kind reduces to (0, n_cmd).
    """
    if profile.kind == "none" or t < profile.t_start:
        return 0.0, n_cmd
    if profile.kind == "control_scale":
        return 0.0, (1.0 + profile.magnitude) * n_cmd
    if profile.kind == "additive_step":
        return profile.magnitude, n_cmd
    # sinusoid
    f = profile.magnitude * math.sin(2.0 * math.pi * profile.frequency * (t - profile.t_start))
    return f, n_cmd


def saturate(n_p: float, n_max: float) -> float:
    """Clamp a command to the actuator range [-n_max, +n_max]."""
    return max(-n_max, min(n_max, n_p))


def step(
    state: PlantState,
    params: PlantParams,
    n_p: float,
    profile: DisturbanceProfile,
    dt: float,
) -> PlantState:
    """Advance the plant one fixed RK4 step under a held command.

    The command is saturated to [-n_max, n_max] before the disturbance is
    applied; a control_scale disturbance may therefore drive the effective
    command beyond n_max, modelling an actuator fault rather than a
    commanded overdraw.
    """
    if not dt > 0.0:
        raise ContractError(f"dt must be positive, got {dt!r}")
    if not math.isfinite(state.v):
        raise NumericFaultError(f"non-finite plant state v={state.v!r} at t={state.t!r}")
    n_sat = saturate(n_p, params.n_max)
    a = params.a
    inv_tau = 1.0 / params.tau
    t0 = state.t

    def deriv(t: float, v: float) -> float:
        f, n_eff = eval_disturbance(profile, t, n_sat)
        return a * n_eff + (f - v) * inv_tau

    k1 = deriv(t0, state.v)
    k2 = deriv(t0 + 0.5 * dt, state.v + 0.5 * dt * k1)
    k3 = deriv(t0 + 0.5 * dt, state.v + 0.5 * dt * k2)
    k4 = deriv(t0 + dt, state.v + dt * k3)
    v_new = state.v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not math.isfinite(v_new):
        raise NumericFaultError(f"plant integration produced non-finite v at t={t0!r}")
    return PlantState(v=v_new, t=t0 + dt)
