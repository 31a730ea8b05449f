"""Closed-loop orchestration: references, data collection, runs, metrics.

The harness steps both sides of the vehicle in lockstep at a fixed rate.
Left/right asymmetry enters only through the differential-drive reference
and the per-side disturbance profiles.  The learned controller is
deployed open loop on the reference velocity, never on the measured one,
which is exactly why disturbances defeat it and the supervisor earns its
keep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ContractError, InvalidParameterError, InvalidPathError
from .network import Batch, Network, NormParams, forward_batch, norm_apply, norm_reverse
from .plant import DisturbanceProfile, PlantParams, PlantState, step
from .rac import AdaptiveState, PpcParams, blf_value, ppc_bound
from .supervisor import (
    POLICY_DNN,
    POLICY_HALTED,
    POLICY_RAC,
    SupervisorState,
    supervise_dnn_only,
    supervise_rac_only,
    supervise_step,
)

MODES = ("dnn", "rac", "hybrid")
SIDES = ("left", "right")

STATUS_COMPLETED = "completed"
STATUS_SHUTDOWN = "shutdown"


@dataclass(frozen=True)
class ConstantSpeedPath:
    speed: float
    kind: str = "constant_speed"


@dataclass(frozen=True)
class CirclePath:
    radius: float
    speed: float
    kind: str = "circle"

    def __post_init__(self):
        if not self.radius > 0.0:
            raise InvalidPathError(f"radius must be positive, got {self.radius!r}")


@dataclass(frozen=True)
class SCurvePath:
    """Alternating-turn path: yaw rate flips sign every segment."""

    segment_length: float
    speed: float
    yaw_rate: float
    kind: str = "s_curve"

    def __post_init__(self):
        if not self.segment_length > 0.0 or not self.speed > 0.0:
            raise InvalidPathError("segment_length and speed must be positive")


Path = Union[ConstantSpeedPath, CirclePath, SCurvePath]


def reference(path: Path, track_width: float, t, ramp_time: float):
    """Per-side reference velocities (m/s) at time(s) t.

    Differential-drive mapping v_{L,R} = V -/+ omega * track_width / 2,
    ramped in by (1 - exp(-t / ramp_time)) so the initial tracking error
    is zero and the low-layer initial-condition requirement holds.
    """
    if not track_width > 0.0:
        raise InvalidPathError(f"track_width must be positive, got {track_width!r}")
    if not ramp_time > 0.0:
        raise InvalidPathError(f"ramp_time must be positive, got {ramp_time!r}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0):
        raise ContractError("t must be >= 0")
    speed = path.speed
    if isinstance(path, ConstantSpeedPath):
        omega = np.zeros_like(t)
    elif isinstance(path, CirclePath):
        if path.radius <= track_width / 2.0:
            raise InvalidPathError(
                f"radius {path.radius!r} must exceed half the track width {track_width / 2.0!r}"
            )
        omega = np.full_like(t, speed / path.radius)
    elif isinstance(path, SCurvePath):
        seg_duration = path.segment_length / path.speed
        segment = np.floor(t / seg_duration).astype(np.int64)
        omega = np.where(segment % 2 == 0, path.yaw_rate, -path.yaw_rate)
    else:
        raise InvalidPathError(f"unknown path type {type(path).__name__}")
    ramp = 1.0 - np.exp(-t / ramp_time)
    half = 0.5 * track_width
    v_l = (speed - omega * half) * ramp
    v_r = (speed + omega * half) * ramp
    return v_l, v_r


@dataclass(frozen=True)
class SweepConfig:
    """Open-loop staircase: n_steps levels from -n_max to +n_max."""

    n_steps: int
    dwell: float
    n_max: float

    def __post_init__(self):
        if self.n_steps < 2:
            raise InvalidParameterError("sweep needs at least 2 levels")
        if not self.dwell > 0.0 or not self.n_max > 0.0:
            raise InvalidParameterError("dwell and n_max must be positive")


def collect_open_loop(
    params: PlantParams,
    sweep: SweepConfig,
    dt: float = 1e-3,
    profile: Optional[DisturbanceProfile] = None,
) -> Batch:
    """Drive the plant through the staircase and log (v, n) at the sim rate.

    Returns the raw inverse-map dataset: inputs are the measured
    velocities, targets the commands that produced them.
    """
    if profile is None:
        profile = DisturbanceProfile.none()
    levels = np.linspace(-sweep.n_max, sweep.n_max, sweep.n_steps)
    steps_per_dwell = int(round(sweep.dwell / dt))
    if steps_per_dwell < 1:
        raise InvalidParameterError("dwell shorter than one simulator step")
    state = PlantState()
    velocities = np.empty(sweep.n_steps * steps_per_dwell)
    commands = np.empty_like(velocities)
    i = 0
    for level in levels:
        for _ in range(steps_per_dwell):
            state = step(state, params, float(level), profile, dt)
            velocities[i] = state.v
            commands[i] = level
            i += 1
    return Batch(inputs=velocities, targets=commands)


@dataclass(frozen=True)
class DnnController:
    """Trained inverse model plus the scaling record it was fitted with."""

    net: Network
    in_norm: NormParams
    out_norm: NormParams

    def command(self, v_ref: float) -> float:
        return float(self.command_batch(np.array([v_ref]))[0])

    def command_batch(self, v_ref: np.ndarray) -> np.ndarray:
        scaled = norm_apply(self.in_norm, v_ref)
        return norm_reverse(self.out_norm, forward_batch(self.net, scaled))


@dataclass(frozen=True)
class RacGains:
    delta: float = 1.0
    gamma: float = 1.0
    k: float = 60000.0
    theta_hat0: float = 0.01

    def initial_state(self) -> AdaptiveState:
        return AdaptiveState.initial(
            delta=self.delta, gamma=self.gamma, k=self.k, theta_hat0=self.theta_hat0
        )


@dataclass(frozen=True)
class ScenarioConfig:
    path: Path
    track_width: float
    duration: float
    dt: float
    mode: str
    plant_left: PlantParams
    plant_right: PlantParams
    dist_left: DisturbanceProfile
    dist_right: DisturbanceProfile
    zeta_params: PpcParams
    o_params: PpcParams
    rac_gains: RacGains
    ramp_time: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.duration > 0.0 or not self.dt > 0.0:
            raise InvalidParameterError("duration and dt must be positive")
        # envelope ordering is validated here too so bad configs fail at load
        SupervisorState.for_mode(self.mode, self.zeta_params, self.o_params)


_SIDE_FIELDS = (
    "v_ref", "v", "e", "u_dnn", "u_s", "u_c", "alpha1", "alpha2",
    "theta_hat", "zeta", "o", "blf", "r_low", "denom_high",
)


@dataclass
class Trace:
    """Columnar per-step log; one entry of `sides` per vehicle side."""

    t: np.ndarray
    status: list[str]
    sides: dict[str, dict[str, np.ndarray]]

    def __len__(self) -> int:
        return int(self.t.size)

    def row(self, i: int) -> dict:
        rec = {"t": float(self.t[i]), "status": self.status[i]}
        for side in SIDES:
            rec[side] = {name: float(arr[i]) for name, arr in self.sides[side].items()}
        return rec

    @staticmethod
    def side_fields() -> tuple[str, ...]:
        return _SIDE_FIELDS


@dataclass
class SideSummary:
    switch_time: Optional[float] = None
    overshoot: Optional[float] = None
    settling_time: Optional[float] = None
    max_abs_error: dict = field(default_factory=dict)
    tracking_mse: dict = field(default_factory=dict)


@dataclass
class RunSummary:
    """Metrics extracted from one trace; undefined fields stay absent."""

    status: str
    duration: float
    shutdown_time: Optional[float] = None
    left: SideSummary = field(default_factory=SideSummary)
    right: SideSummary = field(default_factory=SideSummary)

    def to_dict(self) -> dict:
        def side_dict(s: SideSummary) -> dict:
            out = {}
            if s.switch_time is not None:
                out["switch_time_s"] = s.switch_time
            if s.overshoot is not None:
                out["overshoot_mps"] = s.overshoot
            if s.settling_time is not None:
                out["settling_time_s"] = s.settling_time
            out["max_abs_error_mps"] = dict(s.max_abs_error)
            out["tracking_mse"] = dict(s.tracking_mse)
            return out

        doc = {"status": self.status, "duration_s": self.duration}
        if self.shutdown_time is not None:
            doc["shutdown_time_s"] = self.shutdown_time
        doc["left"] = side_dict(self.left)
        doc["right"] = side_dict(self.right)
        return doc


class _SideLoop:
    """Mutable per-side bookkeeping inside the scenario loop."""

    def __init__(self, cfg: ScenarioConfig, plant: PlantParams, profile: DisturbanceProfile,
                 controller: Optional[DnnController]):
        self.plant = plant
        self.profile = profile
        self.controller = controller
        self.state = PlantState()
        self.sup = SupervisorState.for_mode(cfg.mode, cfg.zeta_params, cfg.o_params)
        self.rac = cfg.rac_gains.initial_state()
        self.columns = {name: [] for name in _SIDE_FIELDS}


def run_scenario(
    cfg: ScenarioConfig,
    controller_left: Optional[DnnController] = None,
    controller_right: Optional[DnnController] = None,
) -> tuple[Trace, RunSummary, str]:
    """Run one closed-loop scenario to completion or shutdown.

    dnn and hybrid modes require a trained controller per side.  A
    high-layer shutdown on either side halts both sides: the trace is
    truncated at the shutdown step and the status reports it.
    """
    if cfg.mode in ("dnn", "hybrid") and (controller_left is None or controller_right is None):
        raise ContractError(f"mode {cfg.mode!r} requires a trained controller per side")
    n_steps = int(round(cfg.duration / cfg.dt))
    if n_steps < 1:
        raise ContractError("duration shorter than one control step")
    t_grid = np.arange(n_steps) * cfg.dt
    ref_l, ref_r = reference(cfg.path, cfg.track_width, t_grid, cfg.ramp_time)

    sides = {
        "left": _SideLoop(cfg, cfg.plant_left, cfg.dist_left, controller_left),
        "right": _SideLoop(cfg, cfg.plant_right, cfg.dist_right, controller_right),
    }
    refs = {"left": ref_l, "right": ref_r}
    # open-loop policy: commands depend on the reference alone, so the whole
    # command trajectory is precomputed in one batched pass (bit-identical
    # to per-step evaluation thanks to the column-stable forward)
    u_dnn_grid = {}
    for name, loop in sides.items():
        if loop.controller is not None and cfg.mode in ("dnn", "hybrid"):
            u_dnn_grid[name] = loop.controller.command_batch(refs[name])

    status_rows: list[str] = []
    halted = False
    rows = 0
    for k in range(n_steps):
        t = float(t_grid[k])
        decisions = {}
        for name, loop in sides.items():
            e = loop.state.v - float(refs[name][k])
            if cfg.mode == "hybrid":
                u_dnn = float(u_dnn_grid[name][k])
                loop.sup, decision, loop.rac = supervise_step(
                    loop.sup, e, t, u_dnn, loop.rac, cfg.dt
                )
            elif cfg.mode == "dnn":
                u_dnn = float(u_dnn_grid[name][k])
                loop.sup, decision = supervise_dnn_only(loop.sup, e, t, u_dnn)
            else:
                u_dnn = math.nan
                loop.sup, decision, loop.rac = supervise_rac_only(
                    loop.sup, e, t, loop.rac, cfg.dt
                )
            decisions[name] = (decision, e, u_dnn)

        vehicle_halt = any(d.active_policy == POLICY_HALTED for d, _, _ in decisions.values())
        for name, loop in sides.items():
            decision, e, u_dnn = decisions[name]
            zeta = ppc_bound(t, loop.sup.zeta_params)
            o = ppc_bound(t, loop.sup.o_params)
            alpha1, alpha2 = loop.sup.alpha1, loop.sup.alpha2
            u_s = decision.command if decision.active_policy == POLICY_RAC else math.nan
            u_c = math.nan if vehicle_halt else float(decision.command)
            theta = loop.rac.theta_hat if alpha2 == 1 else math.nan
            col = loop.columns
            col["v_ref"].append(float(refs[name][k]))
            col["v"].append(loop.state.v)
            col["e"].append(e)
            col["u_dnn"].append(u_dnn)
            col["u_s"].append(u_s)
            col["u_c"].append(u_c)
            col["alpha1"].append(float(alpha1))
            col["alpha2"].append(float(alpha2))
            col["theta_hat"].append(theta)
            col["zeta"].append(zeta)
            col["o"].append(o)
            col["blf"].append(blf_value(e, o))
            col["r_low"].append(zeta * zeta - e * e)
            col["denom_high"].append(o * o - e * e)
        rows += 1
        if vehicle_halt:
            status_rows.append(POLICY_HALTED)
            halted = True
            break
        any_rac = any(d.active_policy == POLICY_RAC for d, _, _ in decisions.values())
        status_rows.append(POLICY_RAC if any_rac else POLICY_DNN)
        for name, loop in sides.items():
            decision, _, _ = decisions[name]
            loop.state = step(loop.state, loop.plant, float(decision.command), loop.profile, cfg.dt)

    trace = Trace(
        t=t_grid[:rows].copy(),
        status=status_rows,
        sides={
            name: {fname: np.asarray(vals) for fname, vals in loop.columns.items()}
            for name, loop in sides.items()
        },
    )
    status = STATUS_SHUTDOWN if halted else STATUS_COMPLETED
    return trace, metrics(trace), status


def _side_metrics(t: np.ndarray, cols: dict[str, np.ndarray], halted: bool) -> SideSummary:
    summary = SideSummary()
    alpha2 = cols["alpha2"]
    flips = np.flatnonzero((alpha2[1:] == 1.0) & (alpha2[:-1] == 0.0))
    switch_idx = int(flips[0]) + 1 if flips.size else None
    if switch_idx is not None:
        summary.switch_time = float(t[switch_idx])

    # phase windows: learned-policy rows and robust-policy rows
    n = t.size
    phases = {}
    if alpha2[0] == 1.0:
        phases["rac"] = (0, n)
    elif switch_idx is None:
        phases["dnn"] = (0, n)
    else:
        phases["dnn"] = (0, switch_idx)
        phases["rac"] = (switch_idx, n)
    e = cols["e"]
    for phase, (lo, hi) in phases.items():
        if hi > lo:
            seg = np.ascontiguousarray(e[lo:hi])
            summary.max_abs_error[phase] = float(np.abs(seg).max())
            summary.tracking_mse[phase] = float(seg @ seg / seg.size)

    # transient metrics over the first phase window
    lo, hi = next(iter(phases.values()))
    if halted and hi >= n:
        hi = n - 1 if n > 1 else n  # the halting row carries no command
    if hi > lo:
        v = cols["v"][lo:hi]
        v_fin = float(cols["v_ref"][hi - 1])
        summary.overshoot = float(max(0.0, (v - v_fin).max()))
        if v_fin != 0.0:
            band = 0.02 * abs(v_fin)
            outside = np.abs(v - v_fin) > band
            last_outside = int(np.flatnonzero(outside)[-1]) if outside.any() else -1
            if last_outside + 1 < v.size:
                summary.settling_time = float(t[lo + last_outside + 1])
    return summary


def metrics(trace: Trace) -> RunSummary:
    """Extract the run summary from a trace (pure function of the trace)."""
    if len(trace) < 1:
        raise ContractError("trace is empty")
    halted = trace.status[-1] == POLICY_HALTED
    summary = RunSummary(
        status=STATUS_SHUTDOWN if halted else STATUS_COMPLETED,
        duration=float(trace.t[-1]),
        shutdown_time=float(trace.t[-1]) if halted else None,
        left=_side_metrics(trace.t, trace.sides["left"], halted),
        right=_side_metrics(trace.t, trace.sides["right"], halted),
    )
    return summary
