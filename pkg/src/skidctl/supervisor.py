"""Two-layer safety supervision with latched policy switching.

The low layer watches the tracking error against the tight envelope
zeta(t) while the learned controller drives.  The first violation latches
a permanent hand-over to the robust adaptive controller; the latch never
releases.  The high layer watches the error against the wide envelope
o(t) whichever policy is active and, on violation, orders a permanent
shutdown.  Envelope ordering (zeta strictly inside o) is enforced at
construction so the latch always fires before the shutdown layer can.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .errors import ContractError, InvalidParameterError
from .rac import AdaptiveState, PpcParams, adaptive_update, ppc_bound, rac_command

POLICY_DNN = "dnn"
POLICY_RAC = "rac"
POLICY_HALTED = "halted"


@dataclass(frozen=True)
class SupervisorState:
    """Latched gating flags and the two envelope parameter sets.

    alpha1/alpha2 are complementary {0,1} gates: alpha1 starts at 1 and can
    only fall, alpha2 starts at 0 and can only rise, and they always sum
    to 1.  switched_at / shutdown_at record the first (and only) firing
    times of the two layers.
    """

    zeta_params: PpcParams
    o_params: PpcParams
    alpha1: int = 1
    alpha2: int = 0
    switched_at: Optional[float] = None
    shutdown_at: Optional[float] = None

    def __post_init__(self):
        if self.alpha1 + self.alpha2 != 1 or self.alpha1 not in (0, 1):
            raise InvalidParameterError("alpha gates must be complementary {0,1} values")
        if not (self.zeta_params.shoot < self.o_params.shoot):
            raise InvalidParameterError(
                "low-layer shoot must lie strictly inside the high-layer shoot"
            )
        if not (self.zeta_params.bound < self.o_params.bound):
            raise InvalidParameterError(
                "low-layer bound must lie strictly inside the high-layer bound"
            )

    @property
    def halted(self) -> bool:
        return self.shutdown_at is not None

    @classmethod
    def for_mode(cls, mode: str, zeta_params: PpcParams, o_params: PpcParams) -> "SupervisorState":
        """Initial state per operating mode (rac mode starts latched over)."""
        if mode in ("hybrid", "dnn"):
            return cls(zeta_params=zeta_params, o_params=o_params)
        if mode == "rac":
            return cls(zeta_params=zeta_params, o_params=o_params, alpha1=0, alpha2=1, switched_at=0.0)
        raise InvalidParameterError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class SupervisorDecision:
    """Outcome of one supervision step.

    command is present iff the vehicle is not halted; margins carry the
    low-layer slack zeta^2 - e^2 and the high-layer denominator o^2 - e^2
    for tracing.
    """

    command: Optional[float]
    active_policy: str
    zeta: Optional[float] = None
    o: Optional[float] = None
    r_low: Optional[float] = None
    denom_high: Optional[float] = None


def latch_update(st: SupervisorState, e: float, t: float) -> SupervisorState:
    """Fire the one-way switch when the low layer is violated (R <= 0).

    A tie e^2 == zeta^2 fires the switch.  Once alpha1 has fallen it never
    returns to 1, regardless of future errors.
    """
    if st.halted:
        raise ContractError("supervisor is halted; no further updates are defined")
    if st.alpha1 == 1:
        zeta = ppc_bound(t, st.zeta_params)
        if zeta * zeta - e * e <= 0.0:
            return replace(st, alpha1=0, alpha2=1, switched_at=t)
    return st


def supervise_step(
    st: SupervisorState,
    e: float,
    t: float,
    u_dnn: float,
    rac: AdaptiveState,
    dt: float,
) -> tuple[SupervisorState, SupervisorDecision, AdaptiveState]:
    """Hybrid supervision: gate the learned policy, fall back, or halt.

    While the low layer holds, the learned command passes through.  On the
    first violation the latch fires and the robust controller produces its
    command in the same control step, so no step goes uncommanded.  Once
    latched, a non-positive high-layer denominator halts the vehicle;
    otherwise the adaptive gain is advanced and the robust command issued.
    """
    if st.halted:
        raise ContractError("supervisor is halted; no further steps are defined")
    zeta = r_low = None
    if st.alpha1 == 1:
        zeta = ppc_bound(t, st.zeta_params)
        r_low = zeta * zeta - e * e
        if r_low > 0.0:
            decision = SupervisorDecision(
                command=u_dnn, active_policy=POLICY_DNN, zeta=zeta, r_low=r_low,
                o=ppc_bound(t, st.o_params),
            )
            return st, decision, rac
        st = replace(st, alpha1=0, alpha2=1, switched_at=t)

    o = ppc_bound(t, st.o_params)
    denom = o * o - e * e
    if denom <= 0.0:
        st = replace(st, shutdown_at=t)
        decision = SupervisorDecision(
            command=None, active_policy=POLICY_HALTED, zeta=zeta, o=o,
            r_low=r_low, denom_high=denom,
        )
        return st, decision, rac
    rac = adaptive_update(rac, e, o, dt)
    u_s = rac_command(e, o, rac)
    decision = SupervisorDecision(
        command=u_s, active_policy=POLICY_RAC, zeta=zeta, o=o,
        r_low=r_low, denom_high=denom,
    )
    return st, decision, rac


def supervise_dnn_only(
    st: SupervisorState, e: float, t: float, u_dnn: float
) -> tuple[SupervisorState, SupervisorDecision]:
    """Single-layer supervision of the learned policy: violation halts.

    Standalone mode has no fallback; the zeta envelope acts with full
    shutdown authority.
    """
    if st.halted:
        raise ContractError("supervisor is halted; no further steps are defined")
    zeta = ppc_bound(t, st.zeta_params)
    r_low = zeta * zeta - e * e
    if r_low <= 0.0:
        st = replace(st, shutdown_at=t)
        return st, SupervisorDecision(
            command=None, active_policy=POLICY_HALTED, zeta=zeta, r_low=r_low
        )
    return st, SupervisorDecision(
        command=u_dnn, active_policy=POLICY_DNN, zeta=zeta, r_low=r_low
    )


def supervise_rac_only(
    st: SupervisorState,
    e: float,
    t: float,
    rac: AdaptiveState,
    dt: float,
) -> tuple[SupervisorState, SupervisorDecision, AdaptiveState]:
    """Single high-layer supervision of the robust controller."""
    if st.halted:
        raise ContractError("supervisor is halted; no further steps are defined")
    o = ppc_bound(t, st.o_params)
    denom = o * o - e * e
    if denom <= 0.0:
        st = replace(st, shutdown_at=t)
        return st, SupervisorDecision(
            command=None, active_policy=POLICY_HALTED, o=o, denom_high=denom
        ), rac
    rac = adaptive_update(rac, e, o, dt)
    u_s = rac_command(e, o, rac)
    return st, SupervisorDecision(
        command=u_s, active_policy=POLICY_RAC, o=o, denom_high=denom
    ), rac
