import math

import numpy as np
import pytest

from skidctl.errors import ContractError, InvalidPathError
from skidctl.modelio import parse_scenario_config
from skidctl.network import Batch, forward_batch, init_network, norm_apply, norm_fit, norm_reverse
from skidctl.plant import PlantParams, saturate
from skidctl.presets import scenario_preset
from skidctl.scenario import (
    CirclePath,
    ConstantSpeedPath,
    SCurvePath,
    SweepConfig,
    Trace,
    collect_open_loop,
    metrics,
    reference,
    run_scenario,
)
from skidctl.train import LMConfig, split_data, train

DESK = PlantParams(k_v=2.5e-4, tau=0.01, n_max=1500.0)


class TestReference:
    def test_straight_path_sides_equal(self):
        path = ConstantSpeedPath(speed=0.2)
        v_l, v_r = reference(path, 1.2, 7.5, 2.0)
        assert v_l == v_r

    def test_circle_differential_after_ramp(self):
        # omega = V/R; v_r - v_l = omega * track_width, scaled by the ramp
        path = CirclePath(radius=6.0, speed=0.15)
        t = 40.0
        v_l, v_r = reference(path, 1.2, t, 2.0)
        ramp = 1.0 - math.exp(-t / 2.0)
        assert v_r - v_l == pytest.approx((0.15 / 6.0) * 1.2 * ramp, rel=1e-12)
        assert v_r - v_l == pytest.approx(0.03 * ramp, rel=1e-12)

    def test_zero_time_gives_zero_references(self):
        for path in (ConstantSpeedPath(0.3), CirclePath(6.0, 0.15),
                     SCurvePath(segment_length=5.0, speed=0.2, yaw_rate=0.05)):
            v_l, v_r = reference(path, 1.2, 0.0, 2.0)
            assert v_l == 0.0 and v_r == 0.0

    def test_s_curve_alternates_turn_direction(self):
        path = SCurvePath(segment_length=2.0, speed=0.2, yaw_rate=0.05)
        seg = path.segment_length / path.speed
        v_l1, v_r1 = reference(path, 1.0, 0.5 * seg, 0.1)
        v_l2, v_r2 = reference(path, 1.0, 1.5 * seg, 0.1)
        assert v_r1 > v_l1  # first segment turns one way
        assert v_r2 < v_l2  # second the other

    def test_infeasible_radius_rejected(self):
        with pytest.raises(InvalidPathError):
            reference(CirclePath(radius=0.5, speed=0.1), 1.2, 1.0, 2.0)

    def test_reference_rate_is_bounded(self):
        path = CirclePath(radius=6.0, speed=0.15)
        t = np.linspace(0.0, 30.0, 30001)
        v_l, _ = reference(path, 1.2, t, 2.0)
        rate = np.abs(np.diff(v_l)) / 1e-3
        assert rate.max() <= 0.15 / 2.0 + 1e-9  # sup |v_ref'| = V/ramp_time


class TestCollect:
    def test_long_dwell_reaches_steady_state(self):
        sweep = SweepConfig(n_steps=5, dwell=0.12, n_max=800.0)  # dwell = 12 tau
        batch = collect_open_loop(DESK, sweep)
        per = int(round(sweep.dwell / 1e-3))
        ends = np.arange(per - 1, len(batch), per)
        resid = np.abs(batch.inputs[ends] - DESK.k_v * batch.targets[ends])
        assert resid.max() < 1e-4

    def test_sample_count(self):
        sweep = SweepConfig(n_steps=7, dwell=0.05, n_max=500.0)
        batch = collect_open_loop(DESK, sweep, dt=1e-3)
        assert len(batch) == 7 * int(0.05 * 1000)

    def test_trained_inverse_reproduces_commands(self):
        # end-to-end: sweep -> split/normalize -> train -> steady-state probe
        sweep = SweepConfig(n_steps=40, dwell=0.1, n_max=1500.0)
        batch = collect_open_loop(DESK, sweep)
        split = split_data(len(batch), seed=5)
        tr = Batch(batch.inputs[split.train_idx], batch.targets[split.train_idx])
        va = Batch(batch.inputs[split.val_idx], batch.targets[split.val_idx])
        te = Batch(batch.inputs[split.test_idx], batch.targets[split.test_idx])
        in_n, out_n = norm_fit(tr.inputs), norm_fit(tr.targets)

        def scaled(b):
            return Batch(norm_apply(in_n, b.inputs), norm_apply(out_n, b.targets))

        net = init_network([1, 16, 10, 1], seed=5)
        net, hist = train(net, scaled(tr), scaled(va), scaled(te),
                          LMConfig(goal=1e-4, max_epochs=120, seed=5, max_val_failures=10))
        levels = np.linspace(-1500.0, 1500.0, 40)[2:-2]  # held-out probe inside the sweep
        pred = norm_reverse(out_n, forward_batch(net, norm_apply(in_n, DESK.k_v * levels)))
        assert np.abs(pred - levels).max() < 0.02 * DESK.n_max


def small_scenario(mode="rac", duration=2.0, disturbance=None):
    doc = scenario_preset("exp2")
    doc["mode"] = mode
    doc["duration_s"] = duration
    if disturbance is None:
        doc.pop("disturbance_left")
        doc.pop("disturbance_right")
    else:
        doc["disturbance_left"] = disturbance
        doc["disturbance_right"] = dict(disturbance)
    return parse_scenario_config(doc)


class TestRunScenario:
    def test_requires_models_for_learned_modes(self):
        cfg = small_scenario(mode="dnn")
        with pytest.raises(ContractError):
            run_scenario(cfg)

    def test_trace_identities_hold_exactly(self):
        cfg = small_scenario()
        trace, _, status = run_scenario(cfg)
        assert status == "completed"
        for side in ("left", "right"):
            s = trace.sides[side]
            assert (s["e"] == s["v"] - s["v_ref"]).all()
            rac_rows = (s["alpha2"] == 1.0) & ~np.isnan(s["u_c"])
            assert (s["u_c"][rac_rows] == s["u_s"][rac_rows]).all()

    def test_timestamps_form_exact_arithmetic_sequence(self):
        cfg = small_scenario(duration=1.5)
        trace, _, _ = run_scenario(cfg)
        assert (trace.t == np.arange(len(trace)) * cfg.dt).all()

    def test_rerun_is_bit_identical(self):
        cfg = small_scenario(duration=1.0)
        t1, _, _ = run_scenario(cfg)
        t2, _, _ = run_scenario(cfg)
        for side in ("left", "right"):
            for name in Trace.side_fields():
                a, b = t1.sides[side][name], t2.sides[side][name]
                assert np.array_equal(a, b, equal_nan=True)

    def test_error_dynamics_consistency(self):
        # forward difference of e matches A*n_eff + (F - v)/tau - v_ref'
        # within first-order finite-difference truncation
        cfg = small_scenario(duration=8.0)
        trace, _, _ = run_scenario(cfg)
        s = trace.sides["left"]
        dt = cfg.dt
        a, tau = cfg.plant_left.a, cfg.plant_left.tau
        de = (s["e"][1:] - s["e"][:-1]) / dt
        dvref = (s["v_ref"][1:] - s["v_ref"][:-1]) / dt
        n_eff = np.array([saturate(float(u), cfg.plant_left.n_max) for u in s["u_c"][:-1]])
        rhs = a * n_eff + (0.0 - s["v"][:-1]) / tau - dvref
        resid = np.abs(de - rhs)
        assert resid.max() < 5e-3
        assert np.median(resid) < 1e-3

    def test_velocity_bounded_by_gain_times_saturation(self):
        cfg = small_scenario(duration=2.0)
        trace, _, _ = run_scenario(cfg)
        for side in ("left", "right"):
            v = trace.sides[side]["v"]
            assert np.abs(v).max() <= cfg.plant_left.k_v * cfg.plant_left.n_max + 1e-12

    def test_robust_loop_holds_envelope_under_additive_disturbance(self):
        # below-threshold additive channel: error stays strictly inside the
        # wide envelope and the barrier metric stays finite the whole run
        cfg = small_scenario(
            duration=12.0,
            disturbance={"kind": "additive_step", "t_start_s": 5.0, "magnitude": 0.005},
        )
        trace, _, status = run_scenario(cfg)
        assert status == "completed"
        for side in ("left", "right"):
            s = trace.sides[side]
            assert (np.abs(s["e"]) < s["o"]).all()
            assert np.isfinite(s["blf"]).all()

    def test_robust_loop_holds_envelope_under_sinusoid(self):
        cfg = small_scenario(
            duration=6.0,
            disturbance={"kind": "sinusoid", "t_start_s": 2.0, "magnitude": 0.004,
                         "frequency_hz": 0.8},
        )
        trace, _, status = run_scenario(cfg)
        assert status == "completed"
        for side in ("left", "right"):
            s = trace.sides[side]
            assert (np.abs(s["e"]) < s["o"]).all()


def synthetic_trace(v, v_ref, dt=1e-3, alpha2_from=None, halted=False):
    n = v.size
    alpha2 = np.zeros(n)
    if alpha2_from is not None:
        alpha2[alpha2_from:] = 1.0
    zeros = np.zeros(n)
    side = {
        "v_ref": v_ref, "v": v, "e": v - v_ref,
        "u_dnn": zeros, "u_s": zeros, "u_c": zeros,
        "alpha1": 1.0 - alpha2, "alpha2": alpha2,
        "theta_hat": zeros, "zeta": np.full(n, 0.04), "o": np.full(n, 0.1),
        "blf": zeros, "r_low": zeros, "denom_high": zeros,
    }
    status = ["dnn"] * n
    if halted:
        status[-1] = "halted"
    return Trace(t=np.arange(n) * dt, status=status,
                 sides={"left": dict(side), "right": {k: v.copy() for k, v in side.items()}})


class TestMetrics:
    def test_perfect_tracking(self):
        v_ref = np.full(2000, 0.15)
        trace = synthetic_trace(v_ref.copy(), v_ref)
        summary = metrics(trace)
        assert summary.left.overshoot == 0.0
        assert summary.left.settling_time == 0.0
        assert summary.left.max_abs_error["dnn"] == 0.0
        assert summary.status == "completed"

    def test_first_order_response_closed_form(self):
        # v(t) = V (1 - e^(-t/tau)): no overshoot, settling at tau*ln(50)
        tau, v_final, dt = 0.5, 0.2, 1e-3
        t = np.arange(8000) * dt
        v = v_final * (1.0 - np.exp(-t / tau))
        trace = synthetic_trace(v, np.full_like(v, v_final), dt=dt)
        summary = metrics(trace)
        assert summary.left.overshoot == 0.0
        assert summary.left.settling_time == pytest.approx(tau * math.log(50.0), abs=2 * dt)

    def test_phase_split_at_switch(self):
        v_ref = np.full(1000, 0.1)
        v = v_ref + 0.01
        trace = synthetic_trace(v.copy(), v_ref, alpha2_from=600)
        summary = metrics(trace)
        assert summary.left.switch_time == pytest.approx(0.6, abs=1e-9)
        assert set(summary.left.max_abs_error) == {"dnn", "rac"}

    def test_shutdown_reported(self):
        v_ref = np.full(100, 0.1)
        trace = synthetic_trace(v_ref + 0.2, v_ref, alpha2_from=0, halted=True)
        summary = metrics(trace)
        assert summary.status == "shutdown"
        assert summary.shutdown_time == pytest.approx(0.099)

    def test_empty_trace_rejected(self):
        trace = synthetic_trace(np.zeros(1), np.zeros(1))
        trace.t = trace.t[:0]
        with pytest.raises(ContractError):
            metrics(trace)

    def test_summary_dict_omits_undefined_fields(self):
        v_ref = np.zeros(50)  # zero final reference: settling undefined
        trace = synthetic_trace(v_ref.copy(), v_ref)
        doc = metrics(trace).to_dict()
        assert "settling_time_s" not in doc["left"]
        assert "switch_time_s" not in doc["left"]
        assert "shutdown_time_s" not in doc
