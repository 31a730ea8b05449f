"""File formats and configuration parsing.

All numeric values are serialized through Python's shortest round-trip
float representation, so saving and reloading reproduces the exact same
bits and reruns with the same seed produce byte-identical files.  Config
files are JSON with units spelled out in the field names; unknown fields
are errors, not warnings.
"""

from __future__ import annotations

import json
import os
from typing import Optional

import numpy as np

from .errors import ConfigError
from .network import Batch, Network, NormParams, param_count
from .plant import ActuationChain, DisturbanceProfile, PlantParams, derive_gain
from .rac import PpcParams
from .scenario import (
    CirclePath,
    ConstantSpeedPath,
    DnnController,
    MODES,
    Path,
    RacGains,
    SCurvePath,
    ScenarioConfig,
    SweepConfig,
    Trace,
)
from .train import LMConfig

MODEL_SCHEMA_VERSION = 1
DATASET_SCHEMA_VERSION = 1
TRACE_SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    """Shortest decimal representation that parses back to the same float."""
    return repr(float(x))


# ---------------------------------------------------------------------------
# model files

def save_model(path: str, controller: DnnController) -> None:
    net = controller.net
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "hidden_activation": net.hidden_activation,
        "output_activation": net.output_activation,
        "weights": [
            {"w": [[float(v) for v in row] for row in w], "b": [float(v) for v in b]}
            for w, b in zip(net.weights, net.biases)
        ],
        "input_norm": {"lo": float(controller.in_norm.lo), "hi": float(controller.in_norm.hi)},
        "output_norm": {"lo": float(controller.out_norm.lo), "hi": float(controller.out_norm.hi)},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path: str) -> DnnController:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ConfigError(f"unsupported model schema {doc.get('schema_version')!r}")
    sizes = [int(s) for s in doc["layer_sizes"]]
    weights = [np.array(layer["w"], dtype=np.float64) for layer in doc["weights"]]
    biases = [np.array(layer["b"], dtype=np.float64) for layer in doc["weights"]]
    net = Network(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        hidden_activation=doc["hidden_activation"],
        output_activation=doc["output_activation"],
    )
    flat = sum(w.size + b.size for w, b in zip(net.weights, net.biases))
    if flat != param_count(sizes):
        raise ConfigError("model parameter count does not match its declared sizes")
    return DnnController(
        net=net,
        in_norm=NormParams(lo=doc["input_norm"]["lo"], hi=doc["input_norm"]["hi"]),
        out_norm=NormParams(lo=doc["output_norm"]["lo"], hi=doc["output_norm"]["hi"]),
    )


# ---------------------------------------------------------------------------
# dataset files

def write_dataset(path: str, batch: Batch, header: dict) -> None:
    """CSV with a single JSON header line and v/n sample rows."""
    lines = ["# " + json.dumps({"schema_version": DATASET_SCHEMA_VERSION, **header})]
    lines.append("v_mps,n_rpm")
    for v, n in zip(batch.inputs, batch.targets):
        lines.append(f"{_fmt(v)},{_fmt(n)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset(path: str) -> tuple[Batch, dict]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3 or not lines[0].startswith("# "):
        raise ConfigError(f"{path}: not a dataset file")
    header = json.loads(lines[0][2:])
    if header.get("schema_version") != DATASET_SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported dataset schema")
    if lines[1] != "v_mps,n_rpm":
        raise ConfigError(f"{path}: unexpected column header {lines[1]!r}")
    rows = [line.split(",") for line in lines[2:] if line]
    try:
        v = np.array([float(r[0]) for r in rows])
        n = np.array([float(r[1]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed sample row") from exc
    return Batch(inputs=v, targets=n), header


# ---------------------------------------------------------------------------
# trace files

def trace_columns() -> list[str]:
    cols = ["t"]
    for side in ("l", "r"):
        cols.extend(f"{name}_{side}" for name in Trace.side_fields())
    cols.append("status")
    return cols


def write_trace_csv(path: str, trace: Trace) -> None:
    cols = trace_columns()
    lines = ["# " + json.dumps({"schema_version": TRACE_SCHEMA_VERSION}), ",".join(cols)]
    side_keys = {"l": "left", "r": "right"}
    arrays = [trace.t]
    for side in ("l", "r"):
        for name in Trace.side_fields():
            arrays.append(trace.sides[side_keys[side]][name])
    for i in range(len(trace)):
        parts = [_fmt(arr[i]) for arr in arrays]
        parts.append(trace.status[i])
        lines.append(",".join(parts))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path: str) -> Trace:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise ConfigError(f"{path}: not a trace file")
    header = json.loads(lines[0][2:])
    if header.get("schema_version") != TRACE_SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported trace schema")
    cols = trace_columns()
    if lines[1].split(",") != cols:
        raise ConfigError(f"{path}: unexpected trace columns")
    data_rows = [line.split(",") for line in lines[2:] if line]
    if not data_rows:
        raise ConfigError(f"{path}: trace has no rows")
    if any(len(r) != len(cols) for r in data_rows):
        raise ConfigError(f"{path}: ragged trace row")
    try:
        numeric = np.array([[float(v) for v in row[:-1]] for row in data_rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed trace row") from exc
    status = [row[-1] for row in data_rows]
    sides = {}
    idx = 1
    for side in ("left", "right"):
        sides[side] = {}
        for name in Trace.side_fields():
            # contiguous copies: reductions on strided views can round
            # differently, which would break bit-stable summaries
            sides[side][name] = np.ascontiguousarray(numeric[:, idx])
            idx += 1
    return Trace(t=np.ascontiguousarray(numeric[:, 0]), status=status, sides=sides)


def write_summary(path: str, summary_doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary_doc, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# config parsing

def _take(cfg: dict, context: str, known: dict):
    """Pull typed fields out of a config dict; unknown fields are errors."""
    unknown = set(cfg) - set(known)
    if unknown:
        raise ConfigError(f"{context}: unknown field(s) {sorted(unknown)}")
    out = {}
    for name, (required, default) in known.items():
        if name in cfg:
            out[name] = cfg[name]
        elif required:
            raise ConfigError(f"{context}: missing required field {name!r}")
        else:
            out[name] = default
    return out


def parse_plant(cfg: dict, context: str) -> PlantParams:
    fields = _take(cfg, context, {
        "k_v_mps_per_rpm": (False, None),
        "chain": (False, None),
        "tau_s": (True, None),
        "n_max_rpm": (True, None),
    })
    if (fields["k_v_mps_per_rpm"] is None) == (fields["chain"] is None):
        raise ConfigError(f"{context}: specify exactly one of k_v_mps_per_rpm or chain")
    if fields["chain"] is not None:
        chain_fields = _take(fields["chain"], f"{context}.chain", {
            "pump_disp_m3_per_rad": (True, None),
            "motor_disp_m3_per_rad": (True, None),
            "gear_ratio": (True, None),
            "wheel_radius_m": (True, None),
        })
        k_v = derive_gain(ActuationChain(
            pump_disp=float(chain_fields["pump_disp_m3_per_rad"]),
            motor_disp=float(chain_fields["motor_disp_m3_per_rad"]),
            gear_ratio=float(chain_fields["gear_ratio"]),
            wheel_radius=float(chain_fields["wheel_radius_m"]),
        ))
    else:
        k_v = float(fields["k_v_mps_per_rpm"])
    return PlantParams(k_v=k_v, tau=float(fields["tau_s"]), n_max=float(fields["n_max_rpm"]))


def parse_disturbance(cfg: Optional[dict], context: str) -> DisturbanceProfile:
    if cfg is None:
        return DisturbanceProfile.none()
    fields = _take(cfg, context, {
        "kind": (True, None),
        "t_start_s": (False, 0.0),
        "magnitude": (False, 0.0),
        "frequency_hz": (False, 0.0),
    })
    return DisturbanceProfile(
        kind=str(fields["kind"]),
        t_start=float(fields["t_start_s"]),
        magnitude=float(fields["magnitude"]),
        frequency=float(fields["frequency_hz"]),
    )


def parse_envelope(cfg: dict, context: str) -> PpcParams:
    fields = _take(cfg, context, {
        "shoot_mps": (True, None),
        "bound_mps": (True, None),
        "rate_per_s": (True, None),
    })
    return PpcParams(
        shoot=float(fields["shoot_mps"]),
        bound=float(fields["bound_mps"]),
        rate=float(fields["rate_per_s"]),
    )


def parse_path(cfg: dict, context: str) -> Path:
    kind = cfg.get("kind")
    if kind == "constant_speed":
        fields = _take(cfg, context, {"kind": (True, None), "speed_mps": (True, None)})
        return ConstantSpeedPath(speed=float(fields["speed_mps"]))
    if kind == "circle":
        fields = _take(cfg, context, {
            "kind": (True, None), "radius_m": (True, None), "speed_mps": (True, None),
        })
        return CirclePath(radius=float(fields["radius_m"]), speed=float(fields["speed_mps"]))
    if kind == "s_curve":
        fields = _take(cfg, context, {
            "kind": (True, None), "segment_length_m": (True, None),
            "speed_mps": (True, None), "yaw_rate_rad_per_s": (True, None),
        })
        return SCurvePath(
            segment_length=float(fields["segment_length_m"]),
            speed=float(fields["speed_mps"]),
            yaw_rate=float(fields["yaw_rate_rad_per_s"]),
        )
    raise ConfigError(f"{context}: unknown path kind {kind!r}")


def parse_rac_gains(cfg: dict, context: str) -> RacGains:
    fields = _take(cfg, context, {
        "k_rpm_per_mps": (True, None),
        "gamma": (True, None),
        "delta_per_s": (True, None),
        "theta_hat0": (True, None),
    })
    return RacGains(
        k=float(fields["k_rpm_per_mps"]),
        gamma=float(fields["gamma"]),
        delta=float(fields["delta_per_s"]),
        theta_hat0=float(fields["theta_hat0"]),
    )


def parse_scenario_config(doc: dict, context: str = "scenario") -> ScenarioConfig:
    fields = _take(doc, context, {
        "mode": (True, None),
        "path": (True, None),
        "track_width_m": (True, None),
        "duration_s": (True, None),
        "dt_s": (False, 1e-3),
        "ramp_time_s": (False, 2.0),
        "seed": (False, 0),
        "plant_left": (True, None),
        "plant_right": (True, None),
        "disturbance_left": (False, None),
        "disturbance_right": (False, None),
        "zeta": (True, None),
        "o": (True, None),
        "rac": (True, None),
    })
    if fields["mode"] not in MODES:
        raise ConfigError(f"{context}: mode must be one of {MODES}")
    return ScenarioConfig(
        path=parse_path(fields["path"], f"{context}.path"),
        track_width=float(fields["track_width_m"]),
        duration=float(fields["duration_s"]),
        dt=float(fields["dt_s"]),
        mode=str(fields["mode"]),
        plant_left=parse_plant(fields["plant_left"], f"{context}.plant_left"),
        plant_right=parse_plant(fields["plant_right"], f"{context}.plant_right"),
        dist_left=parse_disturbance(fields["disturbance_left"], f"{context}.disturbance_left"),
        dist_right=parse_disturbance(fields["disturbance_right"], f"{context}.disturbance_right"),
        zeta_params=parse_envelope(fields["zeta"], f"{context}.zeta"),
        o_params=parse_envelope(fields["o"], f"{context}.o"),
        rac_gains=parse_rac_gains(fields["rac"], f"{context}.rac"),
        ramp_time=float(fields["ramp_time_s"]),
        seed=int(fields["seed"]),
    )


def parse_collect_config(doc: dict, context: str = "collect"):
    fields = _take(doc, context, {
        "seed": (False, 0),
        "dt_s": (False, 1e-3),
        "plant_left": (True, None),
        "plant_right": (True, None),
        "sweep": (True, None),
    })
    sweep_fields = _take(fields["sweep"], f"{context}.sweep", {
        "n_steps": (True, None),
        "dwell_s": (True, None),
        "n_max_rpm": (True, None),
    })
    sweep = SweepConfig(
        n_steps=int(sweep_fields["n_steps"]),
        dwell=float(sweep_fields["dwell_s"]),
        n_max=float(sweep_fields["n_max_rpm"]),
    )
    plants = {
        "left": parse_plant(fields["plant_left"], f"{context}.plant_left"),
        "right": parse_plant(fields["plant_right"], f"{context}.plant_right"),
    }
    return plants, sweep, float(fields["dt_s"]), int(fields["seed"])


def parse_train_config(doc: dict, context: str = "train"):
    fields = _take(doc, context, {
        "seed": (False, 0),
        "layer_sizes": (False, [1, 30, 25, 15, 10, 5, 1]),
        "ratios": (False, [0.70, 0.15, 0.15]),
        "mu0": (False, 1e-3),
        "beta": (False, 10.0),
        "max_epochs": (False, 200),
        "goal_mse": (False, 1e-3),
        "min_grad": (False, 1e-4),
        "step_tol": (False, 1e-10),
        "max_val_failures": (False, 6),
    })
    sizes = [int(s) for s in fields["layer_sizes"]]
    ratios = tuple(float(r) for r in fields["ratios"])
    cfg = LMConfig(
        mu0=float(fields["mu0"]),
        beta=float(fields["beta"]),
        max_epochs=int(fields["max_epochs"]),
        goal=float(fields["goal_mse"]),
        min_grad=float(fields["min_grad"]),
        step_tol=float(fields["step_tol"]),
        max_val_failures=int(fields["max_val_failures"]),
        seed=int(fields["seed"]),
    )
    return sizes, ratios, cfg


def load_json(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"no such file: {path}")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return doc
