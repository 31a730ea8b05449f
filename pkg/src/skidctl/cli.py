"""Command-line entry points: collect | train | simulate | metrics.

Exit codes: 0 completed, 1 error, 2 safety shutdown.  All randomness
flows from the config seed (overridable with --seed); outputs carry no
wall-clock state, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import sys

from . import modelio, presets
from .errors import ConfigError, SkidctlError, TrainingDivergedError
from .network import Batch, forward_batch, init_network, mse, norm_apply, norm_fit, norm_reverse
from .scenario import DnnController, STATUS_SHUTDOWN, collect_open_loop, metrics, run_scenario
from .train import split_data, train

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SHUTDOWN = 2


def _load_doc(args, preset_table, what: str) -> dict:
    if args.config is None and args.preset is None:
        raise ConfigError(f"{what}: provide --config or --preset")
    if args.config is not None and args.preset is not None:
        raise ConfigError(f"{what}: --config and --preset are mutually exclusive")
    if args.preset is not None:
        try:
            return preset_table(args.preset)
        except KeyError:
            raise ConfigError(f"{what}: unknown preset {args.preset!r}") from None
    return modelio.load_json(args.config)


def _named_default(name: str, loader):
    if name != "desk":
        raise KeyError(name)
    return loader()


def cmd_collect(args) -> int:
    doc = _load_doc(args, lambda name: _named_default(name, presets.collect_preset), "collect")
    if args.seed is not None:
        doc["seed"] = args.seed
    plants, sweep, dt, seed = modelio.parse_collect_config(doc)
    for side in ("left", "right"):
        batch = collect_open_loop(plants[side], sweep, dt=dt)
        header = {
            "seed": seed,
            "side": side,
            "dt_s": dt,
            "plant": {
                "k_v_mps_per_rpm": plants[side].k_v,
                "tau_s": plants[side].tau,
                "n_max_rpm": plants[side].n_max,
            },
            "sweep": {"n_steps": sweep.n_steps, "dwell_s": sweep.dwell, "n_max_rpm": sweep.n_max},
        }
        out = f"{args.out_prefix}_{side}.csv"
        modelio.write_dataset(out, batch, header)
        print(f"wrote {len(batch)} samples to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    doc = _load_doc(args, lambda name: _named_default(name, presets.train_preset), "train")
    if args.seed is not None:
        doc["seed"] = args.seed
    sizes, ratios, cfg = modelio.parse_train_config(doc)
    batch, _header = modelio.read_dataset(args.data)

    split = split_data(len(batch), ratios=ratios, seed=cfg.seed)
    raw = {
        "train": Batch(batch.inputs[split.train_idx], batch.targets[split.train_idx]),
        "val": Batch(batch.inputs[split.val_idx], batch.targets[split.val_idx]),
        "test": Batch(batch.inputs[split.test_idx], batch.targets[split.test_idx]),
    }
    in_norm = norm_fit(raw["train"].inputs)
    out_norm = norm_fit(raw["train"].targets)
    scaled = {
        name: Batch(norm_apply(in_norm, b.inputs), norm_apply(out_norm, b.targets))
        for name, b in raw.items()
    }
    net = init_network(sizes, seed=cfg.seed)
    try:
        net, history = train(net, scaled["train"], scaled["val"], scaled["test"], cfg)
    except TrainingDivergedError as exc:
        if args.history_out and exc.history is not None:
            _write_history(args.history_out, exc.history)
        raise

    controller = DnnController(net=net, in_norm=in_norm, out_norm=out_norm)
    modelio.save_model(args.model_out, controller)
    if args.history_out:
        _write_history(args.history_out, history)

    raw_mse = {}
    for name, b in raw.items():
        pred = norm_reverse(out_norm, forward_batch(net, norm_apply(in_norm, b.inputs)))
        raw_mse[name] = mse(pred, b.targets)
    print(
        "MSE (raw scale): train=%s val=%s test=%s"
        % (repr(raw_mse["train"]), repr(raw_mse["val"]), repr(raw_mse["test"]))
    )
    print(f"stopped after {len(history.epochs)} epochs: {history.stop_reason}")
    return EXIT_OK


def _write_history(path: str, history) -> None:
    import json

    doc = {
        "stop_reason": history.stop_reason,
        "best_val_mse": history.best_val_mse,
        "best_epoch": history.best_epoch,
        "epochs": [
            {
                "epoch": rec.epoch,
                "mu": rec.mu,
                "accepted": rec.accepted,
                "train_mse": rec.train_mse,
                "val_mse": rec.val_mse,
                "test_mse": rec.test_mse,
                "grad_norm": rec.grad_norm,
                "val_failures": rec.val_failures,
            }
            for rec in history.epochs
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def cmd_simulate(args) -> int:
    doc = _load_doc(args, presets.scenario_preset, "simulate")
    if args.seed is not None:
        doc["seed"] = args.seed
    cfg = modelio.parse_scenario_config(doc)
    controller_left = modelio.load_model(args.model_left) if args.model_left else None
    controller_right = modelio.load_model(args.model_right) if args.model_right else None
    if cfg.mode in ("dnn", "hybrid") and (controller_left is None or controller_right is None):
        raise ConfigError(f"mode {cfg.mode!r} requires --model-left and --model-right")

    trace, summary, status = run_scenario(cfg, controller_left, controller_right)
    modelio.write_trace_csv(args.trace_out, trace)
    if args.summary_out:
        modelio.write_summary(args.summary_out, summary.to_dict())
    print(f"{status}: {len(trace)} steps traced to {args.trace_out}")
    if status == STATUS_SHUTDOWN:
        print(f"safety shutdown at t={summary.shutdown_time!r} s")
        return EXIT_SHUTDOWN
    return EXIT_OK


def cmd_metrics(args) -> int:
    trace = modelio.read_trace_csv(args.trace)
    summary = metrics(trace)
    doc = summary.to_dict()
    if args.out:
        modelio.write_summary(args.out, doc)
        print(f"wrote summary to {args.out}")
    else:
        import json

        print(json.dumps(doc, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skidctl",
        description="Safe hierarchical wheel-velocity control sandbox for skid-steer robots",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="run the open-loop sweep and write per-side datasets")
    p.add_argument("--config", help="collect config JSON")
    p.add_argument("--preset", help="built-in collect preset: desk")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-prefix", required=True, help="dataset path prefix (suffix _left/_right.csv)")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="split, normalize and train the inverse model")
    p.add_argument("--config", help="train config JSON")
    p.add_argument("--preset", help="built-in train preset: desk")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--data", required=True, help="dataset CSV from collect")
    p.add_argument("--model-out", required=True, help="output model JSON")
    p.add_argument("--history-out", help="optional per-epoch history JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="run a closed-loop scenario")
    p.add_argument("--config", help="scenario config JSON")
    p.add_argument("--preset", help=f"built-in scenario: {sorted(presets.SCENARIOS)}")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--model-left", help="trained model for the left side")
    p.add_argument("--model-right", help="trained model for the right side")
    p.add_argument("--trace-out", required=True, help="output trace CSV")
    p.add_argument("--summary-out", help="optional summary JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="recompute the summary from a trace CSV")
    p.add_argument("--trace", required=True, help="trace CSV from simulate")
    p.add_argument("--out", help="summary JSON path (default: stdout)")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SkidctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
