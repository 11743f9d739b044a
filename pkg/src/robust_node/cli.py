"""Command-line entry point: gen-data, train, eval, sweep, selftest."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from . import config as config_mod
from .adversary import AdversaryConfig
from .data import generate_dataset, read_dataset, write_dataset
from .errors import ConfigError, DivergenceError, LambdaTooSmallError, TrainingError
from .evaluate import default_eps_grid, evaluate, write_report
from .model import ModelConfig, load_control, save_control
from .trainer import TrainConfig, config_snapshot, train_robust, train_standard, write_history

log = logging.getLogger("robust_node")


class CliError(Exception):
    def __init__(self, kind, message):
        self.kind = kind
        super().__init__(message)


def parse_eps_grid(text: str) -> list:
    """``"0:0.4:0.02"`` (start:stop:step, inclusive) or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step))
            return [round(start + i * step, 12) for i in range(count + 1)]
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad eps grid {text!r}") from None
    if not grid or min(grid) < 0:
        raise ConfigError(f"bad eps grid {text!r}")
    return sorted(grid)


def _add_config_overrides(parser):
    group = parser.add_argument_group("config overrides")
    for cls in (ModelConfig, TrainConfig):
        for f in dataclasses.fields(cls):
            if f.name == "seed":
                continue
            group.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, default=None, metavar="V")


def _configs_from_args(args):
    values = config_mod.read_config(args.config) if args.config else {}
    keys = config_mod.known_keys()
    for key, (_, kind) in keys.items():
        raw = getattr(args, "cfg_" + key, None)
        if raw is not None:
            values[key] = config_mod.parse_value(key, raw, kind)
    values["seed"] = args.seed
    return config_mod.build_configs(values)


def _load_checkpoint(path):
    try:
        u, header, meta = load_control(path)
    except OSError as exc:
        raise CliError("io", f"cannot read checkpoint {path}: {exc.strerror}") from exc
    model_values = meta.get("config", {}).get("model")
    if model_values:
        model_cfg = ModelConfig(**model_values)
    else:
        model_cfg = ModelConfig(state_dim=header["state_dim"], num_steps=header["N"], dt=header["dt"])
    return u, model_cfg, meta


def _load_data(path, split):
    try:
        return read_dataset(path, split=split)
    except OSError as exc:
        raise CliError("io", f"cannot read dataset {path}: {exc.strerror}") from exc


def cmd_gen_data(args):
    data = generate_dataset(args.q, args.seed, radius=args.radius, bound=args.bound, split=args.split)
    write_dataset(args.out, data)
    log.info("wrote %d points (%d inside) to %s", len(data), int((data.y > 0).sum()), args.out)


def cmd_train(args):
    model_cfg, train_cfg = _configs_from_args(args)
    data = _load_data(args.data, "train")
    trainer = train_robust if args.mode == "robust" else train_standard
    state = trainer(data.X, data.targets, model_cfg, train_cfg)
    meta = {
        "mode": args.mode,
        "seed": args.seed,
        "memorized": [int(i) for i in state.memorized],
        "failures": state.failures,
        "config": config_snapshot(model_cfg, train_cfg),
    }
    save_control(args.out, state.u, model_cfg, meta=meta)
    if args.history:
        write_history(args.history, state.history)
    log.info("%s training: %d/%d pairs memorized", args.mode, len(state.memorized), len(data))


def _evaluate_checkpoint(path, test, grid, args, tag=None):
    u, model_cfg, meta = _load_checkpoint(path)
    train = meta.get("config", {}).get("train", {})
    adversary = AdversaryConfig(train.get("lambda1", 0.2), train.get("rho", 0.1), train.get("zero_threshold", 1e-10))
    return evaluate(
        u,
        test,
        grid,
        args.samples,
        args.seed,
        model_cfg,
        model=tag or meta.get("mode", ""),
        adversarial=args.adversarial,
        adversary=adversary,
    )


def cmd_eval(args):
    test = _load_data(args.test, "test")
    report = _evaluate_checkpoint(args.checkpoint, test, parse_eps_grid(args.eps_grid), args, args.model)
    write_report(args.out, report)


def cmd_sweep(args):
    test = _load_data(args.test, "test")
    grid = parse_eps_grid(args.eps_grid)
    reports = [
        _evaluate_checkpoint(args.robust, test, grid, args, "robust"),
        _evaluate_checkpoint(args.standard, test, grid, args, "standard"),
    ]
    write_report(args.out, reports)


def cmd_selftest(args):
    from .selftest import run_selftest

    if not run_selftest(sys.stdout):
        raise CliError("selftest", "one or more checks failed")


def build_parser():
    parser = argparse.ArgumentParser(prog="robust-node", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample a disk-classification dataset")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--bound", type=float, default=1.0)
    p.add_argument("--split", default="train")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a robust or standard model")
    p.add_argument("--mode", choices=("robust", "standard"), required=True)
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--history", help="write the per-iteration log as CSV")
    _add_config_overrides(p)
    p.set_defaults(func=cmd_train)

    grid_default = f"0:0.4:0.02"
    for name, helptext in (("eval", "disturbance sweep of one checkpoint"), ("sweep", "robust vs standard sweep")):
        p = sub.add_parser(name, help=helptext)
        if name == "eval":
            p.add_argument("--checkpoint", required=True)
            p.add_argument("--model", default=None, help="model tag written to the report")
        else:
            p.add_argument("--robust", required=True)
            p.add_argument("--standard", required=True)
        p.add_argument("--test", required=True)
        p.add_argument("--eps-grid", default=grid_default)
        p.add_argument("--samples", type=int, default=16)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--adversarial", action="store_true", help="use rescaled worst-case disturbances")
        p.set_defaults(func=cmd_eval if name == "eval" else cmd_sweep)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def _fail(kind, message) -> int:
    flat = " ".join(str(message).split())
    print(f"error kind={kind} message={flat}", file=sys.stderr)
    return 1 if kind in ("divergence", "training", "selftest") else 2


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        return _fail(exc.kind, exc)
    except LambdaTooSmallError as exc:
        return _fail("lambda", exc)
    except ConfigError as exc:
        return _fail("config", exc)
    except DivergenceError as exc:
        return _fail("divergence", exc)
    except TrainingError as exc:
        return _fail("training", exc)
    except OSError as exc:
        return _fail("io", f"{exc.filename}: {exc.strerror}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
