"""Batch command line: ``dbnwp {train,predict,evaluate,synthesize,compare}``.

Settings come from flags, then an optional JSON ``--config`` file, then
defaults; flags win. Defaults reproduce the reference DBN settings: hidden
layers [100, 80, 50, 5] with learning rate 0.87 (``dbn1``) or [80, 50, 5]
with 0.90 (``dbn2``), 100 epochs, batch 100, momentum 0.05. The learning
rate, momentum, epochs and batch size apply to both pretraining and
fine-tuning.

Exit status is 0 on success, 1 when training or I/O fails at run time and 2
for usage, configuration or input-data errors. ``DBNWP_LOG`` sets the log
level (default ``WARNING``).
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import baselines, dbn, evaluation, modelio
from .dataset import (
    N_FEATURES,
    N_LAGS,
    DataFormatError,
    build_samples,
    format_timestamp,
    parse_csv,
    synthesize,
    write_csv,
)
from .numerics import make_rng
from .rbm import CdConfig, TrainingDivergedError

logger = logging.getLogger("dbnwp")

ARCHITECTURES = {"dbn1": (dbn.DBN1_HIDDEN, 0.87), "dbn2": (dbn.DBN2_HIDDEN, 0.90)}
CUSTOM_LEARNING_RATE = 0.90

DEFAULTS = {
    "arch": "dbn2",
    "seed": 0,
    "epochs": 100,
    "batch": 100,
    "lr": None,
    "momentum": 0.05,
    "k": 5,
    "runs": 20,
    "train_fraction": 0.7,
    "mode": "holdout",
    "blocked": False,
    "cd_k": 1,
    "nn_sizes": "20,10",
    "length": 5000,
}


class UsageError(Exception):
    """Problem with the command line, config file or input files."""


def parse_arch(text: str) -> tuple[tuple, float]:
    """``(hidden_sizes, default_learning_rate)`` for an ``--arch`` value."""
    if text in ARCHITECTURES:
        return ARCHITECTURES[text]
    if text.startswith("custom:"):
        try:
            sizes = tuple(int(s) for s in text[len("custom:"):].split(","))
        except ValueError:
            raise UsageError(f"bad custom architecture {text!r}; expected custom:<n1>,<n2>,...") from None
        if not sizes or min(sizes) < 1:
            raise UsageError(f"layer sizes must be positive in {text!r}")
        return sizes, CUSTOM_LEARNING_RATE
    raise UsageError(f"unknown architecture {text!r}; use dbn1, dbn2 or custom:<sizes>")


@dataclass
class RunConfig:
    arch: str
    hidden_sizes: tuple
    cd: CdConfig
    finetune: dbn.FineTuneConfig
    seed: int
    settings: dict

    def snapshot(self) -> dict:
        return {
            "arch": self.arch,
            "hidden_sizes": list(self.hidden_sizes),
            "cd_config": asdict(self.cd),
            "finetune_config": asdict(self.finetune),
            "seed": self.seed,
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.snapshot(), sort_keys=True).encode()).hexdigest()


def load_settings(args) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            from_file = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(from_file, dict):
            raise UsageError(f"{path}: expected a JSON object")
        unknown = set(from_file) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"{path}: unknown settings {sorted(unknown)}")
        settings.update(from_file)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def build_run_config(settings: dict) -> RunConfig:
    sizes, default_lr = parse_arch(str(settings["arch"]))
    lr = default_lr if settings["lr"] is None else float(settings["lr"])
    try:
        cd = CdConfig(lr, float(settings["momentum"]), int(settings["epochs"]), int(settings["batch"]),
                      k=int(settings["cd_k"]))
        ft = dbn.FineTuneConfig(lr, float(settings["momentum"]), int(settings["epochs"]), int(settings["batch"]))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid training settings: {exc}") from None
    seed = int(settings["seed"])
    if not 0 <= seed < 2**64:
        raise UsageError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return RunConfig(str(settings["arch"]), sizes, cd, ft, seed, settings)


def read_data(path):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"data file not found: {path}")
    return parse_csv(path)


def load_samples(path):
    samples = build_samples(read_data(path))
    if len(samples) == 0:
        raise UsageError(f"{path}: no complete {N_LAGS + 2}-hour window")
    return samples


def creation_time() -> str:
    """ISO time from ``SOURCE_DATE_EPOCH``, or ``"unset"``, so reruns match."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return "unset"
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def out_dir(path) -> Path:
    path = Path(path or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_train(args) -> int:
    cfg = build_run_config(load_settings(args))
    samples = load_samples(args.data)
    arch = dbn.DbnArchitecture(samples.n_features, cfg.hidden_sizes)
    provenance = {
        "seed": cfg.seed,
        "arch": cfg.arch,
        "config_sha256": cfg.digest(),
        "data_file": Path(args.data).name,
        "created": creation_time(),
    }
    trained = dbn.fit(samples, arch, cfg.cd, cfg.finetune, make_rng(cfg.seed), provenance=provenance)
    out = out_dir(args.out)
    modelio.save_model(trained.model, out / "model.json")
    _write_rows(out / "pretrain_trace.csv", ["layer", "epoch", "reconstruction_error"],
                [(i + 1, e + 1, repr(err)) for i, trace in enumerate(trained.pretrain_errors)
                 for e, err in enumerate(trace)])
    _write_rows(out / "finetune_trace.csv", ["epoch", "mse"],
                [(0, repr(trained.finetune.initial_loss))]
                + [(e + 1, repr(x)) for e, x in enumerate(trained.finetune.losses)])
    _write_rows(out / "timings.csv", ["phase", "seconds"],
                [("pretrain", f"{trained.pretrain_seconds:.6f}"),
                 ("finetune", f"{trained.finetune_seconds:.6f}")])
    print(f"trained {cfg.arch} {list(cfg.hidden_sizes)} on {len(samples)} samples: "
          f"pretrain {trained.pretrain_seconds:.2f} s, finetune {trained.finetune_seconds:.2f} s, "
          f"final mse {trained.finetune.losses[-1]:.6g}")
    print(f"wrote {out / 'model.json'}")
    return 0


def cmd_predict(args) -> int:
    model_path = Path(args.model)
    if not model_path.is_file():
        raise UsageError(f"model file not found: {model_path}")
    model = modelio.load_model(model_path)
    samples = build_samples(read_data(args.data))
    width = model.architecture.input_dim
    if width != N_FEATURES:
        raise UsageError(f"model expects {width} input features, data windows have {N_FEATURES}")
    if len(samples) == 0:
        warnings.warn(f"{args.data}: shorter than {N_LAGS + 2} hours or no complete window; "
                      "no predictions written", stacklevel=1)
        preds = np.zeros(0)
    else:
        preds = model.predict(samples.features)
    rows = [(format_timestamp(t), repr(float(p))) for t, p in zip(samples.timestamps, np.atleast_1d(preds))]
    if args.out:
        _write_rows(args.out, ["timestamp", "predicted_power"], rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["timestamp", "predicted_power"])
        w.writerows(rows)
    return 0


def cmd_evaluate(args) -> int:
    settings = load_settings(args)
    cfg = build_run_config(settings)
    samples = load_samples(args.data)
    fitter = evaluation.dbn_fitter(cfg.hidden_sizes, cfg.cd, cfg.finetune)
    mode = settings["mode"]
    snap = cfg.snapshot()
    out = out_dir(args.out)
    if mode == "kfold":
        report = evaluation.run_kfold(samples, fitter, int(settings["k"]), cfg.seed,
                                      blocked=bool(settings["blocked"]), config=snap)
    elif mode == "holdout":
        report = evaluation.run_holdout(samples, fitter, float(settings["train_fraction"]), cfg.seed, config=snap)
    elif mode == "stability":
        result = evaluation.stability_runs(samples, fitter, int(settings["runs"]), cfg.seed,
                                           train_fraction=float(settings["train_fraction"]), config=snap)
        report = result.report
        result.write_curves(out / "curves.csv")
        result.write_summary(out / "summary.csv")
    else:
        raise UsageError(f"unknown mode {mode!r}")
    report.write_csv(out / "report.csv")
    report.write_timings(out / "timings.csv")
    for u in report.units:
        print(f"unit {u.unit}: rmse {u.errors.rmse:.5f} mae {u.errors.mae:.5f} sde {u.errors.sde:.5f} "
              f"train {u.train_seconds:.2f} s test {u.test_seconds:.3f} s")
    print(f"mean: rmse {report.mean('rmse'):.5f} mae {report.mean('mae'):.5f} sde {report.mean('sde'):.5f}")
    return 0


def cmd_synthesize(args) -> int:
    settings = load_settings(args)
    if not args.out:
        raise UsageError("synthesize needs --out")
    try:
        records = synthesize(int(settings["length"]), int(settings["seed"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_csv(records, args.out)
    print(f"wrote {len(records)} hours to {args.out}")
    return 0


def cmd_compare(args) -> int:
    settings = load_settings(args)
    cfg = build_run_config(settings)
    samples = load_samples(args.data)
    try:
        nn_sizes = tuple(int(s) for s in str(settings["nn_sizes"]).split(","))
    except ValueError:
        raise UsageError(f"bad --nn-sizes {settings['nn_sizes']!r}") from None
    train, test = evaluation.holdout_split(samples, float(settings["train_fraction"]))
    arch = dbn.DbnArchitecture(train.n_features, cfg.hidden_sizes)
    model = dbn.fit(train, arch, cfg.cd, cfg.finetune, make_rng(cfg.seed), provenance={"seed": cfg.seed}).model
    nn = baselines.train_two_layer_nn(train, nn_sizes, cfg.finetune, cfg.seed)
    table = baselines.compare([("dbn-wp", model), ("two-layer-nn", nn), ("persistence", baselines.PERSISTENCE)],
                              test)
    target = args.out or "comparison.csv"
    table.write_csv(target)
    for name, errs in table.rows:
        print(f"{name:>14}: rmse {errs.rmse:.5f} mae {errs.mae:.5f} sde {errs.sde:.5f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dbnwp", description="Deep belief network wind power forecasting.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", required=True, help="hourly CSV: timestamp,ks,kd,kz,km,kp")
        p.add_argument("--config", help="JSON settings file; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")

    def training(p):
        p.add_argument("--arch", help="dbn1, dbn2 or custom:<n1>,<n2>,...")
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--momentum", type=float)
        p.add_argument("--cd-k", dest="cd_k", type=int, help="Gibbs steps per CD update")

    def split(p):
        p.add_argument("--train-fraction", dest="train_fraction", type=float)

    p = sub.add_parser("train", help="pretrain and fine-tune a model")
    common(p)
    training(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="forecast every complete window of a data file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="k-fold, hold-out or multi-seed stability evaluation")
    common(p)
    training(p)
    split(p)
    p.add_argument("--mode", choices=["kfold", "holdout", "stability"])
    p.add_argument("--k", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--blocked", action="store_true", default=None, help="contiguous instead of random folds")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synthesize", help="write a synthetic farm series")
    common(p, data=False)
    p.add_argument("--length", type=int)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("compare", help="DBN against persistence and a two-layer network on a hold-out split")
    common(p)
    training(p)
    split(p)
    p.add_argument("--nn-sizes", dest="nn_sizes", help="hidden sizes of the baseline network, e.g. 20,10")
    p.set_defaults(func=cmd_compare)
    return parser


def configure_logging():
    name = os.environ.get("DBNWP_LOG", "WARNING").upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    logger.setLevel(level)


def main(argv=None) -> int:
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DataFormatError, modelio.ModelFormatError) as exc:
        print(f"dbnwp: error: {exc}", file=sys.stderr)
        return 2
    except (TrainingDivergedError, OSError, RuntimeError, ValueError) as exc:
        print(f"dbnwp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
