"""Command-line entry point.

Subcommands:
  synth       generate a synthetic two-population dataset (manifest + .f32)
  transform   apply the pretext transformations and dump segments as CSV
  pretrain    train the signal-transformation-recognition network
  train-eval  cross-validated downstream evaluation from a pretrained model
  gradcheck   finite-difference verification of all backward passes

Configuration comes from a flat ``key = value`` text file (``--config``)
overridden by command-line flags; every run writes its fully-resolved
configuration into a fresh timestamped directory under ``--out`` together
with its outputs, so any run can be reproduced from its artifacts alone.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as eio
from .errors import ParameterError, ValidationError
from .models import load_model, save_model
from .rng import stream
from .signal import RawRecording, synth_ecg
from .training import (
    TrainConfig,
    prepare_dataset,
    run_cv_experiment,
    train_pretext,
)
from .transforms import TransformId, TransformParams, apply_transform, build_pretext_dataset

CONFIG_VERSION = 1


@dataclass
class RunConfig:
    """Flat, serializable run configuration (training + transform knobs)."""

    config_version: int = CONFIG_VERSION
    lr: float = 0.001
    batch_size: int = 128
    pretext_epochs: int = 30
    emotion_epochs: int = 100
    alphas: str = ",".join(["0.142857142857"] * 7)
    dropout: float = 0.6
    l2_beta: float = 0.0001
    kfolds: int = 10
    seed: int = 0
    label_fraction: float = 1.0
    binarize_scope: str = "global"
    split_by_subject: bool = False
    noise_sigma_rel: float = 0.5
    scale_factor: float = 2.0
    permute_pieces: int = 10
    warp_pieces: int = 4
    warp_stretch: float = 1.25

    def train_config(self) -> TrainConfig:
        alphas = tuple(float(a) for a in self.alphas.split(","))
        total = sum(alphas)
        alphas = tuple(a / total * 1.0 for a in alphas) if abs(total - 1) > 1e-9 else alphas
        return TrainConfig(lr=self.lr, batch_size=self.batch_size,
                           pretext_epochs=self.pretext_epochs,
                           emotion_epochs=self.emotion_epochs, alphas=alphas,
                           dropout=self.dropout, l2_beta=self.l2_beta,
                           kfolds=self.kfolds, seed=self.seed,
                           label_fraction=self.label_fraction,
                           binarize_scope=self.binarize_scope,
                           split_by_subject=self.split_by_subject)

    def transform_params(self) -> TransformParams:
        return TransformParams(noise_sigma_rel=self.noise_sigma_rel,
                               scale_factor=self.scale_factor,
                               permute_pieces=self.permute_pieces,
                               warp_pieces=self.warp_pieces,
                               warp_stretch=self.warp_stretch,
                               rng_seed=self.seed)


def _coerce(value: str, typ) -> object:
    if typ is bool:
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ParameterError(f"expected a boolean, got {value!r}")
    return typ(value)


def load_run_config(path: str | Path | None, overrides: dict) -> RunConfig:
    fields = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    types = {"config_version": int, "lr": float, "batch_size": int,
             "pretext_epochs": int, "emotion_epochs": int, "alphas": str,
             "dropout": float, "l2_beta": float, "kfolds": int, "seed": int,
             "label_fraction": float, "binarize_scope": str,
             "split_by_subject": bool, "noise_sigma_rel": float,
             "scale_factor": float, "permute_pieces": int,
             "warp_pieces": int, "warp_stretch": float}
    values: dict = {}
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = (s.strip() for s in line.partition("="))
            if key not in fields:
                raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(val, types[key])
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    cfg = RunConfig(**values)
    if cfg.config_version > CONFIG_VERSION:
        raise ValidationError(f"config version {cfg.config_version} is newer than "
                              f"supported ({CONFIG_VERSION})")
    return cfg


def make_run_dir(out: str | Path) -> Path:
    base = Path(out)
    base.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y%m%d-%H%M%S")
    for n in range(1000):
        candidate = base / (f"run-{stamp}" if n == 0 else f"run-{stamp}-{n}")
        try:
            candidate.mkdir()
            return candidate
        except FileExistsError:
            continue
    raise RuntimeError("could not allocate a run directory")


def write_config_echo(cfg: RunConfig, run_dir: Path) -> None:
    lines = [f"{k} = {v}" for k, v in sorted(dataclasses.asdict(cfg).items())]
    (run_dir / "resolved-config.txt").write_text("\n".join(lines) + "\n")


def cmd_synth(args, cfg: RunConfig) -> int:
    run_dir = make_run_dir(args.out)
    write_config_echo(cfg, run_dir)
    rng = stream(cfg.seed, 20)
    recordings = []
    for i in range(args.count):
        low_pop = i < args.count // 2
        lo, hi = (args.hr_low if low_pop else args.hr_high)
        hr = float(lo + (hi - lo) * rng.random())
        score = 3.0 if low_pop else 7.0
        samples = synth_ecg(hr, args.fs, args.duration, seed=cfg.seed * 100003 + i)
        recordings.append(RawRecording(
            samples=samples, sample_rate_hz=args.fs, subject_id=f"s{i:03d}",
            condition_labels={"arousal": score, "valence": score, "stress": score}))
    manifest = eio.write_manifest(recordings, run_dir / "data")
    print(f"wrote {len(recordings)} recordings to {manifest.parent}")
    return 0


def cmd_transform(args, cfg: RunConfig) -> int:
    run_dir = make_run_dir(args.out)
    write_config_echo(cfg, run_dir)
    data = prepare_dataset(eio.read_recordings(args.data))
    params = cfg.transform_params()
    out_path = run_dir / "transformed.csv"
    with out_path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["segment_index", "task_id"] + [f"s{i}" for i in range(data.X.shape[1])])
        for sample_idx, sample in enumerate(build_pretext_dataset(list(data.X), params)):
            writer.writerow([sample_idx // len(TransformId), int(sample.task)]
                            + [repr(float(v)) for v in sample.segment])
    print(f"wrote {out_path}")
    return 0


def cmd_pretrain(args, cfg: RunConfig) -> int:
    run_dir = make_run_dir(args.out)
    write_config_echo(cfg, run_dir)
    data = prepare_dataset(eio.read_recordings(args.data))
    samples = build_pretext_dataset(list(data.X), cfg.transform_params())
    params, trace = train_pretext(samples, cfg.train_config())
    model_path = run_dir / "pretext-model.ecgssl"
    save_model(params, "pretext", model_path)
    with (run_dir / "loss-trace.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "task_id", "mean_loss"])
        for epoch in range(trace.shape[0]):
            for task in range(trace.shape[1]):
                writer.writerow([epoch, task, repr(float(trace[epoch, task]))])
    print(f"wrote {model_path}")
    return 0


def _write_report(rows: list[dict], path: Path) -> None:
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["fold", "target", "accuracy", "f1"])
        for r in rows:
            writer.writerow([r["fold"], r["target"], repr(r["accuracy"]), repr(r["f1"])])


def cmd_train_eval(args, cfg: RunConfig) -> int:
    run_dir = make_run_dir(args.out)
    write_config_echo(cfg, run_dir)
    data = prepare_dataset(eio.read_recordings(args.data))
    config = cfg.train_config()
    trunk, arch = load_model(args.pretext_model)
    if arch != "pretext":
        raise ValidationError(f"{args.pretext_model}: expected a pretext model, got {arch!r}")
    report = run_cv_experiment(data, config, trunk=trunk,
                               transform_params=cfg.transform_params())
    _write_report(report.rows, run_dir / "report.csv")
    summary = {
        "config": dataclasses.asdict(cfg),
        "mean": {t: {"accuracy": report.mean(t, "accuracy"), "f1": report.mean(t, "f1")}
                 for t in report.targets},
    }
    if args.supervised_baseline:
        baseline = run_cv_experiment(data, config, supervised=True)
        _write_report(baseline.rows, run_dir / "baseline-report.csv")
        summary["baseline_mean"] = {
            t: {"accuracy": baseline.mean(t, "accuracy"), "f1": baseline.mean(t, "f1")}
            for t in baseline.targets}
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {run_dir / 'report.csv'}")
    return 0


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    from .kernel.gradcheck import frozen_parameter_check, run_gradcheck_suite

    results = run_gradcheck_suite(seed=cfg.seed)
    ok = True
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: max rel error {r.max_rel_error:.3e} "
              f"(tolerance {r.tolerance:g})")
        ok &= r.passed
    frozen_ok = frozen_parameter_check(seed=cfg.seed)
    print(f"{'PASS' if frozen_ok else 'FAIL'}  frozen parameters receive no gradients")
    ok &= frozen_ok
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecgssl", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="flat key=value configuration file")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out", default="runs", help="output directory (default: runs)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--hr-low", type=float, nargs=2, default=(60.0, 68.0),
                   metavar=("LO", "HI"), help="heart-rate range of the low population")
    p.add_argument("--hr-high", type=float, nargs=2, default=(78.0, 86.0),
                   metavar=("LO", "HI"), help="heart-rate range of the high population")
    p.add_argument("--fs", type=float, default=256.0)
    p.add_argument("--duration", type=float, default=100.5, help="seconds per recording")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("transform", help="dump transformed segments as CSV")
    p.add_argument("--data", required=True, help="manifest dir/file or recording CSV")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("pretrain", help="train the transformation-recognition network")
    p.add_argument("--data", required=True)
    p.add_argument("--pretext-epochs", type=int, dest="pretext_epochs")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train-eval", help="cross-validated downstream evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--pretext-model", required=True)
    p.add_argument("--label-fraction", type=float, dest="label_fraction")
    p.add_argument("--emotion-epochs", type=int, dest="emotion_epochs")
    p.add_argument("--kfolds", type=int, dest="kfolds")
    p.add_argument("--supervised-baseline", action="store_true")
    p.set_defaults(func=cmd_train_eval)

    p = sub.add_parser("gradcheck", help="verify analytic gradients")
    p.set_defaults(func=cmd_gradcheck)
    return parser


_OVERRIDE_KEYS = ("seed", "label_fraction", "emotion_epochs", "pretext_epochs", "kfolds")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    try:
        cfg = load_run_config(args.config, overrides)
        return args.func(args, cfg)
    except (ParameterError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
