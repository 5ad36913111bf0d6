"""Command-line entry point: ``generate``, ``train``, ``evaluate``, ``ablate``.

Every subcommand that writes files puts them under ``--out`` together with a
single ``manifest.json`` describing the run.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, dump_config, load_config
from .evaluation import VARIANTS, run_ablation_grid, run_baselines
from .metrics import METRIC_NAMES
from .synth_data import (
    FORMAT_VERSION,
    TEST,
    VALIDATION,
    DatasetFormatError,
    GeneratorConfig,
    generate_dataset,
    load_dataset,
    save_dataset,
)
from .training import CHECKPOINT_VERSION, TrainConfig, TrainingError, load_checkpoint, save_checkpoint, train

log = logging.getLogger("pugnn")

MANIFEST = "manifest.json"


class CliError(RuntimeError):
    pass


# ---------------------------------------------------------------- plumbing

def write_json_atomic(path: Path, payload: dict) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_manifest(out: Path, subcommand: str, config, seeds, artifacts, started: float, argv) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": None if config is None else dataclasses.asdict(config),
        "config_type": None if config is None else type(config).__name__,
        "seeds": [int(s) for s in seeds],
        "artifacts": sorted(str(a) for a in artifacts),
        "version": {
            "package": __version__,
            "dataset_format": FORMAT_VERSION,
            "checkpoint_format": CHECKPOINT_VERSION,
        },
        "argv": list(argv),
        "duration_s": round(time.perf_counter() - started, 3),
    }
    write_json_atomic(out / MANIFEST, manifest)


def _existing_dir(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise CliError(f"{what} directory not found: {p}")
    return p


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _train_config(args) -> TrainConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.runs is not None:
        overrides["num_runs"] = args.runs
    if args.config is None:
        cfg = dataclasses.replace(TrainConfig(), **overrides)
    else:
        cfg = load_config(TrainConfig, args.config, **overrides)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- subcommands

def cmd_generate(args, argv) -> int:
    started = time.perf_counter()
    overrides = {} if args.seed is None else {"seed": args.seed}
    cfg = load_config(GeneratorConfig, args.config, **overrides) if args.config else GeneratorConfig(**overrides)
    ds = generate_dataset(cfg)
    out = _out_dir(args.out)
    save_dataset(ds, out)
    log.info("wrote %d players, %d edges to %s", ds.num_players, ds.num_edges, out)
    write_manifest(out, "generate", cfg, [cfg.seed], ["players.txt", "edges.csv", "meta.json"], started, argv)
    return 0


def cmd_train(args, argv) -> int:
    started = time.perf_counter()
    data = _existing_dir(args.data, "data")
    cfg = _train_config(args)
    ds = load_dataset(data)
    out = _out_dir(args.out)
    (out / "checkpoints").mkdir(exist_ok=True)

    artifacts, runs, seeds = ["config.cfg", "history.csv", "metrics.json"], [], []
    history_rows = []
    for r in range(cfg.num_runs):
        run_cfg = dataclasses.replace(cfg, seed=cfg.seed + r)
        tm = train(ds, run_cfg)
        ckpt = Path("checkpoints") / f"seed_{run_cfg.seed}.pt"
        save_checkpoint(tm, out / ckpt)
        artifacts.append(str(ckpt))
        seeds.append(run_cfg.seed)
        report = tm.evaluate(ds, TEST)
        runs.append({
            "seed": run_cfg.seed,
            "checkpoint": str(ckpt),
            "best_epoch": tm.best_epoch,
            "validation_f1": tm.best_val_f1,
            "test": report.as_dict(),
        })
        history_rows += [{"seed": run_cfg.seed, **h} for h in tm.history]
        log.info("seed %d: best epoch %d, val F1 %.4f, test F1 %.4f", run_cfg.seed, tm.best_epoch, tm.best_val_f1, report.f1)

    with open(out / "history.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["seed", "epoch", "train_loss", "val_f1"])
        w.writeheader()
        w.writerows(history_rows)
    (out / "config.cfg").write_text(dump_config(cfg))
    summary = {
        "split": "test",
        "runs": runs,
        "mean": {m: float(np.mean([r["test"][m] for r in runs])) for m in METRIC_NAMES},
        "std": {m: float(np.std([r["test"][m] for r in runs])) for m in METRIC_NAMES},
    }
    write_json_atomic(out / "metrics.json", summary)
    write_manifest(out, "train", cfg, seeds, artifacts, started, argv)
    print(json.dumps(summary["mean"], sort_keys=True))
    return 0


def cmd_evaluate(args, argv) -> int:
    started = time.perf_counter()
    ckpt = Path(args.model)
    if not ckpt.is_file():
        raise CliError(f"checkpoint not found: {ckpt}")
    data = _existing_dir(args.data, "data")
    tm = load_checkpoint(ckpt)
    ds = load_dataset(data)
    if ds.vocab_size != tm.vocab_size or ds.edge_dim != tm.edge_dim:
        raise CliError(f"{ckpt}: model expects vocab {tm.vocab_size} / edge_dim {tm.edge_dim}, data has {ds.vocab_size} / {ds.edge_dim}")
    report = {
        "checkpoint": str(ckpt),
        "data": str(data),
        "test": tm.evaluate(ds, TEST).as_dict(),
        "validation": tm.evaluate(ds, VALIDATION).as_dict(),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.out:
        out = _out_dir(args.out)
        write_json_atomic(out / "metrics.json", report)
        write_manifest(out, "evaluate", tm.config, [tm.config.seed], ["metrics.json"], started, argv)
    return 0


def cmd_ablate(args, argv) -> int:
    started = time.perf_counter()
    data = _existing_dir(args.data, "data")
    cfg = _train_config(args)
    ds = load_dataset(data)
    out = _out_dir(args.out)
    result = run_ablation_grid(ds, cfg, VARIANTS)
    if args.baselines:
        result.reports.update(run_baselines(ds, cfg))
    result.write_csv(out / "ablation.csv")
    result.plot(out / "ablation.png")
    write_json_atomic(out / "ablation.json", {k: v.as_dict() for k, v in result.reports.items()})
    for name, rep in result.reports.items():
        mean = rep.mean()
        log.info("%-9s " + "  ".join(f"{m} {mean[m]:.3f}" for m in METRIC_NAMES), name)
    seeds = range(cfg.seed, cfg.seed + cfg.num_runs)
    write_manifest(out, "ablate", cfg, seeds, ["ablation.csv", "ablation.png", "ablation.json"], started, argv)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pugnn",
        description="PU-learning graph fraud detection on synthetic transaction networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    g = sub.add_parser("generate", help="generate a synthetic dataset")
    g.add_argument("--config", help="generator config file (key = value); defaults when omitted")
    g.add_argument("--seed", type=int, help="overrides the config seed")
    g.add_argument("--out", required=True, help="output directory for the dataset")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one model per seed and save checkpoints")
    t.add_argument("--data", required=True, help="dataset directory written by 'generate'")
    t.add_argument("--config", help="training config file (key = value); defaults when omitted")
    t.add_argument("--seed", type=int, help="first run seed (overrides the config)")
    t.add_argument("--runs", type=int, help="number of seeds (overrides num_runs)")
    t.add_argument("--out", required=True, help="output directory for checkpoints and metrics")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a checkpoint on a dataset and print metrics JSON")
    e.add_argument("--model", required=True, help="checkpoint file written by 'train'")
    e.add_argument("--data", required=True, help="dataset directory")
    e.add_argument("--out", help="also write metrics.json and a manifest here")
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("ablate", help="run the PU/SMOTE ablation grid; writes CSV and PNG")
    a.add_argument("--data", required=True, help="dataset directory")
    a.add_argument("--config", help="base training config file")
    a.add_argument("--seed", type=int, help="first run seed (overrides the config)")
    a.add_argument("--runs", type=int, help="seeds per variant (overrides num_runs)")
    a.add_argument("--out", default="ablation", help="output directory (default: ./ablation)")
    a.add_argument("--baselines", action="store_true", help="also run the MLP and mean-aggregation baselines")
    a.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args, argv)
    except (CliError, ConfigError, DatasetFormatError, TrainingError, ValueError, OSError) as exc:
        print(f"pugnn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
