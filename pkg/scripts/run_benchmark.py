"""Ablation grid plus the two baselines on the frozen 2K-player benchmark.

    python3 scripts/run_benchmark.py [--runs 5] [--out results/] [key=value ...]

Positional ``key=value`` pairs override entries of configs/benchmark_train.cfg
(for calibration sweeps); ``--gen key=value`` does the same for the generator.
"""
import argparse
import time
from pathlib import Path

from pugnn.config import load_config, parse_kv_text
from pugnn.evaluation import VARIANTS, run_ablation_grid, run_baselines
from pugnn.synth_data import GeneratorConfig, generate_dataset
from pugnn.training import TrainConfig

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--runs", type=int, help="seeds per variant (default: num_runs from the config)")
    ap.add_argument("--gen-config", default=str(CONFIGS / "benchmark.cfg"))
    ap.add_argument("--train-config", default=str(CONFIGS / "benchmark_train.cfg"))
    ap.add_argument("--gen", action="append", default=[], help="generator override key=value")
    ap.add_argument("--variants", default=",".join(VARIANTS))
    ap.add_argument("--no-baselines", action="store_true")
    ap.add_argument("--out", help="write ablation.csv / ablation.png here")
    ap.add_argument("overrides", nargs="*", help="TrainConfig overrides key=value")
    args = ap.parse_args()

    gen = load_config(GeneratorConfig, args.gen_config, **parse_kv_text("\n".join(args.gen), "--gen"))
    train_over = parse_kv_text("\n".join(args.overrides), "overrides")
    if args.runs is not None:
        train_over["num_runs"] = str(args.runs)
    cfg = load_config(TrainConfig, args.train_config, **train_over)
    ds = generate_dataset(gen)

    t0 = time.perf_counter()
    grid = run_ablation_grid(ds, cfg, args.variants.split(","))
    if not args.no_baselines:
        grid.reports.update(run_baselines(ds, cfg))
    for name, rep in grid.reports.items():
        m, s = rep.mean(), rep.std()
        print(f"{name:10s} " + "  ".join(f"{k} {m[k]:.3f}±{s[k]:.3f}" for k in m)
              + "  f1s " + " ".join(f"{r.f1:.3f}" for r in rep.runs))
    print(f"elapsed {time.perf_counter() - t0:.1f}s")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        grid.write_csv(out / "ablation.csv")
        grid.plot(out / "ablation.png")


if __name__ == "__main__":
    main()
