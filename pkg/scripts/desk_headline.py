"""Baseline (p=0) vs pseudo-anomaly training (p=0.01) on the default sprite benchmark.

    python scripts/desk_headline.py --out runs/headline
    python scripts/desk_headline.py --out runs/k8 --multiplier 8   # generalization probe
"""
import argparse
import logging
from dataclasses import replace

from steal.experiment import HeadlineConfig, run_headline


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs/headline")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--multiplier", type=int, default=4, help="anomaly speed multiplier k")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = HeadlineConfig(seeds=tuple(args.seeds), steps=args.steps, learning_rate=args.lr)
    cfg = replace(cfg, bench=replace(cfg.bench, anomaly_multiplier=args.multiplier))
    res = run_headline(args.out, cfg)

    print(f"{'seed':>6} {'baseline':>9} {'steal':>9} {'delta':>8}")
    for s in cfg.seeds:
        print(f"{s:>6} {res.baseline[s]:9.4f} {res.steal[s]:9.4f} {res.deltas[s]:+8.4f}")
    print(f"{'median':>6} {res.median_baseline:9.4f} {res.median_steal:9.4f} {res.median_delta:+8.4f}")
    print(f"total {res.seconds / 60:.1f} min")


if __name__ == "__main__":
    main()
