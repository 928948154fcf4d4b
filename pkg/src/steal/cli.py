"""``steal`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import torch
import yaml

from .config import ConfigError, dump_config, load_config, parse_overrides
from .dataset import DatasetError, FrameStore, load_dataset
from .evaluation import compare, evaluate_model
from .model import model_info
from .scoring import PsnrConfig, score_video, write_heatmaps, write_series_csv
from .synthbench import BenchConfig, build_benchmark, rebuild_from_manifest
from .synthesizer import SynthConfig
from .training import CheckpointError, NumericError, TrainConfig, load_checkpoint, train

log = logging.getLogger("steal")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _version() -> str:
    try:
        v = version("artifact")
    except PackageNotFoundError:
        v = "unknown"
    return f"steal {v} (torch {torch.__version__})"


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML file of dotted config keys")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable, beats --config")
    p.add_argument("--seed", type=int, help="training seed (falls back to $STEAL_SEED)")


def _run_config(args) -> dict:
    overrides = parse_overrides(args.set)
    if getattr(args, "seed", None) is not None:
        overrides["train.seed"] = str(args.seed)
    if getattr(args, "data", None):
        overrides["data.root"] = str(args.data)
    return load_config(args.config, overrides)


def cmd_train(args) -> int:
    cfg = _run_config(args)
    if not cfg["data.root"]:
        raise UsageError("train: data.root is not set (use --data or a config file)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "run_config.yaml")
    ckpt = train(TrainConfig.from_flat(cfg), out, resume=args.resume)
    print(ckpt)
    return EXIT_OK


def cmd_score(args) -> int:
    ck = load_checkpoint(args.ckpt)
    pcfg = PsnrConfig.from_flat(ck.config)
    _, _, H, W = ck.model.input_shape
    index = load_dataset(args.data, args.split)
    store = FrameStore(H, W)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for meta in index.videos:
        series = score_video(ck.model, store, meta, pcfg, ck.config.get("score.batch_size", 16))
        write_series_csv(series, out / f"{meta.video_id}.csv")
        if args.heatmaps:
            write_heatmaps(ck.model, store, meta, pcfg, out / "heatmaps" / meta.video_id,
                           every=args.heatmap_every)
    print(f"scored {len(index)} videos -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ck = load_checkpoint(args.ckpt)
    index = load_dataset(args.data, "test")
    report = evaluate_model(ck.model, index, PsnrConfig.from_flat(ck.config),
                            batch_size=ck.config.get("score.batch_size", 16))
    out = Path(args.out) if args.out else Path(args.ckpt).parent
    report.write(out)
    print(f"frame-level AUC {report.auc:.4f}")
    for vid, auc in report.per_video.items():
        print(f"  {vid}: {'-' if auc is None else f'{auc:.4f}'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cmp = compare(args.ckpt_a, args.ckpt_b, args.data, names=(args.name_a, args.name_b))
    print(cmp.table())
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        cmp.write_csv(Path(args.out) / "compare.csv")
        (Path(args.out) / "compare.txt").write_text(cmp.table() + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.manifest:
        rebuild_from_manifest(args.manifest, out, overwrite=args.overwrite)
    else:
        cfg = BenchConfig()
        if args.config:
            cfg = BenchConfig.from_dict(yaml.safe_load(Path(args.config).read_text()) or {})
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.multiplier is not None:
            cfg = replace(cfg, anomaly_multiplier=args.multiplier)
        build_benchmark(cfg, out, overwrite=args.overwrite)
    print(out)
    return EXIT_OK


def _parse_skip_sets(values) -> list[tuple[int, ...]]:
    return [tuple(int(v) for v in s.split(",")) for s in values]


def ablate(base: dict, p_values, skip_sets, dataset_root, out_dir) -> list[dict]:
    """Train and evaluate one model per (p, skip set) cell; failures are recorded per cell."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_index = load_dataset(dataset_root, "train")
    test_index = load_dataset(dataset_root, "test")
    cfg0 = TrainConfig.from_flat({**base, "data.root": str(dataset_root)})
    store = FrameStore(cfg0.height, cfg0.width)
    pcfg = PsnrConfig.from_flat(base)
    rows = []
    for p in p_values:
        for skips in skip_sets:
            name = f"p{p:g}_s{'-'.join(map(str, skips))}"
            row = {"p": p, "skip_set": " ".join(map(str, skips)), "auc": "", "error": ""}
            try:
                cfg = replace(cfg0, synth=SynthConfig(skips, p))
                ckpt = train(cfg, out / name, index=train_index, store=store)
                rep = evaluate_model(load_checkpoint(ckpt).model, test_index, pcfg, store,
                                     base["score.batch_size"])
                rep.write(out / name)
                row["auc"] = rep.auc
            except Exception as exc:  # one failing cell must not stop the sweep
                log.exception("ablation cell %s failed", name)
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            if p == 0:  # skip set is irrelevant without pseudo clips
                break
    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=("p", "skip_set", "auc", "error"))
        w.writeheader()
        w.writerows(rows)
    return rows


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    rows = ablate(cfg, args.p, _parse_skip_sets(args.skip_set), args.data, args.out)
    for r in rows:
        auc = f"{r['auc']:.4f}" if r["auc"] != "" else "FAILED " + r["error"]
        print(f"p={r['p']:<6g} skips={r['skip_set']:<10s} auc={auc}")
    return EXIT_OK


def cmd_model_info(args) -> int:
    info = model_info(args.preset)
    if args.json:
        print(json.dumps(info, indent=2))
        return EXIT_OK
    print(f"preset {info['preset']}  input T,C,H,W = {tuple(info['input_shape'])}")
    for row in info["layers"]:
        print("  " + row)
    print(f"parameters: {info['parameters']:,}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="steal", description="Skip-frame pseudo-anomaly autoencoder for video anomaly detection.")
    p.add_argument("--version", action="version", version=_version())
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model")
    _config_args(t)
    t.add_argument("--data", help="dataset root (sets data.root)")
    t.add_argument("--out", default="runs/train", help="output directory")
    t.add_argument("--resume", help="checkpoint to resume from")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("score", help="write per-frame PSNR/Q/A CSVs")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--split", default="test", choices=("train", "test"))
    s.add_argument("--heatmaps", action="store_true", help="also write squared-error heatmaps")
    s.add_argument("--heatmap-every", type=int, default=1, help="heatmap for every n-th window")
    s.set_defaults(func=cmd_score)

    e = sub.add_parser("eval", help="frame-level ROC AUC")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", help="report directory (default: next to the checkpoint)")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="AUC of two checkpoints side by side")
    c.add_argument("ckpt_a")
    c.add_argument("ckpt_b")
    c.add_argument("--data", required=True)
    c.add_argument("--out")
    c.add_argument("--name-a", default="baseline")
    c.add_argument("--name-b", default="steal")
    c.set_defaults(func=cmd_compare)

    y = sub.add_parser("synth", help="generate the moving-sprite benchmark")
    y.add_argument("--out", required=True)
    y.add_argument("--config", help="YAML mapping of benchmark fields")
    y.add_argument("--manifest", help="regenerate from an existing manifest.json")
    y.add_argument("--seed", type=int)
    y.add_argument("--multiplier", type=int, help="anomaly speed multiplier k")
    y.add_argument("--overwrite", action="store_true")
    y.set_defaults(func=cmd_synth)

    a = sub.add_parser("ablate", help="train/evaluate over a grid of p and skip sets")
    _config_args(a)
    a.add_argument("--data", required=True)
    a.add_argument("--out", default="runs/ablate")
    a.add_argument("--p", type=float, nargs="+", default=[0.0, 0.01])
    a.add_argument("--skip-set", nargs="+", default=["2,3,4,5"], help="comma-separated skip sets")
    a.set_defaults(func=cmd_ablate)

    m = sub.add_parser("model-info", help="layer schedule and parameter count")
    m.add_argument("--preset", default="paper", choices=("paper", "desk"))
    m.add_argument("--json", action="store_true")
    m.set_defaults(func=cmd_model_info)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"steal {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, CheckpointError, FileNotFoundError, FileExistsError, OSError) as exc:
        print(f"steal {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"steal {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"steal {args.command}: invalid value: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
