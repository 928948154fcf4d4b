"""Frame-level ROC/AUC over a concatenated test set."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DatasetIndex, FrameStore, load_dataset
from .scoring import PsnrConfig, ScoreSeries, score_video
from .training import load_checkpoint


@dataclass
class EvalReport:
    auc: float
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    per_video: dict[str, float | None] = field(default_factory=dict)
    series: dict[str, ScoreSeries] = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        return {
            "auc": self.auc,
            "roc": {"fpr": self.fpr.tolist(), "tpr": self.tpr.tolist(),
                    "thresholds": self.thresholds.tolist()},
            "per_video_auc": self.per_video,
        }

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_json(), indent=2))
        with open(out / "roc.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("threshold", "fpr", "tpr"))
            for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
                w.writerow((repr(float(t)), repr(float(f)), repr(float(p))))


def roc_auc(scores, labels) -> EvalReport:
    """Threshold sweep over distinct scores; tied scores move along a diagonal."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: labels contain a single class")

    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last_of_group = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tp = np.cumsum(y)[last_of_group]
    fp = (last_of_group + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s[last_of_group]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return EvalReport(auc, fpr, tpr, thresholds)


def pairwise_auc(scores, labels) -> float:
    """O(n_pos * n_neg) reference: P(pos > neg) + P(tie) / 2."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    pos, neg = s[y], s[~y]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def report_from_series(series: list[ScoreSeries], index: DatasetIndex) -> EvalReport:
    scores, labels = [], []
    per_video: dict[str, float | None] = {}
    for ser in series:
        lab = index.labels[ser.video_id].labels
        scores.append(ser.anomaly)
        labels.append(lab)
        per_video[ser.video_id] = roc_auc(ser.anomaly, lab).auc if 0 < lab.sum() < len(lab) else None
    rep = roc_auc(np.concatenate(scores), np.concatenate(labels))
    rep.per_video = per_video
    rep.series = {s.video_id: s for s in series}
    return rep


def evaluate_model(model, index: DatasetIndex, cfg: PsnrConfig, store: FrameStore | None = None,
                   batch_size: int = 16) -> EvalReport:
    if not index.labels:
        raise ValueError("evaluation needs a labelled test split")
    T, _, H, W = model.input_shape
    store = store or FrameStore(H, W)
    series = [score_video(model, store, meta, cfg, batch_size) for meta in index.videos]
    return report_from_series(series, index)


def evaluate(ckpt: str | Path, dataset_root: str | Path, store: FrameStore | None = None) -> EvalReport:
    ck = load_checkpoint(ckpt)
    index = load_dataset(dataset_root, "test")
    return evaluate_model(ck.model, index, PsnrConfig.from_flat(ck.config), store,
                          ck.config.get("score.batch_size", 16))


@dataclass
class Comparison:
    names: tuple[str, str]
    auc_a: float
    auc_b: float
    per_video: dict[str, tuple[float | None, float | None]]

    @property
    def delta(self) -> float:
        return self.auc_b - self.auc_a

    def table(self) -> str:
        a, b = self.names
        lines = [f"{'':14s} {a[:12]:>12s} {b[:12]:>12s} {'delta':>9s}",
                 f"{'frame AUC':14s} {self.auc_a:12.4f} {self.auc_b:12.4f} {self.delta:+9.4f}"]
        for vid, (va, vb) in self.per_video.items():
            fa = f"{va:12.4f}" if va is not None else f"{'-':>12s}"
            fb = f"{vb:12.4f}" if vb is not None else f"{'-':>12s}"
            lines.append(f"{vid[:14]:14s} {fa} {fb}")
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("scope", self.names[0], self.names[1], "delta"))
            w.writerow(("overall", self.auc_a, self.auc_b, self.delta))
            for vid, (va, vb) in self.per_video.items():
                d = vb - va if va is not None and vb is not None else ""
                w.writerow((vid, "" if va is None else va, "" if vb is None else vb, d))


def compare(ckpt_a: str | Path, ckpt_b: str | Path, dataset_root: str | Path,
            names: tuple[str, str] = ("A", "B")) -> Comparison:
    ra = evaluate(ckpt_a, dataset_root)
    rb = evaluate(ckpt_b, dataset_root)
    per_video = {vid: (ra.per_video[vid], rb.per_video.get(vid)) for vid in ra.per_video}
    return Comparison(names, ra.auc, rb.auc, per_video)
