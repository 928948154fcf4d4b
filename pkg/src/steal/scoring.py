"""Per-frame anomaly scores from reconstruction PSNR."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .dataset import FrameStore, VideoMeta
from .model import Autoencoder


@dataclass(frozen=True)
class PsnrConfig:
    peak: float = 1.0
    eps: float = 1e-10
    target_offset: int = 8  # 0-based position of the scored frame inside a window

    def __post_init__(self):
        if self.peak <= 0 or self.eps <= 0:
            raise ValueError("peak and eps must be positive")
        if self.target_offset < 0:
            raise ValueError("target_offset must be non-negative")

    @classmethod
    def from_flat(cls, cfg: dict) -> "PsnrConfig":
        return cls(cfg["score.peak"], cfg["score.eps"], cfg["score.target_offset"])


@dataclass
class ScoreSeries:
    video_id: str
    psnr: np.ndarray
    quality: np.ndarray
    anomaly: np.ndarray
    direct: np.ndarray  # bool: frame was the scored frame of some window

    def __len__(self) -> int:
        return len(self.psnr)


def _pixels(frame):
    return np.asarray(getattr(frame, "pixels", frame), dtype=np.float64)


def _to_unit(x):
    return (x + 1.0) / 2.0


def psnr(frame, recon, cfg: PsnrConfig = PsnrConfig()) -> float:
    """PSNR in dB after mapping both frames from [-1, 1] to [0, 1]."""
    a, b = _pixels(frame), _pixels(recon)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = np.mean((_to_unit(b) - _to_unit(a)) ** 2)
    return float(10.0 * np.log10(cfg.peak ** 2 / (mse + cfg.eps)))


def psnr_batch(frames: np.ndarray, recons: np.ndarray, cfg: PsnrConfig = PsnrConfig()) -> np.ndarray:
    """PSNR of each leading-axis item."""
    a = _to_unit(np.asarray(frames, dtype=np.float64))
    b = _to_unit(np.asarray(recons, dtype=np.float64))
    mse = ((b - a) ** 2).reshape(len(a), -1).mean(axis=1)
    return 10.0 * np.log10(cfg.peak ** 2 / (mse + cfg.eps))


def minmax_normalize(values) -> np.ndarray:
    """Rescale to [0, 1]; a constant series maps to 0.5."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot normalize an empty series")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full_like(v, 0.5)
    return (v - lo) / (hi - lo)


def anomaly_scores(quality) -> np.ndarray:
    q = np.asarray(quality, dtype=np.float64)
    if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
        raise ValueError("quality values must lie in [0, 1]")
    return 1.0 - q


def series_from_psnr(video_id: str, psnr_values, direct) -> ScoreSeries:
    p = np.asarray(psnr_values, dtype=np.float64)
    q = minmax_normalize(p)
    return ScoreSeries(video_id, p, q, anomaly_scores(q), np.asarray(direct, dtype=bool))


def fill_boundaries(direct_psnr: np.ndarray, frame_count: int, offset: int):
    """Place window scores at their frames; uncovered frames copy the nearest scored one."""
    full = np.empty(frame_count, dtype=np.float64)
    direct = np.zeros(frame_count, dtype=bool)
    last = offset + len(direct_psnr)
    full[offset:last] = direct_psnr
    full[:offset] = direct_psnr[0]
    full[last:] = direct_psnr[-1]
    direct[offset:last] = True
    return full, direct


@torch.no_grad()
def window_psnrs(model: Autoencoder, frames: np.ndarray, cfg: PsnrConfig, batch_size: int = 16) -> np.ndarray:
    """PSNR of the target frame of every stride-1 window over ``frames`` (K x H x W)."""
    model.eval()
    T = model.input_shape[0]
    if cfg.target_offset >= T:
        raise ValueError(f"target_offset {cfg.target_offset} must be < clip length {T}")
    dtype = next(model.parameters()).dtype
    n_windows = len(frames) - T + 1
    out = np.empty(n_windows, dtype=np.float64)
    k = cfg.target_offset
    for lo in range(0, n_windows, batch_size):
        hi = min(n_windows, lo + batch_size)
        batch = np.stack([frames[i:i + T] for i in range(lo, hi)])[:, :, None]
        recon = model(torch.from_numpy(batch).to(dtype)).numpy()
        out[lo:hi] = psnr_batch(batch[:, k], recon[:, k], cfg)
    return out


def score_video(model: Autoencoder, store: FrameStore, meta: VideoMeta, cfg: PsnrConfig,
                batch_size: int = 16) -> ScoreSeries:
    T = model.input_shape[0]
    if meta.frame_count < T:
        raise ValueError(f"{meta.video_id}: video has {meta.frame_count} frames, shorter than T={T}")
    direct_psnr = window_psnrs(model, store.frames(meta), cfg, batch_size)
    full, direct = fill_boundaries(direct_psnr, meta.frame_count, cfg.target_offset)
    return series_from_psnr(meta.video_id, full, direct)


def error_heatmap(frame, recon) -> np.ndarray:
    a, b = _pixels(frame), _pixels(recon)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return minmax_normalize((b - a) ** 2)


def write_series_csv(series: ScoreSeries, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("frame", "psnr", "Q", "A", "direct_flag"))
        for i in range(len(series)):
            w.writerow((i + 1, repr(float(series.psnr[i])), repr(float(series.quality[i])),
                        repr(float(series.anomaly[i])), int(series.direct[i])))


def read_series_csv(path: str | Path, video_id: str | None = None) -> ScoreSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return ScoreSeries(
        video_id or Path(path).stem,
        np.array([float(r["psnr"]) for r in rows]),
        np.array([float(r["Q"]) for r in rows]),
        np.array([float(r["A"]) for r in rows]),
        np.array([r["direct_flag"] == "1" for r in rows]),
    )


@torch.no_grad()
def write_heatmaps(model: Autoencoder, store: FrameStore, meta: VideoMeta, cfg: PsnrConfig,
                   out_dir: str | Path, every: int = 1) -> int:
    """Save one heatmap PNG per scored frame (every ``every``-th window)."""
    model.eval()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames = store.frames(meta)
    T, k = model.input_shape[0], cfg.target_offset
    dtype = next(model.parameters()).dtype
    written = 0
    for start in range(0, len(frames) - T + 1, every):
        clip = torch.from_numpy(np.array(frames[start:start + T][:, None])).to(dtype)
        recon = model(clip).numpy()[k, 0]
        hm = error_heatmap(frames[start + k], recon)
        Image.fromarray(np.round(hm * 255).astype(np.uint8)).save(out / f"{start + k + 1:06d}.png")
        written += 1
    return written
