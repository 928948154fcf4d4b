"""Procedural moving-sprite videos with fast-motion anomalies.

Sprites are bright rectangles or discs on a black background that move with a
fixed per-frame displacement and reflect off the walls. A small "actor" sprite
stays on screen; larger sprites enter and leave, so scene density changes over
time. Test videos contain one contiguous interval in which the actor (or every
sprite, with ``anomaly_sprites="all"``) moves ``anomaly_multiplier`` times
faster; those frames are labelled 1. Nothing anomalous is ever written
to the train split.
"""
from __future__ import annotations

import json
import shutil
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import LabelTrack, write_labels

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "steal-synthbench/1"
DIRECTIONS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]


@dataclass(frozen=True)
class BenchConfig:
    height: int = 64
    width: int = 64
    min_sprites: int = 3
    max_sprites: int = 3
    actor_size: tuple[int, int] = (7, 7)  # first sprite: always visible, the one that speeds up
    sprite_size: tuple[int, int] = (11, 13)  # inclusive diameter/side range of the other sprites
    speed: int = 1
    anomaly_multiplier: int = 4
    n_train: int = 10
    n_test: int = 6
    frames: int = 512
    anomaly_length: int = 100
    anomaly_sprites: str = "one"  # one: only the first sprite speeds up | all
    dwell: tuple[int, int] = (40, 160)  # frames between enter/leave events of extra sprites
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sprite_size", tuple(self.sprite_size))
        object.__setattr__(self, "actor_size", tuple(self.actor_size))
        object.__setattr__(self, "dwell", tuple(self.dwell))
        if self.anomaly_sprites not in ("one", "all"):
            raise ValueError("anomaly_sprites must be 'one' or 'all'")
        if not 1 <= self.dwell[0] <= self.dwell[1]:
            raise ValueError("dwell must be an increasing pair of positive frame counts")
        if self.anomaly_multiplier < 2:
            raise ValueError("anomaly_multiplier must be >= 2")
        if not 1 <= self.min_sprites <= self.max_sprites:
            raise ValueError("need 1 <= min_sprites <= max_sprites")
        if self.speed < 1:
            raise ValueError("speed must be >= 1")
        hi = max(self.sprite_size[1], self.actor_size[1])
        fast = self.speed * self.anomaly_multiplier
        free = min(self.height, self.width) - hi
        if free < 2 * fast:
            raise ValueError(f"frame too small for sprites of size {hi} moving {fast} px/frame")
        if not 1 <= self.anomaly_length <= self.frames - 2:
            raise ValueError("anomaly_length must fit inside the video (frame 1 is never anomalous)")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        return cls(**d)


@dataclass
class Sprite:
    shape: str  # rect | disc
    size: int
    intensity: int
    y: int
    x: int
    dy: int
    dx: int


@dataclass
class VideoRecord:
    split: str
    video_id: str
    seed: list[int]
    sprites: list[dict]
    interval: list[int] | None = None  # 1-based inclusive [first, last]
    frames: int = 0


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _bounds(size: int, dim: int) -> tuple[int, int]:
    half = size // 2
    return half, dim - 1 - (size - 1 - half)


def random_sprites(cfg: BenchConfig, rng: np.random.Generator) -> list[Sprite]:
    n = int(rng.integers(cfg.min_sprites, cfg.max_sprites + 1))
    sprites = []
    for j in range(n):
        lo, hi = cfg.actor_size if j == 0 else cfg.sprite_size
        size = int(rng.integers(lo, hi + 1))
        ylo, yhi = _bounds(size, cfg.height)
        xlo, xhi = _bounds(size, cfg.width)
        dy, dx = DIRECTIONS[int(rng.integers(len(DIRECTIONS)))]
        sprites.append(Sprite(
            shape=("rect", "disc")[int(rng.integers(2))],
            size=size,
            intensity=int(rng.integers(160, 256)),
            y=int(rng.integers(ylo, yhi + 1)),
            x=int(rng.integers(xlo, xhi + 1)),
            dy=dy, dx=dx,
        ))
    return sprites


def _advance(pos: int, direction: int, step: int, lo: int, hi: int) -> tuple[int, int]:
    new = pos + direction * step
    if new < lo or new > hi:
        direction = -direction
        new = pos + direction * step
    return new, direction


def trajectory(cfg: BenchConfig, sprites: list[Sprite], frames: int,
               interval: tuple[int, int] | None = None) -> np.ndarray:
    """Sprite centres, shape (frames, n_sprites, 2) as (y, x).

    Frame f (1-based) inside ``interval`` is reached from frame f-1 with the
    fast speed by the anomalous sprites; every other move uses the normal speed.
    """
    n_fast = len(sprites) if cfg.anomaly_sprites == "all" else 1
    pos = np.empty((frames, len(sprites), 2), dtype=np.int64)
    state = [[s.y, s.x, s.dy, s.dx] for s in sprites]
    for j, s in enumerate(sprites):
        pos[0, j] = (s.y, s.x)
    for f in range(1, frames):
        fast = interval is not None and interval[0] <= f + 1 <= interval[1]
        for j, s in enumerate(sprites):
            step = cfg.speed * (cfg.anomaly_multiplier if fast and j < n_fast else 1)
            y, x, dy, dx = state[j]
            ylo, yhi = _bounds(s.size, cfg.height)
            xlo, xhi = _bounds(s.size, cfg.width)
            if dy:
                y, dy = _advance(y, dy, step, ylo, yhi)
            if dx:
                x, dx = _advance(x, dx, step, xlo, xhi)
            state[j] = [y, x, dy, dx]
            pos[f, j] = (y, x)
    return pos


def visibility(cfg: BenchConfig, n_sprites: int, frames: int, rng: np.random.Generator) -> list[list[list[int]]]:
    """Visible spans per sprite as 1-based inclusive [first, last] pairs.

    The first sprite is always on screen; the others enter and leave after
    dwell times drawn uniformly from ``cfg.dwell``.
    """
    spans = [[[1, frames]]]
    for _ in range(1, n_sprites):
        mine = []
        on = bool(rng.integers(2))
        f = 1
        while f <= frames:
            length = int(rng.integers(cfg.dwell[0], cfg.dwell[1] + 1))
            last = min(frames, f + length - 1)
            if on:
                mine.append([f, last])
            on = not on
            f = last + 1
        spans.append(mine)
    return spans


def visibility_mask(spans, frames: int) -> np.ndarray:
    mask = np.zeros((frames, len(spans)), dtype=bool)
    for j, sp in enumerate(spans):
        for a, b in sp:
            mask[a - 1:b, j] = True
    return mask


def render(cfg: BenchConfig, sprites: list[Sprite], centres: np.ndarray, visible=None) -> np.ndarray:
    """uint8 frame with every visible sprite drawn at its centre."""
    img = np.zeros((cfg.height, cfg.width), dtype=np.uint8)
    yy, xx = np.mgrid[:cfg.height, :cfg.width]
    for j, (s, (cy, cx)) in enumerate(zip(sprites, centres)):
        if visible is not None and not visible[j]:
            continue
        half = s.size // 2
        if s.shape == "rect":
            y0, x0 = cy - half, cx - half
            mask = (yy >= y0) & (yy < y0 + s.size) & (xx >= x0) & (xx < x0 + s.size)
        else:
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= (s.size / 2.0) ** 2
        img[mask] = np.maximum(img[mask], s.intensity)
    return img


def _write_frames(out_dir: Path, cfg: BenchConfig, sprites, pos, visible) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for f in range(len(pos)):
        Image.fromarray(render(cfg, sprites, pos[f], visible[f])).save(out_dir / f"{f + 1:06d}.png")


def _sprite_records(sprites, spans) -> list[dict]:
    return [{**asdict(s), "visible": sp} for s, sp in zip(sprites, spans)]


def gen_normal_video(cfg: BenchConfig, seed, out_dir: str | Path) -> VideoRecord:
    seed = list(np.atleast_1d(seed).tolist())
    rng = _rng(seed)
    sprites = random_sprites(cfg, rng)
    spans = visibility(cfg, len(sprites), cfg.frames, rng)
    pos = trajectory(cfg, sprites, cfg.frames)
    out = Path(out_dir)
    _write_frames(out, cfg, sprites, pos, visibility_mask(spans, cfg.frames))
    return VideoRecord("train", out.name, seed, _sprite_records(sprites, spans), None, cfg.frames)


def gen_anomalous_video(cfg: BenchConfig, seed, out_dir: str | Path,
                        interval: tuple[int, int] | None = None) -> tuple[VideoRecord, LabelTrack]:
    seed = list(np.atleast_1d(seed).tolist())
    rng = _rng(seed)
    sprites = random_sprites(cfg, rng)
    spans = visibility(cfg, len(sprites), cfg.frames, rng)
    if interval is None:
        margin = cfg.frames // 8
        first_lo = max(2, margin)
        first_hi = max(first_lo, cfg.frames - cfg.anomaly_length - margin)
        first = int(rng.integers(first_lo, first_hi + 1))
        interval = (first, first + cfg.anomaly_length - 1)
    a, b = interval
    if not 2 <= a <= b <= cfg.frames:
        raise ValueError(f"anomaly interval {interval} exceeds video of {cfg.frames} frames")
    pos = trajectory(cfg, sprites, cfg.frames, interval)
    out = Path(out_dir)
    _write_frames(out, cfg, sprites, pos, visibility_mask(spans, cfg.frames))
    labels = np.zeros(cfg.frames, dtype=np.int8)
    labels[a - 1:b] = 1
    rec = VideoRecord("test", out.name, seed, _sprite_records(sprites, spans), [a, b], cfg.frames)
    return rec, LabelTrack(out.name, labels)


def build_benchmark(cfg: BenchConfig, root: str | Path, overwrite: bool = False) -> Path:
    """Write train/test splits, test labels and ``manifest.json`` under ``root``."""
    root = Path(root)
    if root.exists() and any(root.iterdir()):
        if not overwrite:
            raise FileExistsError(f"{root} is not empty")
        for sub in ("train", "test", "test_labels"):
            shutil.rmtree(root / sub, ignore_errors=True)
    (root / "test_labels").mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(cfg.n_train):
        records.append(gen_normal_video(cfg, [cfg.seed, 0, i], root / "train" / f"{i + 1:02d}"))
    for i in range(cfg.n_test):
        rec, track = gen_anomalous_video(cfg, [cfg.seed, 1, i], root / "test" / f"{i + 1:02d}")
        write_labels(root / "test_labels" / f"{rec.video_id}.txt", track.labels)
        records.append(rec)
    manifest = {
        "format": MANIFEST_FORMAT,
        "config": asdict(cfg),
        "videos": [asdict(r) for r in records],
    }
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))
    return root


def read_manifest(root_or_file: str | Path) -> dict:
    p = Path(root_or_file)
    if p.is_dir():
        p = p / MANIFEST_NAME
    manifest = json.loads(p.read_text())
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"{p}: not a {MANIFEST_FORMAT} manifest")
    return manifest


def rebuild_from_manifest(manifest_path: str | Path, root: str | Path, overwrite: bool = False) -> Path:
    """Regenerate a benchmark and check it reproduces the manifest's records."""
    manifest = read_manifest(manifest_path)
    cfg = BenchConfig.from_dict(manifest["config"])
    out = build_benchmark(cfg, root, overwrite=overwrite)
    if read_manifest(out)["videos"] != manifest["videos"]:
        raise RuntimeError("regenerated benchmark does not match the manifest records")
    return out
