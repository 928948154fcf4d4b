"""Frame-folder video datasets and stride-1 clip sampling.

Layout on disk::

    <root>/<split>/<video_id>/000001.png ...
    <root>/test_labels/<video_id>.txt      # one 0/1 per frame

All public indices are 1-based, matching frame file numbering.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
INTERPOLATION = "bilinear"


class DatasetError(ValueError):
    """Malformed or missing dataset content."""


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    frame_dir: Path
    frame_files: tuple[Path, ...]

    @property
    def frame_count(self) -> int:
        return len(self.frame_files)


@dataclass(frozen=True)
class LabelTrack:
    video_id: str
    labels: np.ndarray  # int8, 1 = anomalous

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Frame:
    pixels: np.ndarray  # H x W float32 in [-1, 1]
    index: int


@dataclass(frozen=True)
class ClipSpec:
    video_id: str
    start: int
    stride: int
    length: int

    @property
    def indices(self) -> list[int]:
        return [self.start + t * self.stride for t in range(self.length)]

    @property
    def last(self) -> int:
        return self.start + (self.length - 1) * self.stride


@dataclass(frozen=True)
class Clip:
    data: np.ndarray  # T x C x H x W
    spec: ClipSpec

    @property
    def is_pseudo(self) -> bool:
        return self.spec.stride > 1


@dataclass
class DatasetIndex:
    root: Path
    split: str
    videos: list[VideoMeta]
    labels: dict[str, LabelTrack] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.videos)

    def __iter__(self):
        return iter(self.videos)

    def get(self, video_id: str) -> VideoMeta:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)

    @property
    def total_frames(self) -> int:
        return sum(v.frame_count for v in self.videos)


def _frame_number(path: Path) -> int:
    try:
        return int(path.stem)
    except ValueError as exc:
        raise DatasetError(f"{path.parent.name}: frame file {path.name!r} is not numbered") from exc


def scan_video(video_dir: Path) -> VideoMeta:
    files = [p for p in video_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES]
    if not files:
        raise DatasetError(f"{video_dir.name}: empty video (no frame images)")
    files.sort(key=_frame_number)
    numbers = [_frame_number(p) for p in files]
    expected = list(range(numbers[0], numbers[0] + len(numbers)))
    if numbers != expected:
        raise DatasetError(f"{video_dir.name}: frame numbers are not contiguous")
    return VideoMeta(video_dir.name, video_dir, tuple(files))


def read_labels(path: Path, video_id: str) -> LabelTrack:
    if not path.is_file():
        raise DatasetError(f"{video_id}: missing labels file {path}")
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if any(ln not in ("0", "1") for ln in lines):
        raise DatasetError(f"{video_id}: labels must be 0/1 per line")
    return LabelTrack(video_id, np.array([int(ln) for ln in lines], dtype=np.int8))


def write_labels(path: Path, labels) -> None:
    path.write_text("".join(f"{int(v)}\n" for v in labels))


def load_dataset(root: str | Path, split: str) -> DatasetIndex:
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    root = Path(root)
    split_dir = root / split
    if not split_dir.is_dir():
        raise DatasetError(f"missing directory {split_dir}")
    video_dirs = sorted(p for p in split_dir.iterdir() if p.is_dir())
    if not video_dirs:
        raise DatasetError(f"no videos found in {split_dir}")
    videos = [scan_video(d) for d in video_dirs]

    labels: dict[str, LabelTrack] = {}
    if split == "test":
        for v in videos:
            track = read_labels(root / "test_labels" / f"{v.video_id}.txt", v.video_id)
            if len(track) != v.frame_count:
                raise DatasetError(
                    f"{v.video_id}: label length mismatch "
                    f"({len(track)} labels for {v.frame_count} frames)"
                )
            labels[v.video_id] = track
    log.debug("loaded %d %s videos from %s", len(videos), split, root)
    return DatasetIndex(root, split, videos, labels)


def decode_frame(meta: VideoMeta, idx: int, height: int, width: int) -> Frame:
    if not 1 <= idx <= meta.frame_count:
        raise IndexError(f"{meta.video_id}: frame {idx} outside [1, {meta.frame_count}]")
    path = meta.frame_files[idx - 1]
    try:
        with Image.open(path) as im:
            im = im.convert("L")
            if im.size != (width, height):
                im = im.resize((width, height), Image.Resampling.BILINEAR)
            arr = np.asarray(im, dtype=np.float32)
    except OSError as exc:
        raise DatasetError(f"{meta.video_id}: unreadable frame {path.name}: {exc}") from exc
    return Frame(arr / np.float32(127.5) - np.float32(1.0), idx)


class FrameStore:
    """Decoded-frame cache; each video is decoded once into a K x H x W array."""

    def __init__(self, height: int, width: int):
        self.height = height
        self.width = width
        self._cache: dict[Path, np.ndarray] = {}

    def frames(self, meta: VideoMeta) -> np.ndarray:
        arr = self._cache.get(meta.frame_dir)
        if arr is None:
            arr = np.stack([
                decode_frame(meta, i, self.height, self.width).pixels
                for i in range(1, meta.frame_count + 1)
            ])
            arr.flags.writeable = False
            self._cache[meta.frame_dir] = arr
        return arr

    def clip(self, meta: VideoMeta, start: int, stride: int, length: int) -> Clip:
        spec = ClipSpec(meta.video_id, start, stride, length)
        check_clip_bounds(meta, spec)
        frames = self.frames(meta)
        idx = np.asarray(spec.indices) - 1
        return Clip(frames[idx][:, None, :, :].copy(), spec)


def check_clip_bounds(meta: VideoMeta, spec: ClipSpec) -> None:
    if spec.stride < 1 or spec.length < 1:
        raise ValueError(f"invalid clip stride/length: {spec}")
    if spec.start < 1 or spec.last > meta.frame_count:
        raise IndexError(
            f"{meta.video_id}: clip frames {spec.start}..{spec.last} "
            f"exceed video length {meta.frame_count}"
        )


def sample_normal_clip(store: FrameStore, meta: VideoMeta, n: int, T: int) -> Clip:
    """Consecutive frames I_n .. I_{n+T-1}."""
    return store.clip(meta, n, 1, T)


def sample_start_index(meta: VideoMeta, T: int, s: int, rng: np.random.Generator) -> int:
    """Uniform start n with n + (T-1)*s <= K."""
    need = (T - 1) * s + 1
    if meta.frame_count < need:
        raise DatasetError(
            f"{meta.video_id}: video too short for T={T}, s={s} "
            f"(needs {need} frames, has {meta.frame_count})"
        )
    return int(rng.integers(1, meta.frame_count - (T - 1) * s + 1))
