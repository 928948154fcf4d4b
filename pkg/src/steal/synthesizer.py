"""Skip-frame pseudo anomalies and the normal/pseudo input selection."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import Clip, FrameStore, VideoMeta, sample_normal_clip, sample_start_index

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    skip_set: tuple[int, ...] = (2, 3, 4, 5)
    p: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "skip_set", tuple(sorted(set(int(s) for s in self.skip_set))))
        if any(s <= 1 for s in self.skip_set):
            raise ValueError(f"skip values must be > 1, got {self.skip_set}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"pseudo probability must lie in [0, 1], got {self.p}")


@dataclass
class SynthStats:
    normal: int = 0
    pseudo: int = 0
    fallbacks: int = 0  # pseudo branch taken but no skip value fit the video
    skips: dict[int, int] = field(default_factory=dict)


def draw_skip(cfg: SynthConfig, rng: np.random.Generator, feasible=None) -> int:
    choices = cfg.skip_set if feasible is None else tuple(feasible)
    if not choices:
        raise ValueError("skip set is empty")
    return int(choices[rng.integers(len(choices))])


def feasible_skips(meta: VideoMeta, cfg: SynthConfig, T: int) -> tuple[int, ...]:
    return tuple(s for s in cfg.skip_set if (T - 1) * s + 1 <= meta.frame_count)


def sample_pseudo_clip(store: FrameStore, meta: VideoMeta, n: int, s: int, T: int) -> Clip:
    """Frames I_n, I_{n+s}, ..., I_{n+(T-1)s}; s must exceed 1."""
    if s <= 1:
        raise ValueError(f"pseudo clip requires s>1, got s={s}")
    return store.clip(meta, n, s, T)


def select_input(
    store: FrameStore,
    meta: VideoMeta,
    cfg: SynthConfig,
    T: int,
    rng: np.random.Generator,
    *,
    synth_rng: np.random.Generator | None = None,
    stats: SynthStats | None = None,
) -> Clip:
    """Return a pseudo clip with probability ``cfg.p``, else a normal clip.

    The branch and skip draws come from ``synth_rng`` (defaults to ``rng``);
    the start index always comes from ``rng``. Keeping them on separate streams
    makes a p=0 run consume ``rng`` exactly like a run without the synthesizer.
    """
    srng = rng if synth_rng is None else synth_rng
    if srng.random() < cfg.p:
        ok = feasible_skips(meta, cfg, T)
        if ok:
            s = draw_skip(cfg, srng, ok)
            n = sample_start_index(meta, T, s, rng)
            if stats is not None:
                stats.pseudo += 1
                stats.skips[s] = stats.skips.get(s, 0) + 1
            return sample_pseudo_clip(store, meta, n, s, T)
        log.debug("%s: no feasible skip for T=%d, falling back to normal clip", meta.video_id, T)
        if stats is not None:
            stats.fallbacks += 1
    n = sample_start_index(meta, T, 1, rng)
    if stats is not None:
        stats.normal += 1
    return sample_normal_clip(store, meta, n, T)
