"""Training objective and loop.

Normal clips minimise the mean squared reconstruction error; pseudo clips
carry the same error with a negative sign, so the optimizer pushes their
reconstructions away from the input.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import DEFAULTS, dump_config
from .dataset import Clip, DatasetIndex, FrameStore, load_dataset, sample_normal_clip, sample_start_index
from .model import Autoencoder, init_params
from .synthesizer import SynthConfig, SynthStats, select_input

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "steal-ckpt/1"
JOURNAL_FIELDS = ("step", "loss", "normal", "pseudo", "wall_time")


class NumericError(RuntimeError):
    """Non-finite loss during training."""


class CheckpointError(ValueError):
    pass


@dataclass
class TrainConfig:
    data_root: str = ""
    preset: str = "desk"
    clip_length: int = 8
    height: int = 64
    width: int = 64
    learning_rate: float = 1e-4
    batch_size: int = 4
    steps: int = 2000
    epochs: int = 0
    seed: int = 0
    synth: SynthConfig | None = field(default_factory=SynthConfig)
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    pseudo_margin: float | None = None
    checkpoint_every: int = 0
    log_every: int = 100

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @classmethod
    def from_flat(cls, cfg: dict) -> "TrainConfig":
        synth = None
        if cfg["synth.enabled"]:
            synth = SynthConfig(tuple(cfg["synth.skip_set"]), cfg["synth.p"])
        return cls(
            data_root=cfg["data.root"],
            preset=cfg["model.preset"],
            clip_length=cfg["model.clip_length"],
            height=cfg["data.height"],
            width=cfg["data.width"],
            learning_rate=cfg["train.learning_rate"],
            batch_size=cfg["train.batch_size"],
            steps=cfg["train.steps"],
            epochs=cfg["train.epochs"],
            seed=cfg["train.seed"],
            synth=synth,
            betas=tuple(cfg["train.betas"]),
            adam_eps=cfg["train.adam_eps"],
            pseudo_margin=cfg["train.pseudo_margin"],
            checkpoint_every=cfg["train.checkpoint_every"],
            log_every=cfg["train.log_every"],
        )

    def to_flat(self, base: dict | None = None) -> dict:
        cfg = dict(base or DEFAULTS)
        cfg.update({
            "data.root": str(self.data_root),
            "model.preset": self.preset,
            "model.clip_length": self.clip_length,
            "data.height": self.height,
            "data.width": self.width,
            "train.learning_rate": self.learning_rate,
            "train.batch_size": self.batch_size,
            "train.steps": self.steps,
            "train.epochs": self.epochs,
            "train.seed": self.seed,
            "synth.enabled": self.synth is not None,
            "train.betas": list(self.betas),
            "train.adam_eps": self.adam_eps,
            "train.pseudo_margin": self.pseudo_margin,
            "train.checkpoint_every": self.checkpoint_every,
            "train.log_every": self.log_every,
        })
        if self.synth is not None:
            cfg["synth.p"] = self.synth.p
            cfg["synth.skip_set"] = list(self.synth.skip_set)
        return cfg


@dataclass(frozen=True)
class LossValue:
    value: float
    kind: str  # normal | pseudo | batch


@dataclass
class StepResult:
    loss: float
    normal: int
    pseudo: int


def _check_shapes(x, xhat):
    if tuple(x.shape) != tuple(xhat.shape):
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(xhat.shape)}")


def _data(x):
    return x.data if isinstance(x, Clip) else x


def loss_normal(x, xhat):
    """Mean squared error over every T x C x H x W element."""
    x, xhat = _data(x), _data(xhat)
    _check_shapes(x, xhat)
    return ((xhat - x) ** 2).mean()


def loss_pseudo(x, xhat):
    x, xhat = _data(x), _data(xhat)
    return -loss_normal(x, xhat)


def compute_loss(x: Clip, xhat) -> LossValue:
    if x.is_pseudo:
        return LossValue(float(loss_pseudo(x, xhat)), "pseudo")
    return LossValue(float(loss_normal(x, xhat)), "normal")


def clip_losses(x: torch.Tensor, xhat: torch.Tensor, is_pseudo: torch.Tensor,
                margin: float | None = None) -> torch.Tensor:
    """Per-clip signed losses for a (B, T, C, H, W) batch."""
    _check_shapes(x, xhat)
    mse = ((xhat - x) ** 2).flatten(1).mean(dim=1)
    neg = -mse
    if margin is not None:
        neg = torch.clamp(neg, min=-margin)
    return torch.where(is_pseudo, neg, mse)


def batch_loss(x, xhat, is_pseudo, margin: float | None = None) -> torch.Tensor:
    return clip_losses(x, xhat, is_pseudo, margin).mean()


def stack_batch(clips: list[Clip], dtype=torch.float32):
    x = torch.from_numpy(np.stack([c.data for c in clips])).to(dtype)
    flags = torch.tensor([c.is_pseudo for c in clips], dtype=torch.bool)
    return x, flags


def train_step(model: Autoencoder, optimizer: torch.optim.Optimizer, clips: list[Clip], *,
               margin: float | None = None, step: int | None = None) -> StepResult:
    """One Adam step on the batch-mean signed loss; updates parameters in place."""
    model.train()
    dtype = next(model.parameters()).dtype
    x, flags = stack_batch(clips, dtype)
    loss = batch_loss(x, model(x), flags, margin)
    if not torch.isfinite(loss):
        prov = ", ".join(f"{c.spec.video_id}@{c.spec.start}/s{c.spec.stride}" for c in clips)
        raise NumericError(f"non-finite loss {loss.item()} at step {step}; clips: {prov}")
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    optimizer.step()
    n_pseudo = int(flags.sum())
    return StepResult(float(loss.detach()), len(clips) - n_pseudo, n_pseudo)


def steps_per_epoch(total_frames: int, clip_length: int, batch_size: int) -> int:
    return max(1, total_frames // (clip_length * batch_size))


def make_optimizer(model: Autoencoder, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                            betas=tuple(cfg.betas), eps=cfg.adam_eps)


class ClipSampler:
    """Draws training batches: video by frame-count weight, then the clip."""

    def __init__(self, index: DatasetIndex, store: FrameStore, cfg: TrainConfig):
        self.videos = index.videos
        self.store = store
        self.cfg = cfg
        counts = np.array([v.frame_count for v in self.videos], dtype=np.float64)
        self.weights = counts / counts.sum()
        self.rng = np.random.default_rng([cfg.seed, 0])
        self.synth_rng = np.random.default_rng([cfg.seed, 1])
        self.stats = SynthStats()

    def sample(self) -> Clip:
        meta = self.videos[self.rng.choice(len(self.videos), p=self.weights)]
        T = self.cfg.clip_length
        if self.cfg.synth is None:
            return sample_normal_clip(self.store, meta, sample_start_index(meta, T, 1, self.rng), T)
        return select_input(self.store, meta, self.cfg.synth, T, self.rng,
                            synth_rng=self.synth_rng, stats=self.stats)

    def batch(self) -> list[Clip]:
        return [self.sample() for _ in range(self.cfg.batch_size)]

    def state(self) -> dict:
        return {"sample": self.rng.bit_generator.state, "synth": self.synth_rng.bit_generator.state}

    def load_state(self, st: dict) -> None:
        self.rng.bit_generator.state = st["sample"]
        self.synth_rng.bit_generator.state = st["synth"]


def save_checkpoint(path: Path, model: Autoencoder, optimizer, step: int, cfg: TrainConfig,
                    sampler: ClipSampler | None = None) -> Path:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "preset": model.preset.name,
        "schedule": model.schedule(),
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "step": step,
        "config": cfg.to_flat(),
        "rng": {
            "torch": torch.get_rng_state(),
            **(sampler.state() if sampler is not None else {}),
        },
        "synth_stats": vars(sampler.stats) if sampler is not None else None,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    return path


@dataclass
class Checkpoint:
    model: Autoencoder
    config: dict
    step: int
    payload: dict


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
    model = Autoencoder.from_schedule(payload["schedule"])
    model.load_state_dict(payload["model_state"])
    model.eval()
    return Checkpoint(model, payload["config"], payload["step"], payload)


def _open_journal(path: Path, append: bool):
    fh = open(path, "a" if append else "w", newline="")
    w = csv.writer(fh)
    if not append:
        w.writerow(JOURNAL_FIELDS)
    return fh, w


def read_journal(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def train(cfg: TrainConfig, out_dir: str | Path, *, index: DatasetIndex | None = None,
          resume: str | Path | None = None, store: FrameStore | None = None) -> Path:
    """Train a model and return the final checkpoint path.

    Writes ``config.yaml``, ``journal.csv`` (one row per step),
    ``provenance.csv`` (one row per clip) and checkpoints under ``out_dir``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg.to_flat(), out / "config.yaml")

    index = index or load_dataset(cfg.data_root, "train")
    store = store or FrameStore(cfg.height, cfg.width)
    total_steps = cfg.steps
    if cfg.epochs:
        total_steps = cfg.epochs * steps_per_epoch(index.total_frames, cfg.clip_length, cfg.batch_size)

    model = init_params(cfg.preset, cfg.seed, clip_length=cfg.clip_length, size=(cfg.height, cfg.width))
    optimizer = make_optimizer(model, cfg)
    sampler = ClipSampler(index, store, cfg)
    start = 0
    if resume is not None:
        ck = load_checkpoint(resume)
        model.load_state_dict(ck.model.state_dict())
        optimizer.load_state_dict(ck.payload["optimizer_state"])
        sampler.load_state(ck.payload["rng"])
        sampler.stats = SynthStats(**ck.payload["synth_stats"])
        torch.set_rng_state(ck.payload["rng"]["torch"])
        start = ck.step
        log.info("resumed from %s at step %d", resume, start)

    journal_fh, journal = _open_journal(out / "journal.csv", append=resume is not None)
    prov_path = out / "provenance.csv"
    prov_fh = open(prov_path, "a" if resume is not None else "w", newline="")
    prov = csv.writer(prov_fh)
    if resume is None:
        prov.writerow(("step", "slot", "video_id", "start", "stride", "pseudo"))

    t0 = time.perf_counter()
    try:
        for step in range(start + 1, total_steps + 1):
            clips = sampler.batch()
            res = train_step(model, optimizer, clips, margin=cfg.pseudo_margin, step=step)
            journal.writerow((step, repr(res.loss), res.normal, res.pseudo,
                              f"{time.perf_counter() - t0:.3f}"))
            for slot, c in enumerate(clips):
                prov.writerow((step, slot, c.spec.video_id, c.spec.start, c.spec.stride, int(c.is_pseudo)))
            if cfg.log_every and step % cfg.log_every == 0:
                log.info("step %d loss %.6f pseudo so far %d", step, res.loss, sampler.stats.pseudo)
            if cfg.checkpoint_every and step % cfg.checkpoint_every == 0 and step != total_steps:
                save_checkpoint(out / f"ckpt_{step:07d}.pt", model, optimizer, step, cfg, sampler)
    finally:
        journal_fh.close()
        prov_fh.close()

    if sampler.stats.fallbacks:
        log.warning("%d pseudo draws fell back to normal clips (videos too short)", sampler.stats.fallbacks)
    return save_checkpoint(out / "final.pt", model, optimizer, total_steps, cfg, sampler)
