from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from steal.dataset import VideoMeta, write_labels
from steal.synthbench import BenchConfig, build_benchmark


def write_video(directory: Path, frames: list[np.ndarray], start: int = 1) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        Image.fromarray(np.asarray(f, dtype=np.uint8)).save(directory / f"{i + start:06d}.png")


def gray_frames(count: int, size=(8, 8)) -> list[np.ndarray]:
    """Frame k (1-based) is a uniform image of value 2k, so frames are told apart by value."""
    return [np.full(size, 2 * k, dtype=np.uint8) for k in range(1, count + 1)]


def fake_meta(count: int, video_id: str = "v") -> VideoMeta:
    return VideoMeta(video_id, Path(f"/nonexistent/{video_id}"),
                     tuple(Path(f"{i:06d}.png") for i in range(1, count + 1)))


@pytest.fixture
def make_dataset(tmp_path):
    """Build <root>/<split>/<vid>/ with gray frames; returns the root."""
    def _make(split="train", lengths=(100, 100), labels=None, size=(8, 8)):
        root = tmp_path / "data"
        for i, n in enumerate(lengths):
            vid = f"{i + 1:02d}"
            write_video(root / split / vid, gray_frames(n, size))
            if labels is not None:
                (root / "test_labels").mkdir(parents=True, exist_ok=True)
                write_labels(root / "test_labels" / f"{vid}.txt", labels[i])
        return root
    return _make


TINY_BENCH = BenchConfig(n_train=2, n_test=2, frames=48, anomaly_length=12, seed=5)


@pytest.fixture(scope="session")
def tiny_bench(tmp_path_factory) -> Path:
    return build_benchmark(TINY_BENCH, tmp_path_factory.mktemp("bench"))


@pytest.fixture(autouse=True)
def _torch_threads():
    torch.set_num_threads(1)
    yield


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    def _report(name: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else "")
        print(line)
        _CRITERIA.append(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
