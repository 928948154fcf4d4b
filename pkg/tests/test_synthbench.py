import filecmp
import json
from dataclasses import replace

import numpy as np
import pytest

from steal.dataset import FrameStore, load_dataset
from steal.synthbench import (
    BenchConfig,
    build_benchmark,
    gen_anomalous_video,
    gen_normal_video,
    random_sprites,
    read_manifest,
    rebuild_from_manifest,
    trajectory,
)

from conftest import TINY_BENCH


def linf_steps(pos):
    return np.abs(np.diff(pos, axis=0)).max(axis=2)


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(anomaly_multiplier=1)
    with pytest.raises(ValueError):
        BenchConfig(min_sprites=0)
    with pytest.raises(ValueError):
        BenchConfig(anomaly_length=600)
    with pytest.raises(ValueError):
        BenchConfig(height=20, width=20, anomaly_multiplier=8)


def test_normal_speed_one():
    cfg = BenchConfig()
    for seed in range(5):
        sprites = random_sprites(cfg, np.random.default_rng(seed))
        pos = trajectory(cfg, sprites, 512)
        assert np.all(linf_steps(pos) == 1)


def test_centres_stay_in_frame():
    for k in (4, 8):
        cfg = BenchConfig(anomaly_multiplier=k)
        for seed in range(10):
            sprites = random_sprites(cfg, np.random.default_rng(seed))
            pos = trajectory(cfg, sprites, 512, (100, 300))
            for j, s in enumerate(sprites):
                half = s.size // 2
                ys, xs = pos[:, j, 0], pos[:, j, 1]
                assert ys.min() >= half and ys.max() <= cfg.height - 1 - (s.size - 1 - half)
                assert xs.min() >= half and xs.max() <= cfg.width - 1 - (s.size - 1 - half)


def test_anomalous_interval(tmp_path):
    cfg = replace(BenchConfig(), frames=320)
    rec, track = gen_anomalous_video(cfg, 3, tmp_path / "v", interval=(200, 300))
    assert np.flatnonzero(track.labels).tolist() == list(range(199, 300))
    assert track.labels.sum() == 101
    sprites = random_sprites(cfg, np.random.default_rng([3]))
    pos = trajectory(cfg, sprites, cfg.frames, (200, 300))
    steps = linf_steps(pos)  # steps[f-2] is the move into frame f
    assert np.all(steps[198:299, 0] == 4)
    assert np.all(steps[:198, 0] == 1) and np.all(steps[299:, 0] == 1)
    assert np.all(steps[:, 1:] == 1)


def test_interval_too_long(tmp_path):
    with pytest.raises(ValueError, match="exceeds"):
        gen_anomalous_video(replace(BenchConfig(), frames=100, anomaly_length=20), 0, tmp_path / "v", interval=(50, 120))


def test_same_seed_same_bytes(tmp_path):
    cfg = replace(BenchConfig(), frames=30, anomaly_length=10)
    gen_normal_video(cfg, 5, tmp_path / "a")
    gen_normal_video(cfg, 5, tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only and len(cmp.same_files) == 30
    for name in cmp.same_files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_default_structure(tmp_path):
    root = build_benchmark(BenchConfig(), tmp_path / "bench")
    assert len(list((root / "train").iterdir())) == 10
    assert len(list((root / "test").iterdir())) == 6
    assert len(list((root / "test_labels").iterdir())) == 6
    manifest = read_manifest(root)
    assert len(manifest["videos"]) == 16
    train = load_dataset(root, "train")
    test = load_dataset(root, "test")
    assert all(v.frame_count == 512 for v in train.videos + test.videos)
    for rec in manifest["videos"]:
        if rec["split"] == "train":
            assert rec["interval"] is None
        else:
            a, b = rec["interval"]
            assert test.labels[rec["video_id"]].labels.sum() == b - a + 1


def test_train_split_has_no_fast_motion():
    cfg = BenchConfig()
    for i in range(cfg.n_train):
        sprites = random_sprites(cfg, np.random.default_rng([cfg.seed, 0, i]))
        assert linf_steps(trajectory(cfg, sprites, cfg.frames)).max() == cfg.speed


def test_rebuild_from_manifest_byte_identical(tiny_bench, tmp_path):
    out = rebuild_from_manifest(tiny_bench / "manifest.json", tmp_path / "again")
    for sub in ("train", "test", "test_labels"):
        left = sorted(p.relative_to(tiny_bench) for p in (tiny_bench / sub).rglob("*") if p.is_file())
        right = sorted(p.relative_to(out) for p in (out / sub).rglob("*") if p.is_file())
        assert left == right
        for rel in left:
            assert (tiny_bench / rel).read_bytes() == (out / rel).read_bytes()
    assert json.loads((out / "manifest.json").read_text()) == json.loads((tiny_bench / "manifest.json").read_text())


def test_refuses_non_empty_root(tiny_bench):
    with pytest.raises(FileExistsError):
        build_benchmark(TINY_BENCH, tiny_bench)


def test_pseudo_clip_mimics_fast_sprite(tiny_bench):
    """A skip-s clip of a normal video shows sprites moving s px/frame (away from walls)."""
    cfg = TINY_BENCH
    sprites = random_sprites(cfg, np.random.default_rng([cfg.seed, 0, 0]))
    pos = trajectory(cfg, sprites, cfg.frames)
    for s in (2, 3, 4, 5):
        for n in range(0, cfg.frames - 7 * s):
            sub = pos[n:n + 7 * s + 1:s]
            dense = pos[n:n + 7 * s + 1]
            bounced = np.any(np.diff(np.sign(np.diff(dense, axis=0)), axis=0) != 0)
            if not bounced:
                assert np.all(linf_steps(sub) == s * cfg.speed)
    # frames on disk agree with the trajectory used above
    meta = load_dataset(tiny_bench, "train").videos[0]
    frames = FrameStore(cfg.height, cfg.width).frames(meta)
    y, x = pos[0, 0]
    assert frames[0, y, x] > -1
