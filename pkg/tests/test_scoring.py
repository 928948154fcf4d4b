import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from torch import nn

from steal.dataset import FrameStore, load_dataset
from steal.model import init_params
from steal.scoring import (
    PsnrConfig,
    anomaly_scores,
    error_heatmap,
    fill_boundaries,
    minmax_normalize,
    psnr,
    psnr_batch,
    read_series_csv,
    score_video,
    series_from_psnr,
    write_heatmaps,
    write_series_csv,
)


def direct_psnr(a, b, peak=1.0, eps=1e-10):
    """Textbook formula, element by element."""
    sq = 0.0
    for x, y in zip(np.ravel(a), np.ravel(b)):
        sq += ((float(y) + 1) / 2 - (float(x) + 1) / 2) ** 2
    return 10 * math.log10(peak ** 2 / (sq / np.size(a) + eps))


def test_psnr_identical_is_100db():
    f = np.random.default_rng(0).uniform(-1, 1, (8, 8))
    assert psnr(f, f) == pytest.approx(100.0, abs=1e-9)


def test_psnr_uniform_error():
    f = np.zeros((8, 8))
    # 0.2 in [-1, 1] is 0.1 in [0, 1]
    assert psnr(f, f + 0.2) == pytest.approx(20.0, abs=1e-6)


def test_psnr_matches_direct_formula():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = rng.uniform(-1, 1, (2, 12, 9))
        assert abs(psnr(a, b) - direct_psnr(a, b)) < 1e-9


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_psnr_batch_agrees():
    rng = np.random.default_rng(2)
    a, b = rng.uniform(-1, 1, (2, 7, 6, 6))
    np.testing.assert_allclose(psnr_batch(a, b), [psnr(x, y) for x, y in zip(a, b)], atol=1e-12)


def test_psnr_strictly_decreasing_in_mse():
    base = np.zeros((10, 10))
    values = [psnr(base, base + 2 * d) for d in np.linspace(0.0, 0.5, 60)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_psnr_config_validation():
    with pytest.raises(ValueError):
        PsnrConfig(peak=0)
    with pytest.raises(ValueError):
        PsnrConfig(eps=0)


def test_minmax_examples():
    np.testing.assert_allclose(minmax_normalize([10, 20, 30]), [0, 0.5, 1])
    np.testing.assert_allclose(minmax_normalize([7, 7, 7]), [0.5, 0.5, 0.5])
    with pytest.raises(ValueError):
        minmax_normalize([])


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(st.lists(finite, min_size=1, max_size=40), st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_minmax_affine_invariant(p, a, b):
    p = np.array(p)
    q1, q2 = minmax_normalize(p), minmax_normalize(a * p + b)
    if np.ptp(p) > 1e-6 * max(1.0, np.abs(p).max()):
        np.testing.assert_allclose(q1, q2, atol=1e-6)
    assert q1.min() >= 0 and q1.max() <= 1


def test_anomaly_scores():
    np.testing.assert_array_equal(anomaly_scores([0, 0.5, 1]), [1, 0.5, 0])
    np.testing.assert_array_equal(anomaly_scores([0.5] * 3), [0.5] * 3)
    q = np.random.default_rng(0).uniform(0, 1, 50)
    np.testing.assert_array_equal(anomaly_scores(anomaly_scores(q)), 1 - (1 - q))
    with pytest.raises(ValueError):
        anomaly_scores([0.2, 1.1])


def test_series_invariants():
    s = series_from_psnr("v", [30.0, 25.0, 40.0, 35.0], [True] * 4)
    assert s.quality.min() == 0 and s.quality.max() == 1
    np.testing.assert_array_equal(s.anomaly, 1 - s.quality)
    assert stats.spearmanr(s.psnr, s.anomaly).correlation == pytest.approx(-1)


def test_fill_boundaries_window_arithmetic():
    # K=20, T=16, offset=8: windows start at 1..5 and score frames 9..13
    full, direct = fill_boundaries(np.array([9.0, 10, 11, 12, 13]), 20, 8)
    assert np.flatnonzero(direct).tolist() == [8, 9, 10, 11, 12]
    assert full[:8].tolist() == [9.0] * 8
    assert full[13:].tolist() == [13.0] * 7
    assert full[8:13].tolist() == [9, 10, 11, 12, 13]


class Identity(nn.Module):
    def __init__(self, shape):
        super().__init__()
        self.input_shape = shape
        self.dummy = nn.Parameter(torch.zeros(1))

    def forward(self, x):
        return x


@pytest.fixture
def video(make_dataset):
    idx = load_dataset(make_dataset("train", (20,), size=(16, 16)), "train")
    return idx.videos[0], FrameStore(16, 16)


def test_score_video_coverage(video):
    meta, store = video
    s = score_video(Identity((16, 1, 16, 16)), store, meta, PsnrConfig(target_offset=8))
    assert len(s) == 20
    assert np.flatnonzero(s.direct).tolist() == list(range(8, 13))


def test_perfect_reconstruction_gives_neutral_scores(video):
    meta, store = video
    s = score_video(Identity((16, 1, 16, 16)), store, meta, PsnrConfig(target_offset=8))
    np.testing.assert_allclose(s.psnr, 100.0)
    np.testing.assert_array_equal(s.anomaly, 0.5)


def test_score_video_too_short(video):
    meta, store = video
    with pytest.raises(ValueError, match="shorter than T"):
        score_video(Identity((32, 1, 16, 16)), store, meta, PsnrConfig(target_offset=8))


def test_target_offset_must_fit(video):
    meta, store = video
    with pytest.raises(ValueError, match="target_offset"):
        score_video(Identity((16, 1, 16, 16)), store, meta, PsnrConfig(target_offset=16))


def brute_force_series(model, frames, cfg):
    """One window at a time, no batching."""
    T = model.input_shape[0]
    k = cfg.target_offset
    direct = []
    with torch.no_grad():
        for n in range(len(frames) - T + 1):
            clip = torch.from_numpy(frames[n:n + T][:, None].copy()).double()
            recon = model(clip).numpy()
            direct.append(psnr(frames[n + k], recon[k, 0], cfg))
    full = [direct[0]] * k + direct + [direct[-1]] * (len(frames) - T + 1 - len(direct) + T - 1 - k)
    q = minmax_normalize(full)
    return np.array(full), 1 - q


def test_score_video_matches_brute_force(tiny_bench):
    meta = load_dataset(tiny_bench, "test").videos[0]
    store = FrameStore(64, 64)
    model = init_params("desk", 4).double().eval()
    cfg = PsnrConfig(target_offset=4)
    s = score_video(model, store, meta, cfg, batch_size=7)
    ref_psnr, ref_a = brute_force_series(model, store.frames(meta), cfg)
    np.testing.assert_allclose(s.psnr, ref_psnr, rtol=0, atol=1e-9)
    np.testing.assert_allclose(s.anomaly, ref_a, rtol=0, atol=1e-9)


def test_scores_independent_of_other_videos(tiny_bench):
    idx = load_dataset(tiny_bench, "test")
    store = FrameStore(64, 64)
    model = init_params("desk", 4).eval()
    cfg = PsnrConfig(target_offset=4)
    alone = score_video(model, store, idx.videos[0], cfg)
    score_video(model, store, idx.videos[1], cfg)
    again = score_video(model, store, idx.videos[0], cfg)
    np.testing.assert_array_equal(alone.anomaly, again.anomaly)


def test_series_csv_roundtrip(tmp_path):
    s = series_from_psnr("v", [30.0, 25.0, 40.0], [False, True, False])
    write_series_csv(s, tmp_path / "v.csv")
    assert (tmp_path / "v.csv").read_text().splitlines()[0] == "frame,psnr,Q,A,direct_flag"
    r = read_series_csv(tmp_path / "v.csv")
    np.testing.assert_array_equal(r.anomaly, s.anomaly)
    np.testing.assert_array_equal(r.direct, s.direct)


def test_heatmap_identical_is_half():
    f = np.random.default_rng(0).uniform(-1, 1, (6, 6))
    np.testing.assert_array_equal(error_heatmap(f, f), 0.5)


def test_heatmap_single_hot_pixel():
    f = np.zeros((5, 5))
    g = f.copy()
    g[2, 3] = 0.7
    hm = error_heatmap(f, g)
    assert hm[2, 3] == 1.0
    assert np.count_nonzero(hm) == 1


def test_heatmap_preserves_ranking():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a, b = rng.uniform(-1, 1, (2, 9, 9))
        raw = (b - a) ** 2
        hm = error_heatmap(a, b)
        assert np.argmax(hm) == np.argmax(raw)
        assert hm.min() == 0 and hm.max() == 1
        np.testing.assert_array_equal(np.argsort(hm, axis=None, kind="stable"),
                                      np.argsort(raw, axis=None, kind="stable"))


def test_heatmap_shape_mismatch():
    with pytest.raises(ValueError):
        error_heatmap(np.zeros((3, 3)), np.zeros((3, 4)))


def test_write_heatmaps(tmp_path, video):
    meta, store = video
    n = write_heatmaps(Identity((16, 1, 16, 16)), store, meta, PsnrConfig(target_offset=8),
                       tmp_path / "hm", every=2)
    assert n == 3
    assert sorted(p.name for p in (tmp_path / "hm").iterdir()) == ["000009.png", "000011.png", "000013.png"]
