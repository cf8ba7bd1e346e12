import numpy as np
import pytest

from ds4d.decouple import (decouple, decouple_all, decouple_all_pairs,
                           dynamic_heatmap, select_references)
from ds4d.errors import ConfigError, DataError, ShapeError
from ds4d.features import FeatureSet


def random_features(rng, t=4, v=2, p=4, d=16):
    return FeatureSet(tokens=rng.standard_normal((t, v, p * p, d)), grid_size=p)


# -- decouple -------------------------------------------------------------


def test_axis_aligned_example():
    static, dynamic = decouple(np.array([3.0, 4.0, 0.0]), np.array([1.0, 0.0, 0.0]))
    assert np.array_equal(static, [3.0, 0.0, 0.0])
    assert np.array_equal(dynamic, [0.0, 4.0, 0.0])


def test_parallel_reference_gives_zero_dynamic():
    f = np.array([2.0, -1.0, 0.5])
    static, dynamic = decouple(f, f)
    assert np.array_equal(static, f)
    assert np.array_equal(dynamic, np.zeros(3))


def test_orthogonal_reference_gives_all_dynamic():
    f = np.array([1.0, 2.0, 2.0])
    r = np.array([2.0, 1.0, -2.0])
    assert f @ r == 0.0
    static, dynamic = decouple(f, r)
    assert np.array_equal(static, np.zeros(3))
    assert np.array_equal(dynamic, f)


def test_degenerate_reference_policy():
    f = np.array([1.0, 2.0, 3.0])
    static, dynamic = decouple(f, np.zeros(3))
    assert np.array_equal(static, np.zeros(3))
    assert np.array_equal(dynamic, f)


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeError):
        decouple(np.zeros(3), np.zeros(4))


def test_decouple_invariants_on_random_pairs():
    rng = np.random.default_rng(0)
    f = rng.standard_normal((500, 64))
    r = rng.standard_normal((500, 64))
    static, dynamic = decouple(f, r)
    # exact reconstruction
    assert np.abs(static + dynamic - f).max() < 1e-12
    # orthogonality of the dynamic part
    dots = np.abs(np.einsum("ij,ij->i", dynamic, r))
    bound = 1e-9 * np.linalg.norm(f, axis=1) * np.linalg.norm(r, axis=1)
    assert np.all(dots <= bound)
    # Pythagorean identity
    lhs = np.linalg.norm(f, axis=1) ** 2
    rhs = np.linalg.norm(static, axis=1) ** 2 + np.linalg.norm(dynamic, axis=1) ** 2
    assert np.abs(lhs - rhs).max() <= 1e-9 * lhs.max()


def test_scale_equivariance():
    rng = np.random.default_rng(1)
    f = rng.standard_normal(32)
    r = rng.standard_normal(32)
    s1, d1 = decouple(f, r)
    s2, d2 = decouple(2.5 * f, r)
    assert np.allclose(s2, 2.5 * s1, rtol=1e-12)
    assert np.allclose(d2, 2.5 * d1, rtol=1e-12)
    s3, d3 = decouple(f, -3.0 * r)
    assert np.allclose(s3, s1, rtol=1e-12, atol=1e-15)
    assert np.allclose(d3, d1, rtol=1e-12, atol=1e-15)


# -- references -------------------------------------------------------------


def test_middle_index_floor_convention():
    rng = np.random.default_rng(2)
    feats = random_features(rng, t=30)
    refs = select_references(feats)
    assert refs.middle_index == 15
    assert np.array_equal(refs.mid, feats.tokens[15])


def test_constant_sequence_references_coincide():
    rng = np.random.default_rng(3)
    frame = rng.standard_normal((2, 9, 8))
    tokens = np.repeat(frame[None], 6, axis=0)
    refs = select_references(FeatureSet(tokens=tokens, grid_size=3))
    assert np.allclose(refs.avg, frame, atol=1e-12)
    assert np.array_equal(refs.mid, frame)


def test_two_frame_average():
    rng = np.random.default_rng(4)
    a, b = rng.standard_normal((2, 1, 4, 5))
    refs = select_references(FeatureSet(tokens=np.stack([a, b]), grid_size=2))
    assert np.allclose(refs.avg, (a + b) / 2, atol=1e-12)


def test_average_within_1e9_of_mean():
    rng = np.random.default_rng(5)
    feats = random_features(rng, t=7)
    refs = select_references(feats)
    assert np.abs(refs.avg - feats.tokens.mean(axis=0)).max() < 1e-9


# -- decouple_all -------------------------------------------------------------


def test_middle_frame_dynamic_part_zero_in_mid_mode():
    rng = np.random.default_rng(6)
    feats = random_features(rng, t=5)
    refs = select_references(feats)
    dec = decouple_all(feats, refs, mode="mid")
    assert np.array_equal(dec.tokens[2, :, :, 16:], np.zeros_like(dec.tokens[2, :, :, 16:]))


def test_constant_video_all_dynamic_zero_in_both_modes():
    rng = np.random.default_rng(7)
    frame = rng.standard_normal((2, 16, 8))
    tokens = np.repeat(frame[None], 4, axis=0)
    feats = FeatureSet(tokens=tokens, grid_size=4)
    refs = select_references(feats)
    for mode in ("mid", "avg", "concat-both"):
        dec = decouple_all(feats, refs, mode=mode)
        assert np.abs(dec.tokens[:, :, :, 8:]).max() < 1e-9


def test_batched_equals_per_token_oracle():
    rng = np.random.default_rng(8)
    feats = random_features(rng, t=3, v=2, p=3, d=10)
    refs = select_references(feats)
    dec = decouple_all(feats, refs, mode="concat-both")
    for i in range(3):
        for j in range(2):
            for k in range(9):
                f = feats.tokens[i, j, k]
                _, d_mid = decouple(f, refs.mid[j, k])
                _, d_avg = decouple(f, refs.avg[j, k])
                assert np.array_equal(dec.tokens[i, j, k, :10], f)
                assert np.allclose(dec.tokens[i, j, k, 10:20], d_mid, atol=1e-12)
                assert np.allclose(dec.tokens[i, j, k, 20:30], d_avg, atol=1e-12)


def test_width_rules_and_sum_combine():
    rng = np.random.default_rng(9)
    feats = random_features(rng, d=12)
    refs = select_references(feats)
    assert decouple_all(feats, refs, mode="mid").width == 24
    assert decouple_all(feats, refs, mode="avg").width == 24
    assert decouple_all(feats, refs, mode="concat-both").width == 36
    summed = decouple_all(feats, refs, mode="concat-both", combine="sum")
    assert summed.width == 24
    both = decouple_all(feats, refs, mode="concat-both")
    assert np.allclose(summed.tokens[..., 12:],
                       both.tokens[..., 12:24] + both.tokens[..., 24:], atol=1e-12)


def test_flat_granularity_differs_but_reconstructs():
    rng = np.random.default_rng(10)
    feats = random_features(rng)
    refs = select_references(feats)
    dec = decouple_all(feats, refs, mode="mid", granularity="flat")
    assert dec.tokens.shape[-1] == 32
    assert np.array_equal(dec.tokens[..., :16], feats.tokens)


def test_mode_validation():
    rng = np.random.default_rng(11)
    feats = random_features(rng)
    refs = select_references(feats)
    with pytest.raises(ConfigError):
        decouple_all(feats, refs, mode="nope")
    with pytest.raises(ShapeError):
        bad = FeatureSet(tokens=rng.standard_normal((4, 2, 16, 8)), grid_size=4)
        decouple_all(bad, refs)


def test_provenance_tag():
    rng = np.random.default_rng(12)
    feats = random_features(rng)
    refs = select_references(feats)
    assert decouple_all(feats, refs, mode="mid").provenance == "mid"
    assert decouple_all(feats, refs, mode="concat-both").provenance == "mid+avg"


# -- pairwise baseline ---------------------------------------------------------


def test_pairwise_counts():
    rng = np.random.default_rng(13)
    timing = decouple_all_pairs(random_features(rng, t=2, v=3))
    assert timing.pairs_per_view == 2
    assert timing.n_views == 3
    timing = decouple_all_pairs(random_features(rng, t=6, v=2))
    assert timing.pairs_per_view == 6 * 5


def test_pairwise_needs_two_frames():
    rng = np.random.default_rng(14)
    with pytest.raises(DataError):
        decouple_all_pairs(random_features(rng, t=1))


def test_reference_decoupling_faster_than_pairwise():
    rng = np.random.default_rng(15)
    feats = random_features(rng, t=12, v=2, p=8, d=64)
    refs = select_references(feats)
    dec = decouple_all(feats, refs)
    timing = decouple_all_pairs(feats)
    assert timing.elapsed_seconds > dec.elapsed_seconds


# -- heatmap -------------------------------------------------------------


def test_heatmap_static_video_all_zero():
    rng = np.random.default_rng(16)
    frame = rng.standard_normal((2, 16, 8))
    feats = FeatureSet(tokens=np.repeat(frame[None], 4, axis=0), grid_size=4)
    dec = decouple_all(feats, select_references(feats))
    assert np.array_equal(dynamic_heatmap(dec, 1, 0), np.zeros((4, 4)))


def test_heatmap_single_hot_token():
    rng = np.random.default_rng(17)
    frame = rng.standard_normal((1, 16, 8))
    tokens = np.repeat(frame[None], 4, axis=0).copy()
    tokens[3, 0, 5] += np.array([0, 0, 0, 0, 0, 0, 0, 4.0])  # perturb one token
    feats = FeatureSet(tokens=tokens, grid_size=4)
    dec = decouple_all(feats, select_references(feats), mode="mid")
    grid = dynamic_heatmap(dec, 3, 0)
    assert grid[5 // 4, 5 % 4] == 1.0
    others = grid.copy()
    others[5 // 4, 5 % 4] = 0.0
    assert others.max() < 0.35  # remaining tokens only see the average shift


def test_heatmap_bad_index():
    rng = np.random.default_rng(18)
    feats = random_features(rng)
    dec = decouple_all(feats, select_references(feats))
    with pytest.raises(DataError):
        dynamic_heatmap(dec, 99, 0)
