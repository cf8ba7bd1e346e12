import numpy as np
import pytest

from ds4d import autodiff as ad
from ds4d.autodiff import Tensor
from ds4d.errors import ShapeError
from ds4d.fusion import average_fuse, da_fuse, fuse_gaussian_features, ga_fuse
from ds4d.nn import LinearLayer, grad_check, init_linear, softmax


def pick_first_channel_scorer(width):
    w = np.zeros((1, width))
    w[0, 0] = 1.0
    return LinearLayer(Tensor(w, requires_grad=True, name="scorer.weight"),
                       Tensor(np.zeros(1), requires_grad=True, name="scorer.bias"))


# -- GA -------------------------------------------------------------------------


def test_ga_identical_views_is_fixed_point():
    rng = np.random.default_rng(0)
    common = rng.standard_normal((6, 1, 5))
    feats = Tensor(np.repeat(common, 3, axis=1))
    res = ga_fuse(feats, np.ones((6, 3), bool), init_linear(5, 1, rng))
    assert np.array_equal(res.fused.data, common[:, 0])


def test_ga_softmax_arithmetic_two_views():
    u = np.array([0.0, 5.0])
    v = np.array([np.log(3.0), -2.0])
    feats = Tensor(np.stack([u, v])[None])
    res = ga_fuse(feats, np.ones((1, 2), bool), pick_first_channel_scorer(2))
    assert np.allclose(res.scores.data[0], [0.25, 0.75], atol=1e-12)
    assert np.allclose(res.fused.data[0], 0.25 * u + 0.75 * v, atol=1e-12)


def test_ga_convex_combination_bound():
    rng = np.random.default_rng(1)
    n, v, w = 200, 5, 7
    valid = rng.uniform(size=(n, v)) > 0.3
    valid[:, 0] = True
    feats_np = rng.standard_normal((n, v, w)) * valid[:, :, None]
    res = ga_fuse(Tensor(feats_np), valid, init_linear(w, 1, rng))
    for i in range(n):
        vs = feats_np[i, valid[i]]
        assert np.all(res.fused.data[i] >= vs.min(axis=0) - 1e-12)
        assert np.all(res.fused.data[i] <= vs.max(axis=0) + 1e-12)


def test_ga_scoremap_simplex_and_mask_renormalization():
    rng = np.random.default_rng(2)
    n, v, w = 40, 4, 6
    valid = rng.uniform(size=(n, v)) > 0.4
    feats_np = rng.standard_normal((n, v, w)) * valid[:, :, None]
    scorer = init_linear(w, 1, rng)
    res = ga_fuse(Tensor(feats_np), valid, scorer)
    assert np.all(res.scores.data >= 0)
    assert np.abs(res.scores.data.sum(axis=1) - 1).max() < 1e-9
    # masked weights match a softmax over the reduced logit set
    logits = feats_np @ scorer.weight.data[0] + scorer.bias.data[0]
    for i in range(n):
        if valid[i].any():
            reduced = softmax(Tensor(logits[i, valid[i]])).data
            assert np.allclose(res.scores.data[i, valid[i]], reduced, atol=1e-12)
            assert np.all(res.scores.data[i, ~valid[i]] == 0.0)


def test_ga_all_views_invalid_flagged_zero_uniform():
    feats = Tensor(np.zeros((2, 3, 4)))
    valid = np.zeros((2, 3), dtype=bool)
    res = ga_fuse(feats, valid, pick_first_channel_scorer(4))
    assert res.all_invalid.all()
    assert np.array_equal(res.fused.data, np.zeros((2, 4)))
    assert np.allclose(res.scores.data, 1 / 3, atol=1e-12)


def test_ga_permutation_equivariance_over_views():
    rng = np.random.default_rng(3)
    n, v, w = 10, 4, 5
    feats_np = rng.standard_normal((n, v, w))
    valid = np.ones((n, v), bool)
    scorer = init_linear(w, 1, rng)
    res = ga_fuse(Tensor(feats_np), valid, scorer)
    perm = np.array([2, 0, 3, 1])
    res_p = ga_fuse(Tensor(feats_np[:, perm]), valid, scorer)
    assert np.allclose(res_p.fused.data, res.fused.data, atol=1e-12)
    assert np.allclose(res_p.scores.data, res.scores.data[:, perm], atol=1e-12)


def test_ga_gradcheck():
    # fully valid instance: masked entries have structurally zero gradients
    # that finite differences only measure roundoff against
    rng = np.random.default_rng(4)
    n, v, w = 5, 3, 4
    valid = np.ones((n, v), dtype=bool)
    feats = Tensor(rng.standard_normal((n, v, w)), requires_grad=True)
    scorer = init_linear(w, 1, rng)

    def loss():
        return ad.square(ga_fuse(feats, valid, scorer).fused).mean()

    # scorer bias excluded: softmax shift-invariance makes its gradient
    # exactly zero, below what central differences can certify
    assert grad_check(loss, [feats, scorer.weight], eps=1e-5) < 1e-6


# -- average pooling ---------------------------------------------------------------


def test_average_fuse_uniform_over_valid():
    feats_np = np.zeros((1, 3, 2))
    feats_np[0, 0] = [1.0, 0.0]
    feats_np[0, 1] = [3.0, 2.0]
    valid = np.array([[True, True, False]])
    res = average_fuse(Tensor(feats_np), valid)
    assert np.allclose(res.fused.data[0], [2.0, 1.0], atol=1e-12)
    assert np.allclose(res.scores.data[0], [0.5, 0.5, 0.0], atol=1e-12)


# -- DA -------------------------------------------------------------------------


def test_da_all_views_identical_equals_front_exactly():
    rng = np.random.default_rng(5)
    common = rng.standard_normal((8, 1, 6))
    feats = Tensor(np.repeat(common, 4, axis=1))
    res = da_fuse(feats, np.ones((8, 4), bool),
                  init_linear(12, 1, rng), init_linear(12, 1, rng))
    assert np.array_equal(res.fused.data[:, :6], common[:, 0])
    assert np.array_equal(res.fused.data[:, 6:], np.zeros((8, 6)))


def test_da_distance_feature_elementwise_abs():
    # front invalid forces stage 2 to pass the stage-1 result through, which
    # for a single non-front view is [other; |front - other|] with the
    # (zeroed) invalid front, i.e. [other; |other|].
    feats_np = np.zeros((1, 2, 2))
    feats_np[0, 1] = [3.0, 1.0]
    valid = np.array([[False, True]])
    res = da_fuse(Tensor(feats_np), valid,
                  pick_first_channel_scorer(4), pick_first_channel_scorer(4))
    assert np.allclose(res.fused.data[0], [3.0, 1.0, 3.0, 1.0], atol=1e-12)

    # with a valid front (1, 2) and other (3, 1): distance block is (2, 1)
    feats_np = np.array([[[1.0, 2.0], [3.0, 1.0]]])
    valid = np.ones((1, 2), bool)
    res = da_fuse(Tensor(feats_np), valid,
                  pick_first_channel_scorer(4), pick_first_channel_scorer(4))
    w1 = res.stage_scores["others"].data
    assert np.allclose(w1, 1.0, atol=1e-12)  # singleton softmax
    w2 = res.stage_scores["front_vs_others"].data[0]
    expected = w2[0] * np.array([1.0, 2.0, 0.0, 0.0]) \
        + w2[1] * np.array([3.0, 1.0, 2.0, 1.0])
    assert np.allclose(res.fused.data[0], expected, atol=1e-12)


def test_da_single_view_passthrough():
    rng = np.random.default_rng(6)
    feats_np = rng.standard_normal((3, 1, 4))
    res = da_fuse(Tensor(feats_np), np.ones((3, 1), bool),
                  init_linear(8, 1, rng), init_linear(8, 1, rng))
    assert np.array_equal(res.fused.data[:, :4], feats_np[:, 0])
    assert np.array_equal(res.fused.data[:, 4:], np.zeros((3, 4)))


def test_da_effective_scores_simplex():
    rng = np.random.default_rng(7)
    n, v, w = 30, 4, 5
    valid = rng.uniform(size=(n, v)) > 0.35
    feats = Tensor(rng.standard_normal((n, v, w)) * valid[:, :, None])
    res = da_fuse(feats, valid, init_linear(2 * w, 1, rng), init_linear(2 * w, 1, rng))
    assert np.all(res.scores.data >= 0)
    assert np.abs(res.scores.data.sum(axis=1) - 1).max() < 1e-9


def test_da_gradcheck():
    rng = np.random.default_rng(8)
    n, v, w = 4, 3, 4
    valid = np.ones((n, v), dtype=bool)
    feats = Tensor(rng.standard_normal((n, v, w)), requires_grad=True)
    sa, sb = init_linear(2 * w, 1, rng), init_linear(2 * w, 1, rng)

    def loss():
        return ad.square(da_fuse(feats, valid, sa, sb).fused).mean()

    assert grad_check(loss, [feats, sa.weight, sb.weight], eps=1e-5) < 1e-6


# -- mixer -------------------------------------------------------------------------


def test_fuse_gaussian_features_block_identity():
    f_hg = Tensor(np.array([[1.0, 2.0, 3.0]]))
    f_a = Tensor(np.zeros((1, 2)))
    w = np.zeros((3, 5))
    w[:3, :3] = np.eye(3)
    mixer = LinearLayer(Tensor(w), Tensor(np.zeros(3)))
    out = fuse_gaussian_features(f_hg, f_a, mixer)
    assert np.array_equal(out.data, [[1.0, 2.0, 3.0]])


def test_fuse_gaussian_features_zero_mixer():
    mixer = LinearLayer(Tensor(np.zeros((4, 6))), Tensor(np.zeros(4)))
    out = fuse_gaussian_features(Tensor(np.ones((2, 4))), Tensor(np.ones((2, 2))), mixer)
    assert np.array_equal(out.data, np.zeros((2, 4)))


def test_fuse_gaussian_features_matches_matvec():
    rng = np.random.default_rng(9)
    mixer = init_linear(9, 4, rng)
    f_hg = rng.standard_normal((3, 4))
    f_a = rng.standard_normal((3, 3))
    extras = rng.standard_normal((3, 2))
    out = fuse_gaussian_features(Tensor(f_hg), Tensor(f_a), mixer, Tensor(extras))
    cat = np.concatenate([f_hg, f_a, extras], axis=1)
    expected = cat @ mixer.weight.data.T + mixer.bias.data
    assert np.allclose(out.data, expected, atol=1e-12)


def test_fuse_gaussian_features_width_mismatch():
    rng = np.random.default_rng(10)
    mixer = init_linear(5, 2, rng)
    with pytest.raises(ShapeError):
        fuse_gaussian_features(Tensor(np.ones((1, 3))), Tensor(np.ones((1, 3))), mixer)
