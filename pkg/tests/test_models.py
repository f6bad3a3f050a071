"""Embedding parameterizations and the gradient chain through similarities."""

import math

import numpy as np
import pytest

from geosim.losses import evaluate_loss
from geosim.models import (
    EmbeddingModel,
    backprop_through_similarity,
    grad_wrt_embedding,
)
from geosim.similarity import (
    KernelParams,
    NormalizationStats,
    latent_similarity_forward,
)


def pipeline_loss(z, px, kind, distance, stats, kernel):
    p, _ = latent_similarity_forward(z, distance, stats, kernel)
    return evaluate_loss(kind, px, p).value


def pipeline_grad(z, px, kind, distance, stats, kernel):
    p, cache = latent_similarity_forward(z, distance, stats, kernel)
    res = evaluate_loss(kind, px, p)
    return grad_wrt_embedding(res.grad_wrt_latent, cache)


def fd_grad(fn, z, h=1e-6):
    g = np.zeros_like(z)
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            zp, zm = z.copy(), z.copy()
            zp[i, j] += h
            zm[i, j] -= h
            g[i, j] = (fn(zp) - fn(zm)) / (2.0 * h)
    return g


def random_target(rng, n):
    p = rng.uniform(0.1, 0.9, size=(n, n))
    np.fill_diagonal(p, 0.0)
    return p


def test_free_coordinates_init_and_forward():
    m = EmbeddingModel.free_coordinates(n=10, output_dim=3, seed=4)
    assert m.params["coords"].shape == (10, 3)
    again = EmbeddingModel.free_coordinates(n=10, output_dim=3, seed=4)
    assert np.array_equal(m.params["coords"], again.params["coords"])
    assert abs(m.params["coords"].std() - 1e-2) < 6e-3

    z, tap, cache = m.forward([2, 5])
    assert tap is None
    assert np.array_equal(z, m.params["coords"][[2, 5]])
    assert cache["idx"].tolist() == [2, 5]
    with pytest.raises(ValueError, match="out of range"):
        m.forward([10])
    with pytest.raises(ValueError, match="encoder"):
        m.backward(cache, z)

    emb = m.embed()
    emb[0, 0] = 99.0  # embed() hands back a copy
    assert m.params["coords"][0, 0] != 99.0


def test_encoder_init_shapes_bounds_and_determinism():
    m = EmbeddingModel.encoder(input_dim=20, hidden=(16, 8), output_dim=2, seed=7)
    assert m.widths == (20, 16, 8, 2)
    assert m.num_layers == 3
    for layer, fan_in in enumerate((20, 16, 8)):
        w = m.params[f"w{layer}"]
        limit = math.sqrt(6.0 / fan_in)
        assert np.abs(w).max() <= limit
        assert (m.params[f"b{layer}"] == 0.0).all()
    again = EmbeddingModel.encoder(input_dim=20, hidden=(16, 8), output_dim=2, seed=7)
    assert all(np.array_equal(m.params[k], again.params[k]) for k in m.params)
    other = EmbeddingModel.encoder(input_dim=20, hidden=(16, 8), output_dim=2, seed=8)
    assert not np.array_equal(m.params["w0"], other.params["w0"])


def test_encoder_validation():
    with pytest.raises(ValueError, match="hidden"):
        EmbeddingModel.encoder(input_dim=4, hidden=(), output_dim=2)
    with pytest.raises(ValueError, match="tap_layer"):
        EmbeddingModel.encoder(input_dim=4, hidden=(8,), output_dim=2, tap_layer=2)
    with pytest.raises(ValueError, match="positive"):
        EmbeddingModel.encoder(input_dim=0, hidden=(8,), output_dim=2)
    with pytest.raises(ValueError, match="n >= 1"):
        EmbeddingModel.free_coordinates(n=0, output_dim=2)


def test_encoder_leaky_relu_on_hidden_only():
    m = EmbeddingModel.encoder(input_dim=1, hidden=(1,), output_dim=1, seed=0)
    m.params["w0"] = np.array([[1.0]])
    m.params["w1"] = np.array([[1.0]])
    z, tap, _ = m.forward(np.array([[-2.0], [3.0]]))
    assert z[0, 0] == pytest.approx(-0.02)  # slope 0.01 on the hidden layer
    assert z[1, 0] == 3.0  # output layer stays linear
    assert tap[0, 0] == pytest.approx(-0.02)
    assert tap[1, 0] == 3.0


def test_encoder_tap_matches_first_hidden_layer():
    rng = np.random.default_rng(2)
    m = EmbeddingModel.encoder(input_dim=5, hidden=(7, 6), output_dim=2, tap_layer=1, seed=3)
    x = rng.normal(size=(4, 5))
    z, tap, _ = m.forward(x)
    pre = x @ m.params["w0"] + m.params["b0"]
    assert np.array_equal(tap, np.where(pre > 0, pre, 0.01 * pre))
    assert z.shape == (4, 2)
    with pytest.raises(ValueError, match="expected shape"):
        m.forward(np.zeros((4, 6)))


def test_encoder_zero_weights_give_zero_output():
    m = EmbeddingModel.encoder(input_dim=3, hidden=(4,), output_dim=2, seed=0)
    for k in list(m.params):
        m.params[k] = np.zeros_like(m.params[k])
    z, tap, _ = m.forward(np.ones((5, 3)))
    assert (z == 0.0).all() and (tap == 0.0).all()


def test_encoder_backward_matches_finite_differences():
    rng = np.random.default_rng(11)
    m = EmbeddingModel.encoder(input_dim=5, hidden=(8,), output_dim=3, seed=11)
    x = rng.normal(size=(4, 5))
    r = rng.normal(size=(4, 3))  # linear probe: L = sum(Z * R), dL/dZ = R

    z, _, cache = m.forward(x)
    grads = m.backward(cache, r)
    assert set(grads) == set(m.params)

    h = 1e-6
    for name in m.params:
        flat = m.params[name].reshape(-1)
        for idx in range(0, flat.size, max(1, flat.size // 7)):
            orig = flat[idx]
            flat[idx] = orig + h
            up = float((m.forward(x)[0] * r).sum())
            flat[idx] = orig - h
            down = float((m.forward(x)[0] * r).sum())
            flat[idx] = orig
            fd = (up - down) / (2.0 * h)
            assert grads[name].reshape(-1)[idx] == pytest.approx(fd, rel=1e-4, abs=1e-8)


@pytest.mark.parametrize("kind", ["mse", "gkl"])
@pytest.mark.parametrize("distance", ["euclidean", "one_minus_cosine"])
def test_embedding_gradient_matches_finite_differences(kind, distance):
    rng = np.random.default_rng(29)
    z = rng.normal(size=(6, 3))
    px = random_target(rng, 6)
    stats = NormalizationStats(mu_latent=0.0, sigma_latent=1.0)
    kernel = KernelParams(nu=1.0)

    analytic = pipeline_grad(z, px, kind, distance, stats, kernel)
    numeric = fd_grad(lambda zz: pipeline_loss(zz, px, kind, distance, stats, kernel), z)
    assert np.abs(analytic - numeric).max() < 1e-6 * max(1.0, np.abs(numeric).max())


def test_embedding_gradient_with_scaled_normalization():
    rng = np.random.default_rng(31)
    z = rng.normal(size=(5, 2))
    px = random_target(rng, 5)
    stats = NormalizationStats(mu_latent=0.1, sigma_latent=2.5)
    kernel = KernelParams(nu=0.5)
    analytic = pipeline_grad(z, px, "kl", "euclidean", stats, kernel)
    numeric = fd_grad(lambda zz: pipeline_loss(zz, px, "kl", "euclidean", stats, kernel), z)
    assert np.abs(analytic - numeric).max() < 1e-6 * max(1.0, np.abs(numeric).max())


def test_euclidean_gradient_is_translation_invariant():
    rng = np.random.default_rng(37)
    z = rng.normal(size=(8, 2))
    px = random_target(rng, 8)
    g = pipeline_grad(z, px, "bce", "euclidean", NormalizationStats(), KernelParams(nu=0.01))
    assert np.abs(g.sum(axis=0)).max() < 1e-8


def test_clamped_pairs_contribute_zero_gradient():
    # all pairs sit far beyond the clamp floor, so nothing propagates
    z = np.array([[0.0], [500.0], [1000.0]])
    px = random_target(np.random.default_rng(0), 3)
    g = pipeline_grad(z, px, "mse", "euclidean", NormalizationStats(), KernelParams(nu=100.0))
    assert np.array_equal(g, np.zeros((3, 1)))


def test_coincident_points_take_zero_subgradient():
    z = np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]])
    px = np.full((3, 3), 0.5)
    np.fill_diagonal(px, 0.0)
    g = pipeline_grad(z, px, "mse", "euclidean", NormalizationStats(), KernelParams(nu=1.0))
    assert np.isfinite(g).all()
    # the duplicate pair pulls in no direction; rows 0 and 1 see only point 2
    assert np.array_equal(g[0], g[1])
    assert g[0][0] == g[0][1]  # force along z0 - z2 = (1, 1)


def test_cosine_zero_row_is_constant_under_gradient():
    z = np.array([[0.0, 0.0], [1.0, 0.5], [-0.3, 1.0]])
    px = random_target(np.random.default_rng(2), 3)
    g = pipeline_grad(z, px, "mse", "one_minus_cosine", NormalizationStats(), KernelParams(nu=1.0))
    assert np.array_equal(g[0], np.zeros(2))
    assert np.isfinite(g).all()


def test_cosine_gradient_is_scale_orthogonal():
    # tangent-space gradients never move a row along its own direction
    rng = np.random.default_rng(41)
    z = rng.normal(size=(6, 3))
    px = random_target(rng, 6)
    g = pipeline_grad(z, px, "kl", "one_minus_cosine", NormalizationStats(), KernelParams(nu=1.0))
    radial = np.einsum("ij,ij->i", g, z)
    assert np.abs(radial).max() < 1e-10


def test_backprop_through_similarity_free_and_encoder():
    rng = np.random.default_rng(43)
    px = random_target(rng, 4)
    stats, kernel = NormalizationStats(), KernelParams(nu=1.0)

    free = EmbeddingModel.free_coordinates(n=4, output_dim=2, seed=0)
    z, _, fcache = free.forward(np.arange(4))
    p, cache = latent_similarity_forward(z, "euclidean", stats, kernel)
    res = evaluate_loss("mse", px, p)
    dz = backprop_through_similarity(res.grad_wrt_latent, cache, free, fcache)
    assert dz.shape == (4, 2)

    enc = EmbeddingModel.encoder(input_dim=3, hidden=(5,), output_dim=2, seed=1)
    x = rng.normal(size=(4, 3))
    z, _, ecache = enc.forward(x)
    p, cache = latent_similarity_forward(z, "euclidean", stats, kernel)
    res = evaluate_loss("mse", px, p)
    grads = backprop_through_similarity(res.grad_wrt_latent, cache, enc, ecache)
    assert set(grads) == {"w0", "b0", "w1", "b1"}

    with pytest.raises(ValueError, match="gradient shape"):
        grad_wrt_embedding(np.zeros((5, 5)), cache)


def test_encoder_embed_requires_features():
    enc = EmbeddingModel.encoder(input_dim=3, hidden=(4,), output_dim=2, seed=0)
    with pytest.raises(ValueError, match="feature matrix"):
        enc.embed()
    z = enc.embed(np.ones((6, 3)))
    assert z.shape == (6, 2)
