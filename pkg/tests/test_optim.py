"""Adam updates, batch-size learning-rate scaling, and the sparse-row variant."""

import numpy as np
import pytest

from geosim.optim import AdamState, adam_step, adam_step_rows


def test_for_params_builds_zero_moments():
    params = {"w": np.ones((3, 2)), "b": np.zeros(2)}
    state = AdamState.for_params(params)
    assert set(state.m) == {"w", "b"} and set(state.v) == {"w", "b"}
    assert (state.m["w"] == 0.0).all() and (state.v["b"] == 0.0).all()
    assert state.step == 0


def test_effective_lr_scales_linearly_with_batch_size():
    assert AdamState(base_lr=0.001, batch_size=256).effective_lr == 0.001
    assert AdamState(base_lr=0.001, batch_size=512).effective_lr == 0.002
    assert AdamState(base_lr=0.001, batch_size=64).effective_lr == pytest.approx(0.00025)


def test_first_step_moves_by_effective_lr():
    # bias correction makes m/bc1 = g and v/bc2 = g^2, so the first update
    # is lr * g / (|g| + eps), essentially lr * sign(g)
    params = {"w": np.array([1.0, -2.0, 0.5])}
    state = AdamState.for_params(params, base_lr=0.01, batch_size=256)
    before = params["w"].copy()
    adam_step(state, params, {"w": np.array([3.0, -4.0, 1e-3])})
    delta = params["w"] - before
    assert delta[0] == pytest.approx(-0.01, rel=1e-6)
    assert delta[1] == pytest.approx(0.01, rel=1e-6)
    assert delta[2] == pytest.approx(-0.01, rel=1e-4)
    assert state.step == 1


def test_zero_gradient_is_an_exact_fixed_point():
    params = {"w": np.array([1.0, 2.0])}
    state = AdamState.for_params(params)
    for _ in range(3):
        adam_step(state, params, {"w": np.zeros(2)})
    assert np.array_equal(params["w"], [1.0, 2.0])
    assert state.step == 3


def test_converges_on_quadratic():
    params = {"x": np.zeros(4)}
    state = AdamState.for_params(params, base_lr=0.05)
    target = np.array([3.0, -1.0, 0.5, 2.0])
    for _ in range(500):
        adam_step(state, params, {"x": 2.0 * (params["x"] - target)})
    assert np.abs(params["x"] - target).max() < 0.1


def test_non_finite_gradient_names_the_block():
    params = {"coords": np.zeros(3)}
    state = AdamState.for_params(params)
    with pytest.raises(FloatingPointError, match="'coords'"):
        adam_step(state, params, {"coords": np.array([1.0, np.nan, 0.0])})
    with pytest.raises(FloatingPointError, match="'coords'"):
        adam_step_rows(state, "coords", params["coords"], np.arange(3), np.array([np.inf, 0.0, 0.0]))


def test_row_variant_matches_dense_step_on_full_rows():
    rng = np.random.default_rng(8)
    a = {"coords": rng.normal(size=(5, 3))}
    b = {"coords": a["coords"].copy()}
    sa = AdamState.for_params(a, base_lr=0.01)
    sb = AdamState.for_params(b, base_lr=0.01)
    for _ in range(4):
        g = rng.normal(size=(5, 3))
        adam_step(sa, a, {"coords": g})
        adam_step_rows(sb, "coords", b["coords"], np.arange(5), g)
    assert np.array_equal(a["coords"], b["coords"])
    assert np.array_equal(sa.m["coords"], sb.m["coords"])
    assert np.array_equal(sa.v["coords"], sb.v["coords"])
    assert sa.step == sb.step == 4


def test_row_variant_leaves_untouched_rows_alone():
    rng = np.random.default_rng(9)
    params = {"coords": rng.normal(size=(6, 2))}
    state = AdamState.for_params(params)
    frozen = params["coords"][[0, 3, 5]].copy()
    rows = np.array([1, 2, 4])
    adam_step_rows(state, "coords", params["coords"], rows, np.ones((3, 2)))
    assert np.array_equal(params["coords"][[0, 3, 5]], frozen)
    assert (state.m["coords"][[0, 3, 5]] == 0.0).all()
    assert (state.m["coords"][rows] != 0.0).all()


def test_state_validation():
    with pytest.raises(ValueError, match="base_lr"):
        AdamState(base_lr=0.0)
    with pytest.raises(ValueError, match="batch_size"):
        AdamState(batch_size=0)
    with pytest.raises(ValueError, match="beta"):
        AdamState(beta1=1.0)
