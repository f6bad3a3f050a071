"""End-to-end task drivers and their preset tables."""

import numpy as np
import pytest

from geosim import tasks
from geosim.metrics import trustworthiness
from geosim.tasks import (
    DR_SIGMA_X_PRESETS,
    GE_PRESETS,
    dr_defaults,
    ge_defaults,
    kd_defaults,
    run_dr_task,
    run_ge_task,
    run_kd_task,
)


def cluster_data(rng, n_per=20, dim=5, centers=3, spread=0.2):
    xs = []
    for c in range(centers):
        mean = np.zeros(dim)
        mean[c % dim] = 6.0 * (c + 1)
        xs.append(rng.normal(scale=spread, size=(n_per, dim)) + mean)
    return np.concatenate(xs)


def test_dr_defaults_table():
    spec = dr_defaults()
    assert spec.task == "dr" and spec.loss == "gkl"
    assert spec.nu_x == 1e5 and spec.nu_z == 0.01
    assert spec.sigma_x == 5.0 and spec.knn_k == 10
    assert spec.model_mode == "free_coordinates" and spec.output_dim == 2
    assert spec.calibration == "binary_search" and spec.epochs == 500
    assert spec.base_lr == 0.02 and spec.batch_size == 1024 and spec.init_std == 1.0
    assert dr_defaults(epochs=7, knn_k=3).epochs == 7
    assert DR_SIGMA_X_PRESETS == {"mnist": 5.0, "fmnist": 20.0}


def test_ge_defaults_and_presets():
    spec = ge_defaults()
    assert spec.task == "ge" and spec.output_dim == 128
    assert spec.loss == "bce" and spec.epochs == 300
    assert spec.calibration == "binary_search" and spec.sigma_x is None
    cora = ge_defaults(preset="cora")
    assert cora.nu_z == 1e-3 and cora.alpha2 == 1.0
    cite = ge_defaults(preset="citeseer")
    assert cite.nu_z == 3e-3 and cite.alpha2 == 0.5
    pub = ge_defaults(preset="pubmed")
    assert pub.nu_z == 3e-3 and pub.alpha2 == 50.0
    assert ge_defaults(preset="cora", alpha2=0.25).alpha2 == 0.25
    with pytest.raises(ValueError, match="preset"):
        ge_defaults(preset="wiki")
    assert set(GE_PRESETS) == {"cora", "citeseer", "pubmed"}


def test_kd_defaults_table():
    spec = kd_defaults()
    assert spec.task == "kd" and spec.loss == "bce"
    assert spec.nu_x == 100.0 and spec.nu_z == 100.0
    assert spec.sigma_x == 1.0 and spec.sigma_z == 1.0
    assert spec.latent_distance == "one_minus_cosine"
    assert spec.model_mode == "encoder" and spec.output_dim == 64


def test_run_dr_task_recovers_cluster_structure():
    rng = np.random.default_rng(0)
    x = cluster_data(rng)
    spec = dr_defaults(sigma_x=None, knn_k=5, epochs=60, base_lr=0.05, seed=2)
    result = run_dr_task(x, spec)
    assert result.embedding.shape == (60, 2)
    assert len(result.log) == 60
    assert np.isfinite(result.embedding).all()
    assert trustworthiness(x, result.embedding, k=5) > 0.75
    again = run_dr_task(x, spec)
    assert np.array_equal(result.embedding, again.embedding)


def test_run_ge_task_fuses_graph_and_features():
    rng = np.random.default_rng(1)
    x = cluster_data(rng, n_per=15, centers=2)
    edges = []
    for block in (range(0, 15), range(15, 30)):
        nodes = list(block)
        for i in range(len(nodes) - 1):
            edges.append((nodes[i], nodes[i + 1]))
    spec = ge_defaults(output_dim=8, knn_k=4, epochs=20, base_lr=0.05, seed=3)
    result = run_ge_task(x, edges, spec)
    assert result.embedding.shape == (30, 8)
    assert np.isfinite(result.embedding).all()
    again = run_ge_task(x, edges, spec)
    assert np.array_equal(result.embedding, again.embedding)


def test_run_ge_task_requires_edges():
    x = np.random.default_rng(2).normal(size=(10, 3))
    with pytest.raises(ValueError, match="no edges"):
        run_ge_task(x, [], ge_defaults(output_dim=4, knn_k=2, epochs=1))
    with pytest.raises(ValueError, match="no edges"):
        run_ge_task(x, [(3, 3)], ge_defaults(output_dim=4, knn_k=2, epochs=1))


def test_run_kd_task_trains_student_encoder():
    rng = np.random.default_rng(4)
    teacher = cluster_data(rng, n_per=12, dim=6, centers=3)
    student_in = teacher @ rng.normal(size=(6, 10)) + rng.normal(scale=0.01, size=(36, 10))
    spec = kd_defaults(hidden_widths=(16,), output_dim=4, epochs=10, base_lr=0.01, seed=5)
    result = run_kd_task(student_in, teacher, spec)
    assert result.embedding.shape == (36, 4)
    assert result.model.mode == "encoder"
    assert np.isfinite(result.embedding).all()
    again = run_kd_task(student_in, teacher, spec)
    assert np.array_equal(result.embedding, again.embedding)
    assert result.log[-1].loss < result.log[0].loss


def test_run_kd_task_validation():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(10, 4))
    with pytest.raises(ValueError, match="teacher rows"):
        run_kd_task(x, rng.normal(size=(8, 4)), kd_defaults(hidden_widths=(8,), epochs=1))
    with pytest.raises(ValueError, match="encoder"):
        run_kd_task(x, x, kd_defaults(model_mode="free_coordinates", epochs=1))


def test_kd_row_block_mode_matches_dense_mode(monkeypatch):
    rng = np.random.default_rng(6)
    teacher = rng.normal(size=(24, 5))
    student_in = rng.normal(size=(24, 7))
    spec = kd_defaults(hidden_widths=(12,), output_dim=3, epochs=4, base_lr=0.01, seed=7)

    dense = run_kd_task(student_in, teacher, spec)
    monkeypatch.setattr(tasks, "DENSE_TARGET_LIMIT", 8)
    blocked = run_kd_task(student_in, teacher, spec)
    # the dense path symmetrizes the teacher distances before calibration,
    # the block path works row-wise; both land within float rounding
    assert np.allclose(dense.embedding, blocked.embedding, rtol=1e-6, atol=1e-8)


def test_dr_accepts_data_matrix_wrapper():
    from geosim.graphs import DataMatrix

    rng = np.random.default_rng(7)
    x = DataMatrix(values=cluster_data(rng, n_per=10, centers=2))
    result = run_dr_task(x, dr_defaults(sigma_x=None, knn_k=3, epochs=5, seed=0))
    assert result.embedding.shape == (20, 2)
