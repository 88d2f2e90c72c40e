import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsne_dynamics import kernels
from tsne_dynamics.affinity import joint_affinities, kl_divergence, q_matrix
from tsne_dynamics.engine import (
    EmbeddingState,
    Stage,
    TuningParams,
    embed_step,
    ee_step,
    init_random,
    init_spectral,
    run,
    update_matrix_form,
    update_per_point,
)
from tsne_dynamics.errors import DivergenceError
from tsne_dynamics.spectral import connected_components, laplacian

from oracles import block_affinity, random_affinity, step_loop


def params(**kw):
    base = dict(alpha=4.0, h=1.0, h_prime=1.0, K0=5, K1=5, sigma_n=0.01)
    base.update(kw)
    return TuningParams(**base)


def test_init_random_column_norms():
    s = init_random(200, 0.37, seed=3)
    np.testing.assert_allclose(np.linalg.norm(s.coords, axis=0), 0.37, rtol=1e-14)
    assert s.k == 0 and s.stage is Stage.EARLY_EXAGGERATION


def test_init_random_deterministic():
    a, b = init_random(50, 1.0, 9), init_random(50, 1.0, 9)
    assert a.coords.tobytes() == b.coords.tobytes()
    assert init_random(50, 1.0, 10).coords.tobytes() != a.coords.tobytes()


def test_init_random_max_coordinate():
    n = 1000
    sigma = math.log(n) ** -2
    hits = sum(
        np.abs(init_random(n, sigma, seed).coords).max() < 5 * sigma / math.sqrt(n)
        for seed in range(100)
    )
    assert hits >= 95


def test_init_random_columns_independent():
    # the two columns come from separate streams, so they are not copies
    s = init_random(500, 1.0, 0)
    assert abs(np.corrcoef(s.coords.T)[0, 1]) < 0.2


def test_init_spectral_block_null_space():
    P, _ = block_affinity([10, 12, 8], np.random.default_rng(0))
    s = init_spectral(P)
    assert np.linalg.norm(laplacian(P) @ s.coords, axis=0).max() <= 1e-8


def test_init_spectral_connected_is_centered():
    P = random_affinity(20, np.random.default_rng(1))
    s = init_spectral(P, sigma_n=0.5)
    assert np.abs(s.coords.sum(axis=0)).max() <= 1e-8
    np.testing.assert_allclose(np.linalg.norm(s.coords, axis=0), 0.5, rtol=1e-12)


def test_init_spectral_sign_separates_two_clusters():
    rng = np.random.default_rng(2)
    P, _ = block_affinity([13, 17], rng)
    perm = rng.permutation(30)
    P = P[np.ix_(perm, perm)]
    lab = connected_components(P).labels
    col = init_spectral(P).coords[:, 0]
    signs = (col > 0).astype(int)
    assert np.array_equal(signs, lab) or np.array_equal(signs, 1 - lab)


def test_ee_step_collapsed_map_is_fixed():
    P = random_affinity(8, np.random.default_rng(3))
    s = EmbeddingState(np.tile([[0.3, -0.2]], (8, 1)))
    out = ee_step(s, P, 12.0, 5.0)
    np.testing.assert_array_equal(out.coords, s.coords)
    assert out.k == 1


def test_ee_step_zero_step_is_identity():
    rng = np.random.default_rng(4)
    P = random_affinity(8, rng)
    s = EmbeddingState(rng.standard_normal((8, 2)))
    np.testing.assert_array_equal(ee_step(s, P, 3.0, 0.0).coords, s.coords)


def test_step_forms_agree_with_loop_oracle():
    rng = np.random.default_rng(5)
    P = random_affinity(10, rng)
    Y = rng.standard_normal((10, 2))
    want = step_loop(P, Y, 3.0, 0.7)
    np.testing.assert_allclose(update_matrix_form(P, Y, 3.0, 0.7), want, rtol=0, atol=1e-12)
    np.testing.assert_allclose(update_per_point(P, Y, 3.0, 0.7), want, rtol=0, atol=1e-12)
    np.testing.assert_allclose(ee_step(EmbeddingState(Y), P, 3.0, 0.7).coords, want,
                               rtol=0, atol=1e-12)


def test_step_backends_agree():
    rng = np.random.default_rng(6)
    P = random_affinity(40, rng)
    Y = rng.standard_normal((40, 2))
    a = kernels.tsne_step_numba(P, Y, 5.0, 2.0)
    b = kernels.tsne_step_numpy(P, Y, 5.0, 2.0)
    np.testing.assert_allclose(a[0], b[0], rtol=0, atol=1e-12)
    assert a[1] == pytest.approx(b[1], rel=1e-13)
    assert a[2] == pytest.approx(b[2], rel=1e-13)
    assert kernels.max_sq_dist_numba(Y) == pytest.approx(kernels.max_sq_dist_numpy(Y), rel=1e-13)


def test_embed_step_is_ee_step_at_alpha_one():
    rng = np.random.default_rng(7)
    P = random_affinity(12, rng)
    s = EmbeddingState(rng.standard_normal((12, 2)))
    a = embed_step(s, P, 0.8)
    b = ee_step(s, P, 1.0, 0.8)
    np.testing.assert_allclose(a.coords, b.coords, rtol=0, atol=1e-14)
    assert a.stage is Stage.EMBEDDING


def test_embed_step_two_points_at_fixed_point():
    P = np.array([[0.0, 0.5], [0.5, 0.0]])
    s = EmbeddingState(np.array([[0.0, 0.0], [1.0, 2.0]]), Stage.EMBEDDING)
    np.testing.assert_array_equal(embed_step(s, P, 3.0).coords, s.coords)


def test_embed_step_decreases_kl():
    rng = np.random.default_rng(8)
    X = np.vstack([rng.standard_normal((15, 5)), rng.standard_normal((15, 5)) + 4])
    P, _ = joint_affinities(X, 8.0)
    s = EmbeddingState(rng.standard_normal((30, 2)), Stage.EMBEDDING)
    kl = [kl_divergence(P, q_matrix(s))]
    for _ in range(50):
        s = embed_step(s, P, 1.0)
        kl.append(kl_divergence(P, q_matrix(s)))
    assert np.all(np.diff(kl) <= 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 15), st.floats(1.0, 50.0), st.floats(0.0, 5.0), st.integers(0, 10 ** 6))
def test_step_preserves_centroid(n, alpha, h, seed):
    rng = np.random.default_rng(seed)
    P = random_affinity(n, rng)
    Y = rng.standard_normal((n, 2))
    out = kernels.tsne_step(P, Y, alpha, h)[0]
    np.testing.assert_allclose(out.mean(axis=0), Y.mean(axis=0), rtol=0, atol=1e-12 * (1 + h * alpha))


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 12), st.floats(-50, 50), st.floats(-50, 50), st.integers(0, 10 ** 6))
def test_step_is_translation_equivariant(n, tx, ty, seed):
    rng = np.random.default_rng(seed)
    P = random_affinity(n, rng)
    Y = rng.standard_normal((n, 2))
    shift = np.array([tx, ty])
    a = kernels.tsne_step(P, Y, 2.0, 1.0)[0] + shift
    b = kernels.tsne_step(P, Y + shift, 2.0, 1.0)[0]
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)


def test_state_is_immutable():
    s = EmbeddingState(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        s.coords[0, 0] = 1.0
    with pytest.raises(ValueError):
        EmbeddingState(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        EmbeddingState(np.array([[np.nan, 0.0]] * 3))


@pytest.mark.parametrize("bad", [
    dict(alpha=0.5), dict(h=-1.0), dict(h_prime=-0.1), dict(sigma_n=0.0),
    dict(K0=-1), dict(delta=1.0), dict(perplexity=1.0),
])
def test_tuning_params_validation(bad):
    with pytest.raises(ValueError):
        params(**bad)


def test_run_without_iterations_keeps_only_init():
    P = random_affinity(10, np.random.default_rng(9))
    log = run(P, params(K0=0, K1=0))
    assert log.snapshot_ks == [0]
    assert log.final is log.initial
    assert log.diameter.shape == (1,)


def test_run_is_deterministic():
    P = random_affinity(25, np.random.default_rng(10))
    a = run(P, params(K0=8, K1=12), embed_stride=3)
    b = run(P, params(K0=8, K1=12), embed_stride=3)
    assert a.snapshot_ks == b.snapshot_ks
    for x, y in zip(a.snapshots, b.snapshots):
        assert x.coords.tobytes() == y.coords.tobytes()
    assert a.diameter.tobytes() == b.diameter.tobytes()


def test_run_matches_manual_steps():
    rng = np.random.default_rng(11)
    P = random_affinity(15, rng)
    p = params(K0=4, K1=3, alpha=6.0, h=2.0, h_prime=1.5)
    log = run(P, p, ee_stride=1, embed_stride=1)
    s = log.initial
    for _ in range(4):
        s = ee_step(s, P, 6.0, 2.0)
    np.testing.assert_array_equal(s.coords, log.end_of_ee.coords)
    for _ in range(3):
        s = embed_step(s, P, 1.5)
    np.testing.assert_array_equal(s.coords, log.final.coords)
    assert [x.stage for x in log.snapshots] == [Stage.EARLY_EXAGGERATION] * 5 + [Stage.EMBEDDING] * 3
    assert log.diameter[-1] == pytest.approx(math.dist(*_farthest(log.final.coords)), rel=1e-12)


def _farthest(Y):
    D = ((Y[:, None] - Y[None]) ** 2).sum(-1)
    i, j = np.unravel_index(D.argmax(), D.shape)
    return Y[i], Y[j]


def test_run_pins_key_snapshots_and_thins():
    P = random_affinity(10, np.random.default_rng(12))
    log = run(P, params(K0=7, K1=50), ee_stride=3, embed_stride=4, max_snapshots=8)
    ks = log.snapshot_ks
    assert {0, 7, 57} <= set(ks)
    assert len(ks) <= 8
    assert ks == sorted(ks)


def test_run_accepts_given_init():
    P = random_affinity(6, np.random.default_rng(13))
    Y0 = np.arange(12, dtype=float).reshape(6, 2) * 1e-3
    log = run(P, params(K0=0, K1=0), init=Y0)
    np.testing.assert_array_equal(log.initial.coords, Y0)
    with pytest.raises(ValueError):
        run(P, params(), init=np.zeros((5, 2)))
    with pytest.raises(ValueError):
        run(P, params(), init="pca")


def test_run_spectral_init_metadata():
    P, _ = block_affinity([5, 5], np.random.default_rng(14))
    log = run(P, params(K0=1, K1=0, sigma_n=0.2), init="spectral")
    assert log.metadata["init"] == "spectral"
    assert log.metadata["generator"]
    np.testing.assert_allclose(np.linalg.norm(log.initial.coords, axis=0), 0.2, rtol=1e-12)


def test_divergence_is_reported():
    rng = np.random.default_rng(15)
    P = random_affinity(20, rng)
    p = params(alpha=1e6, h=1e12, K0=200, K1=0, sigma_n=1.0)
    with pytest.raises(DivergenceError) as err:
        run(P, p)
    assert err.value.iteration == 1


def test_params_replace_revalidates():
    p = params()
    assert dataclasses.replace(p, K0=3).K0 == 3
    with pytest.raises(ValueError):
        dataclasses.replace(p, alpha=0.0)
