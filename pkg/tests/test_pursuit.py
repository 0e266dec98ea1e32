import numpy as np
import pytest

from oracles import lasso_by_sign_enumeration, lasso_objective
from slicedict.pursuit import (
    Needle,
    PursuitConfig,
    gram,
    kkt_residual,
    lasso_solve,
    lasso_solve_batch,
    matrix_to_needles,
    needles_to_matrix,
)


def _random_dict(rng, n, m):
    D = rng.standard_normal((n, m))
    return D / np.linalg.norm(D, axis=0)


def test_scalar_soft_threshold_case():
    # one unit atom, b = 2, lam = 0.5: minimizer is 2 - 0.5 = 1.5
    nd = lasso_solve(np.array([[1.0]]), np.array([2.0]), PursuitConfig(lam=0.5))
    np.testing.assert_allclose(nd.to_dense(), [1.5], atol=1e-12)
    assert nd.converged


def test_zero_lambda_reduces_to_least_squares():
    rng = np.random.default_rng(21)
    for _ in range(5):
        D = _random_dict(rng, 12, 6)
        b = rng.standard_normal(12)
        nd = lasso_solve(D, b, PursuitConfig(lam=0.0, max_sweeps=2000, tol=1e-12, kkt_tol=1e-9))
        expected, *_ = np.linalg.lstsq(D, b, rcond=None)
        np.testing.assert_allclose(nd.to_dense(), expected, atol=1e-7)


def test_large_lambda_gives_zero():
    rng = np.random.default_rng(22)
    D = _random_dict(rng, 8, 5)
    b = rng.standard_normal(8)
    lam = float(np.abs(D.T @ b).max()) * 1.01
    nd = lasso_solve(D, b, PursuitConfig(lam=lam))
    assert nd.indices.size == 0
    assert nd.converged


def test_kkt_certificate_on_random_instances():
    # operating envelope of the training engine: moderate overcompleteness
    # and lam large enough that the solution face is nondegenerate
    rng = np.random.default_rng(23)
    cfg_tpl = dict(max_sweeps=200, tol=1e-6, kkt_tol=1e-6)
    for trial in range(100):
        n = int(rng.integers(4, 20))
        m = int(rng.integers(2, 2 * n + 1))
        D = _random_dict(rng, n, m)
        b = rng.standard_normal(n)
        lam = float(rng.uniform(0.05, 0.5))
        nd = lasso_solve(D, b, PursuitConfig(lam=lam, **cfg_tpl))
        assert nd.converged, f"trial {trial} did not certify"
        assert kkt_residual(D, b, nd.to_dense(), lam) <= 1e-6


def test_matches_sign_enumeration_oracle():
    rng = np.random.default_rng(24)
    for trial in range(30):
        n = int(rng.integers(3, 9))
        m = int(rng.integers(1, 5))  # oracle enumerates 3**m patterns
        D = _random_dict(rng, n, m)
        b = rng.standard_normal(n)
        lam = float(rng.uniform(0.02, 0.4))
        nd = lasso_solve(D, b, PursuitConfig(lam=lam))
        _, best_obj = lasso_by_sign_enumeration(D, b, lam)
        obj = lasso_objective(D, b, lam, nd.to_dense())
        assert obj <= best_obj + 1e-8, f"trial {trial}: {obj} vs oracle {best_obj}"


def test_oracle_solution_passes_kkt():
    # cross-check the two oracles against each other
    rng = np.random.default_rng(25)
    for _ in range(10):
        D = _random_dict(rng, 6, 3)
        b = rng.standard_normal(6)
        lam = 0.15
        alpha, _ = lasso_by_sign_enumeration(D, b, lam)
        assert kkt_residual(D, b, alpha, lam) <= 1e-7


def test_batch_agrees_with_single_solves():
    rng = np.random.default_rng(26)
    D = _random_dict(rng, 9, 12)
    B = rng.standard_normal((9, 7))
    cfg = PursuitConfig(lam=0.1)
    A, converged = lasso_solve_batch(D, B, cfg)
    assert converged
    for i in range(B.shape[1]):
        nd = lasso_solve(D, B[:, i], cfg)
        np.testing.assert_allclose(A[:, i], nd.to_dense(), atol=1e-9)


def test_warm_start_preserves_solution():
    rng = np.random.default_rng(27)
    D = _random_dict(rng, 10, 14)
    B = rng.standard_normal((10, 5))
    cfg = PursuitConfig(lam=0.2)
    G = gram(D)
    A1, _ = lasso_solve_batch(D, B, cfg, G=G)
    A2, converged = lasso_solve_batch(D, B, cfg, G=G, warm=A1)
    assert converged
    np.testing.assert_allclose(A2, A1, atol=1e-10)


def test_unconverged_flag_when_starved():
    rng = np.random.default_rng(28)
    # highly coherent dictionary, one sweep only: no certificate possible
    D = _random_dict(rng, 6, 30)
    b = rng.standard_normal(6)
    nd = lasso_solve(D, b, PursuitConfig(lam=0.01, max_sweeps=1, tol=1e-12))
    assert not nd.converged


def test_support_cap_keeps_largest_and_refits():
    # orthonormal atoms: plain solution is b itself, cap keeps top-k
    D = np.eye(4)
    b = np.array([0.3, -2.0, 1.0, 0.05])
    cfg = PursuitConfig(lam=0.0, max_nonzeros=2)
    nd = lasso_solve(D, b, cfg)
    np.testing.assert_allclose(nd.to_dense(), [0.0, -2.0, 1.0, 0.0], atol=1e-10)


def test_support_cap_tie_prefers_lower_index():
    D = np.eye(3)
    b = np.array([1.0, -1.0, 0.5])
    nd = lasso_solve(D, b, PursuitConfig(lam=0.0, max_nonzeros=1))
    np.testing.assert_allclose(nd.to_dense(), [1.0, 0.0, 0.0], atol=1e-12)


def test_support_cap_refit_matches_least_squares_oracle():
    rng = np.random.default_rng(29)
    for _ in range(10):
        D = _random_dict(rng, 10, 6)
        b = rng.standard_normal(10)
        k = 3
        nd = lasso_solve(D, b, PursuitConfig(lam=0.05, max_nonzeros=k))
        a = nd.to_dense()
        support = np.flatnonzero(a)
        assert support.size <= k
        if support.size:
            ref, *_ = np.linalg.lstsq(D[:, support], b, rcond=None)
            np.testing.assert_allclose(a[support], ref, atol=1e-8)


def test_support_cap_zero_empties_solution():
    rng = np.random.default_rng(30)
    D = _random_dict(rng, 5, 4)
    nd = lasso_solve(D, rng.standard_normal(5), PursuitConfig(lam=0.01, max_nonzeros=0))
    assert nd.indices.size == 0


def test_needle_matrix_round_trip():
    rng = np.random.default_rng(31)
    A = rng.standard_normal((6, 4))
    A[np.abs(A) < 0.7] = 0.0
    needles = matrix_to_needles(A)
    assert all(np.all(np.diff(nd.indices) > 0) for nd in needles)
    np.testing.assert_array_equal(needles_to_matrix(needles), A)
    # empty list needs an explicit dimension
    assert needles_to_matrix([], dim=6).shape == (6, 0)
    with pytest.raises(ValueError):
        needles_to_matrix([])


def test_needle_dense_round_trip():
    a = np.array([0.0, 1.5, 0.0, -0.25])
    nd = Needle.from_dense(a)
    assert nd.dim == 4
    np.testing.assert_array_equal(nd.indices, [1, 3])
    np.testing.assert_array_equal(nd.to_dense(), a)


def test_config_validation():
    with pytest.raises(ValueError):
        PursuitConfig(lam=-1.0)
    with pytest.raises(ValueError):
        PursuitConfig(max_sweeps=0)
    with pytest.raises(ValueError):
        PursuitConfig(max_nonzeros=-2)
    with pytest.raises(ValueError):
        lasso_solve_batch(np.eye(3), np.zeros((4, 2)), PursuitConfig())
