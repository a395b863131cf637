import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import quadratic_oracle, ridge_normal_equations
from wonder import DesignMatrix, DomainError, SingularSystemError, mp_stieltjes_isotropic, ridge_fit, ridge_path
from wonder.ridge import finite_sample_moments, finite_sample_weights, oracle_mse_of_weights, trace_functionals


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def test_design_reconstruction_and_readonly():
    X = np.random.default_rng(0).standard_normal((40, 7))
    d = DesignMatrix(X)
    assert rel(d.reconstruct(), X) < 1e-8
    with pytest.raises(ValueError):
        d.s[0] = 1.0
    assert DesignMatrix.wrap(d) is d


def test_identity_design():
    p = 6
    Y = np.arange(1.0, p + 1)
    fit = ridge_fit(np.eye(p), Y, 1.0)
    np.testing.assert_allclose(fit.coef, Y / (1 + p), rtol=1e-12)


def test_huge_lambda_shrinks_to_zero():
    rng = np.random.default_rng(1)
    X, Y = rng.standard_normal((30, 5)), rng.standard_normal(30)
    fit = ridge_fit(X, Y, 1e10)
    # |(X^T X + n lam)^{-1} X^T Y| <= |X^T Y| / (n lam)
    assert np.linalg.norm(fit.coef) <= np.linalg.norm(X.T @ Y) / (30 * 1e10)


def test_against_normal_equations():
    rng = np.random.default_rng(2)
    X, Y = rng.standard_normal((50, 10)), rng.standard_normal(50)
    assert rel(ridge_fit(X, Y, 0.3).coef, ridge_normal_equations(X, Y, 0.3)) < 1e-8


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 100), p=st.integers(1, 100), lam=st.floats(1e-3, 1e3), seed=st.integers(0, 2**32 - 1))
def test_svd_path_agrees_with_dense_solve(n, p, lam, seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.standard_normal((n, p)), rng.standard_normal(n)
    assert rel(ridge_fit(X, Y, lam).coef, ridge_normal_equations(X, Y, lam)) < 1e-8


def test_path_matches_single_fits():
    rng = np.random.default_rng(3)
    X, Y = rng.standard_normal((25, 40)), rng.standard_normal(25)
    lams = [0.01, 0.5, 7.0]
    path = ridge_path(X, Y, lams)
    for row, lam in zip(path, lams):
        np.testing.assert_allclose(row, ridge_fit(X, Y, lam).coef, rtol=1e-12, atol=1e-14)


def test_ridge_errors():
    X = np.ones((5, 2))
    with pytest.raises(DomainError):
        ridge_fit(X, np.ones(4), 1.0)
    with pytest.raises(DomainError):
        ridge_fit(X, np.ones(5), 0.0)
    with pytest.raises(DomainError):
        DesignMatrix(np.array([[np.nan, 1.0]]))


def test_zero_response():
    fit = ridge_fit(np.random.default_rng(4).standard_normal((8, 3)), np.zeros(8), 1.0)
    np.testing.assert_array_equal(fit.coef, 0.0)


# --- trace functionals -----------------------------------------------------


def test_trace_functionals_identity_spectrum():
    n = p = 4
    X = np.sqrt(n) * np.eye(n)
    m, mp = trace_functionals(X, 1.0)
    assert (m, mp) == pytest.approx((0.5, 0.25), abs=1e-14)


def test_trace_functionals_rank_deficient():
    rng = np.random.default_rng(5)
    n, p, lam = 4, 10, 2.0
    X = rng.standard_normal((n, p))
    m, mp = trace_functionals(X, lam)
    ell = np.linalg.eigvalsh(X.T @ X / n)
    assert m == pytest.approx(np.mean(1 / (ell + lam)), rel=1e-10)
    # six exact zero modes each contribute 1/lam
    nonzero = np.sort(ell)[p - n:]
    assert m == pytest.approx((np.sum(1 / (nonzero + lam)) + (p - n) / lam) / p, rel=1e-10)


def test_trace_functionals_marchenko_pastur():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((1000, 1000))
    m, _ = trace_functionals(X, 1.0)
    assert m == pytest.approx(mp_stieltjes_isotropic(1, 1), abs=0.02)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 30), p=st.integers(1, 30), lam=st.floats(1e-3, 1e3), seed=st.integers(0, 10**6))
def test_trace_jensen(n, p, lam, seed):
    X = np.random.default_rng(seed).standard_normal((n, p))
    m, mp = trace_functionals(X, lam)
    assert mp >= m * m * (1 - 1e-12)


# --- finite-sample optimal weights -----------------------------------------


def test_single_shard_no_noise():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((40, 5))
    beta = rng.standard_normal(5)
    w, mse, _ = finite_sample_weights([X], beta, 0.0, 1e-10)
    assert w[0] == pytest.approx(1.0, abs=1e-6)
    assert mse <= 1e-6 * beta @ beta


def test_identical_shards_get_equal_weights():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((20, 4))
    beta = rng.standard_normal(4)
    w, _, _ = finite_sample_weights([X, X], beta, 1.0, 0.5)
    assert w[0] == pytest.approx(w[1], abs=1e-10)


def test_quadratic_oracle_agreement():
    rng = np.random.default_rng(9)
    Xs = [rng.standard_normal((30, 5)), rng.standard_normal((30, 5))]
    beta = rng.standard_normal(5) / np.sqrt(5)
    lams = [0.4, 0.9]
    w, mse, mom = finite_sample_weights(Xs, beta, 1.0, lams)
    w_ref, M = quadratic_oracle(Xs, beta, 1.0, lams)
    np.testing.assert_allclose(w, w_ref, atol=1e-8)
    assert mse == pytest.approx(M(w_ref), abs=1e-8)
    draws = rng.normal(0, 2, size=(1000, 2))
    assert all(M(w) <= M(d) + 1e-12 for d in draws)


def test_moment_invariants():
    rng = np.random.default_rng(10)
    Xs = [rng.standard_normal((n, 6)) for n in (4, 9, 30)]
    beta = rng.standard_normal(6)
    mom = finite_sample_moments(Xs, beta, 0.7, [0.2, 1.0, 3.0])
    np.testing.assert_allclose(mom.A, mom.A.T, atol=1e-14)
    assert np.linalg.eigvalsh(mom.A).min() >= -1e-12
    assert np.all(mom.R >= 0)
    assert np.all(mom.v**2 <= (beta @ beta) * np.diag(mom.A) * (1 + 1e-12))


def test_oracle_mse_of_weights():
    rng = np.random.default_rng(11)
    Xs = [rng.standard_normal((15, 3)) for _ in range(2)]
    beta = rng.standard_normal(3)
    w, mse, mom = finite_sample_weights(Xs, beta, 1.0, 0.5)
    assert oracle_mse_of_weights(mom, np.zeros(2), beta @ beta) == pytest.approx(beta @ beta)
    assert oracle_mse_of_weights(mom, w, beta @ beta) == pytest.approx(mse, abs=1e-10)
    assert mse <= beta @ beta
    with pytest.raises(DomainError):
        oracle_mse_of_weights(mom, np.ones(3), 1.0)


def test_oracle_mse_against_monte_carlo():
    rng = np.random.default_rng(12)
    n, p, k = 60, 8, 3
    Xs = [rng.standard_normal((n, p)) for _ in range(k)]
    beta = rng.standard_normal(p) / np.sqrt(p)
    lams = [0.1, 0.3, 1.0]
    w = np.array([0.5, 0.4, 0.3])
    _, _, mom = finite_sample_weights(Xs, beta, 1.0, lams)
    designs = [DesignMatrix(X) for X in Xs]
    errs = np.empty(2000)
    for r in range(errs.size):
        est = sum(
            wi * ridge_fit(d, d.X @ beta + rng.standard_normal(n), lam).coef
            for wi, d, lam in zip(w, designs, lams)
        )
        errs[r] = np.sum((est - beta) ** 2)
    se = errs.std(ddof=1) / np.sqrt(errs.size)
    assert abs(errs.mean() - oracle_mse_of_weights(mom, w, beta @ beta)) <= 3 * se


def test_singular_system_raises():
    X = np.zeros((5, 2))
    with pytest.raises(SingularSystemError):
        finite_sample_weights([X], np.ones(2), 0.0, 1.0)


def test_mse_star_nonincreasing_when_adding_machines():
    # a third machine can always be given weight 0, so it cannot hurt
    rng = np.random.default_rng(13)
    X = rng.standard_normal((120, 6))
    beta = rng.standard_normal(6) / np.sqrt(6)
    blocks = np.array_split(np.arange(120), 4)
    _, mse2, _ = finite_sample_weights([X[blocks[0]], X[blocks[1]]], beta, 1.0, 0.5)
    _, mse3, _ = finite_sample_weights([X[blocks[0]], X[blocks[1]], X[blocks[2]]], beta, 1.0, 0.5)
    assert mse3 <= mse2 + 1e-14


def test_weight_sum_above_one_random_effects():
    sums = []
    n, p, k, alpha2 = 4000, 400, 5, 1.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, p))
        beta = rng.standard_normal(p) * np.sqrt(alpha2 / p)
        shards = np.array_split(X, k)
        lam = p / (shards[0].shape[0] * alpha2)
        w, _, _ = finite_sample_weights(shards, beta, 1.0, lam)
        sums.append(w.sum())
    assert np.mean(np.array(sums) > 1) >= 0.95
