"""Ridge fits through a cached SVD, trace functionals, and finite-sample optimal weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularSystemError


def _check_lambda(lam):
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0:
        raise DomainError(f"ridge parameter must be positive, got {lam!r}")
    return lam


class DesignMatrix:
    """An ``n x p`` design with its thin SVD computed once at construction.

    The factors are read-only, so one instance can be shared between threads
    and reused for any number of ridge parameters.
    """

    def __init__(self, X):
        X = np.array(X, dtype=float, copy=True)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DomainError(f"design must be a nonempty 2-d array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DomainError("design contains NaN or infinite entries")
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
        for arr in (X, U, s, Vt):
            arr.setflags(write=False)
        self.X = X
        self.U = U
        self.s = s
        self.Vt = Vt

    @classmethod
    def wrap(cls, X):
        return X if isinstance(X, cls) else cls(X)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def eigenvalues(self):
        """All ``p`` eigenvalues of ``X^T X / n``, zeros included when ``n < p``."""
        ell = np.zeros(self.p)
        ell[: self.s.size] = self.s**2 / self.n
        return ell

    def reconstruct(self):
        return (self.U * self.s) @ self.Vt


@dataclass(frozen=True)
class RidgeFit:
    coef: np.ndarray
    lam: float
    n: int


def _rhs(design, Y):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 1 or Y.shape[0] != design.n:
        raise DomainError(f"response has shape {Y.shape}, expected ({design.n},)")
    return Y


def ridge_fit(X, Y, lam):
    """Ridge estimator ``(X^T X + n lam I)^{-1} X^T Y`` computed in the SVD basis."""
    design = DesignMatrix.wrap(X)
    Y = _rhs(design, Y)
    lam = _check_lambda(lam)
    s = design.s
    coef = design.Vt.T @ (s / (s**2 + design.n * lam) * (design.U.T @ Y))
    return RidgeFit(coef=coef, lam=lam, n=design.n)


def ridge_path(X, Y, lams):
    """Coefficients for every ``lam`` in ``lams`` from a single factorization.

    Returns an array of shape ``(len(lams), p)``.
    """
    design = DesignMatrix.wrap(X)
    Y = _rhs(design, Y)
    lams = np.array([_check_lambda(lam) for lam in np.atleast_1d(lams)])
    s = design.s
    uty = design.U.T @ Y
    shrink = s[None, :] / (s[None, :] ** 2 + design.n * lams[:, None])
    return (shrink * uty[None, :]) @ design.Vt


def trace_functionals(X, lam):
    """Estimates of ``m(-lam)`` and ``m'(-lam)`` from the shard spectrum.

    ``p^{-1} tr (Sigma_hat + lam I)^{-1}`` and ``p^{-1} tr (Sigma_hat + lam I)^{-2}``.
    """
    design = DesignMatrix.wrap(X)
    lam = _check_lambda(lam)
    inv = 1.0 / (design.eigenvalues + lam)
    return float(inv.mean()), float((inv**2).mean())


@dataclass(frozen=True)
class FiniteSampleMoments:
    """``v_i = b^T Q_i b``, ``A_ij = b^T Q_i Q_j b`` and the noise terms ``R_i``."""

    v: np.ndarray
    A: np.ndarray
    R: np.ndarray

    @property
    def k(self):
        return self.v.size

    def gram(self):
        return self.A + np.diag(self.R)

    def optimal_weights(self):
        M = self.gram()
        try:
            chol = np.linalg.cholesky(M)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                "A + R is singular; optimal weights are not unique"
            ) from exc
        return np.linalg.solve(chol.T, np.linalg.solve(chol, self.v))


def _shrunk_beta(design, beta, lam):
    # Q beta with Q = (Sigma_hat + lam I)^{-1} Sigma_hat; null-space modes map to 0
    ell = design.s**2 / design.n
    return design.Vt.T @ (ell / (ell + lam) * (design.Vt @ beta))


def finite_sample_moments(shards, beta, sigma2, lambdas):
    """Exact ``v``, ``A``, ``R`` for fixed designs, coefficients and noise level."""
    designs = [DesignMatrix.wrap(X) for X in shards]
    lambdas = [_check_lambda(lam) for lam in np.atleast_1d(lambdas)]
    if len(lambdas) == 1 and len(designs) > 1:
        lambdas = lambdas * len(designs)
    if len(lambdas) != len(designs):
        raise DomainError("need one ridge parameter per shard")
    beta = np.asarray(beta, dtype=float)
    if sigma2 < 0:
        raise DomainError("noise variance must be nonnegative")
    for d in designs:
        if d.p != beta.size:
            raise DomainError(f"shard has {d.p} columns but beta has {beta.size} entries")
    B = np.column_stack([_shrunk_beta(d, beta, lam) for d, lam in zip(designs, lambdas)])
    v = B.T @ beta
    A = B.T @ B
    R = np.empty(len(designs))
    for i, (d, lam) in enumerate(zip(designs, lambdas)):
        ell = d.s**2 / d.n
        R[i] = sigma2 / d.n * np.sum(ell / (ell + lam) ** 2)
    return FiniteSampleMoments(v=v, A=A, R=R)


def finite_sample_weights(shards, beta, sigma2, lambdas):
    """Optimal combination weights when ``beta`` and ``sigma2`` are known.

    Returns
    -------
    w_star : ndarray
        ``(A + R)^{-1} v``.
    mse_star : float
        ``||beta||^2 - v^T (A + R)^{-1} v``, the smallest achievable
        ``E ||sum_i w_i beta_hat_i - beta||^2`` over the noise.
    moments : FiniteSampleMoments
    """
    moments = finite_sample_moments(shards, beta, sigma2, lambdas)
    w = moments.optimal_weights()
    beta = np.asarray(beta, dtype=float)
    mse = float(beta @ beta - moments.v @ w)
    return w, mse, moments


def oracle_mse_of_weights(moments, w, beta_norm2):
    """``w^T (A + R) w - 2 v^T w + ||beta||^2`` for arbitrary weights ``w``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (moments.k,):
        raise DomainError(f"weights have shape {w.shape}, expected ({moments.k},)")
    return float(w @ moments.gram() @ w - 2.0 * moments.v @ w + beta_norm2)
