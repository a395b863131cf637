"""Reference computations that share no code with the package."""
import numpy as np
from scipy.optimize import brentq


def mp_m_bisection(gamma, lam):
    # positive root of m (1 - gamma + lam + gamma lam m) = 1, i.e. z = -lam in
    # the Marchenko-Pastur equation m = 1 / (1 - gamma - z - gamma z m)
    f = lambda m: m * (1.0 - gamma + lam + gamma * lam * m) - 1.0
    return brentq(f, 0.0, 1.0 / lam, xtol=1e-15, rtol=1e-15, maxiter=500)


def companion_bisection(atoms, masses, gamma, lam):
    atoms = np.asarray(atoms, float)
    masses = np.asarray(masses, float)
    f = lambda x: 1.0 - x - gamma * (1.0 - np.sum(masses * lam / (x * atoms + lam)))
    return brentq(f, 1e-14, 1.0, xtol=1e-15, rtol=1e-15, maxiter=500)


def ridge_normal_equations(X, Y, lam):
    n, p = X.shape
    return np.linalg.solve(X.T @ X + n * lam * np.eye(p), X.T @ Y)


def dense_loglik(X, Y, sigma2, alpha2):
    n, p = X.shape
    S = alpha2 / p * X @ X.T + np.eye(n)
    _, logdet = np.linalg.slogdet(S)
    return -0.5 * np.log(sigma2) - logdet / (2 * n) - Y @ np.linalg.solve(S, Y) / (2 * sigma2 * n)


def quadratic_oracle(Xs, beta, sigma2, lams):
    """Build M(w) = w^T (B^T B + R) w - 2 beta^T B w + |beta|^2 entrywise and return its argmin."""
    cols, R = [], []
    for X, lam in zip(Xs, lams):
        n, p = X.shape
        S = X.T @ X / n
        Q = np.linalg.solve(S + lam * np.eye(p), S)
        cols.append(Q @ beta)
        inv = np.linalg.inv(S + lam * np.eye(p))
        R.append(sigma2 / n * np.trace(inv @ inv @ S))
    B = np.column_stack(cols)
    M = B.T @ B + np.diag(R)
    lin = B.T @ beta
    w = np.linalg.solve(M, lin)

    def mse(v):
        v = np.asarray(v, float)
        return float(v @ M @ v - 2 * lin @ v + beta @ beta)

    return w, mse
