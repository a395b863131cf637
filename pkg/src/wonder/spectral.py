"""Random-matrix asymptotics for one-shot distributed ridge regression.

Closed forms for the Marchenko-Pastur Stieltjes transform at negative real
arguments, the companion fixed point for a general population spectrum,
the limiting moments ``V``, ``A``, ``R`` of the optimal-weight problem, and
the isotropic risk, efficiency and weight functions derived from them.

All functions are pure.  Scalar inputs for aspect ratios and regularization
parameters are accepted in ``[1e-10, 1e10]``; anything outside raises
:class:`~wonder.errors.DomainError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, SingularSystemError, SolverError

VALUE_MIN = 1e-10
VALUE_MAX = 1e10


def _check(name, value, lo=VALUE_MIN, hi=VALUE_MAX):
    value = float(value)
    if not math.isfinite(value) or value < lo or value > hi:
        raise DomainError(f"{name}={value!r} outside the accepted range [{lo:g}, {hi:g}]")
    return value


def _check_k(k):
    k = float(k)
    if not math.isfinite(k) or k < 1:
        raise DomainError(f"number of machines k={k!r} must be >= 1")
    return k


@dataclass(frozen=True)
class SpectralDistribution:
    """Discrete population spectral distribution ``H``.

    ``atoms`` are eigenvalue locations ``t_j >= 0`` and ``masses`` their
    probabilities.  Continuous spectra must be discretized by the caller.
    """

    atoms: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_1d(np.asarray(self.atoms, dtype=float))
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if atoms.shape != masses.shape or atoms.ndim != 1 or atoms.size == 0:
            raise DomainError("atoms and masses must be nonempty 1-d arrays of equal length")
        if np.any(~np.isfinite(atoms)) or np.any(atoms < 0):
            raise DomainError("atoms must be finite and nonnegative")
        if np.any(~np.isfinite(masses)) or np.any(masses <= 0):
            raise DomainError("masses must be finite and positive")
        if abs(masses.sum() - 1.0) > 1e-12:
            raise DomainError(f"masses sum to {masses.sum()!r}, not 1")
        atoms.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def point_mass(cls, t=1.0):
        return cls(np.array([t]), np.array([1.0]))

    @classmethod
    def from_eigenvalues(cls, eigenvalues):
        """Empirical spectral distribution of a covariance matrix."""
        vals, counts = np.unique(np.asarray(eigenvalues, dtype=float), return_counts=True)
        masses = counts / counts.sum()
        masses = masses / masses.sum()
        return cls(vals, masses)

    def expect(self, values):
        """``E_H[g(T)]`` for ``values = g(atoms)``."""
        return float(np.dot(self.masses, values))


@dataclass(frozen=True)
class SignalNoise:
    """Random-effects parameters: noise variance and signal-to-noise ratio."""

    sigma2: float
    alpha2: float

    def __post_init__(self):
        for name in ("sigma2", "alpha2"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"{name}={v!r} must be finite and nonnegative")
            object.__setattr__(self, name, v)

    @property
    def signal(self):
        """``sigma^2 * alpha^2``, the expected squared norm of the coefficients."""
        return self.sigma2 * self.alpha2


@dataclass(frozen=True)
class AsymptoticMoments:
    """Limits of ``v``, ``A`` and the diagonal of ``R`` for ``k`` shards.

    ``x`` holds the companion fixed points of each shard and ``signal`` the
    product ``sigma^2 alpha^2`` that the risk is measured against.
    """

    V: np.ndarray
    A: np.ndarray
    R: np.ndarray
    x: np.ndarray
    signal: float = field(default=0.0)

    @property
    def k(self):
        return self.V.size

    def _gram(self):
        M = self.A + np.diag(self.R)
        try:
            chol = np.linalg.cholesky(M)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("limiting system A + R is not positive definite") from exc
        return chol

    def weights(self):
        """Limiting optimal weights ``(A + R)^{-1} V``."""
        chol = self._gram()
        z = np.linalg.solve(chol, self.V)
        return np.linalg.solve(chol.T, z)

    def risk(self):
        """Limiting optimal risk ``sigma^2 alpha^2 - V^T (A + R)^{-1} V``."""
        return float(self.signal - self.V @ self.weights())

    def risk_of_weights(self, w):
        w = np.asarray(w, dtype=float)
        M = self.A + np.diag(self.R)
        return float(w @ M @ w - 2 * self.V @ w + self.signal)


# ---------------------------------------------------------------------------
# Marchenko-Pastur closed forms (identity population covariance)


def _mp_sqrt(gamma, lam):
    a = gamma - 1.0 - lam
    disc = a * a + 4.0 * lam * gamma
    assert disc >= 0.0
    return a, math.sqrt(disc)


def _mp_m(gamma, lam):
    a, sq = _mp_sqrt(gamma, lam)
    # two algebraically equal forms; pick the one without cancellation
    if a <= 0:
        return 2.0 / (sq - a)
    return (a + sq) / (2.0 * lam * gamma)


def _mp_one_minus_lm(gamma, lam):
    """``1 - lam * m_gamma(-lam)`` evaluated without cancellation."""
    _, sq = _mp_sqrt(gamma, lam)
    return 2.0 / (gamma + 1.0 + lam + sq)


def _mp_lm(gamma, lam):
    a, sq = _mp_sqrt(gamma, lam)
    if a <= 0:
        return 2.0 * lam / (sq - a)
    return (a + sq) / (2.0 * gamma)


def _mp_dm(gamma, lam):
    m = _mp_m(gamma, lam)
    _, sq = _mp_sqrt(gamma, lam)
    # implicit derivative of gamma*z*m^2 + (z + gamma - 1)*m + 1 = 0
    return m * (1.0 + gamma * m) / sq


def mp_stieltjes_isotropic(gamma, lam):
    """Stieltjes transform ``m_gamma(z)`` of the Marchenko-Pastur law at ``z = -lam``.

    Parameters
    ----------
    gamma : float
        Aspect ratio ``p / n``.
    lam : float
        Positive regularization level; the transform is evaluated at ``-lam``.

    Returns
    -------
    float
        ``lim p^{-1} tr (Sigma_hat + lam I)^{-1}`` for white data, always > 0.
    """
    gamma = _check("gamma", gamma)
    lam = _check("lambda", lam)
    return _mp_m(gamma, lam)


def mp_stieltjes_derivative_isotropic(gamma, lam):
    """``dm/dz`` of the Marchenko-Pastur transform at ``z = -lam``.

    Equals ``lim p^{-1} tr (Sigma_hat + lam I)^{-2}``; strictly positive.
    """
    gamma = _check("gamma", gamma)
    lam = _check("lambda", lam)
    return _mp_dm(gamma, lam)


# ---------------------------------------------------------------------------
# General population spectrum


def _companion_residual(H, gamma, lam, x):
    xt = x * H.atoms
    return 1.0 - x - gamma * H.expect(xt / (xt + lam))


def _companion_slope(H, gamma, lam, x):
    t = H.atoms
    return -1.0 - gamma * H.expect(lam * t / (x * t + lam) ** 2)


def solve_companion_x(H, gamma, lam, tol=1e-12, max_iter=10_000):
    """Solve ``1 - x = gamma * (1 - E_H[lam / (x T + lam)])`` for ``x`` in ``(0, 1]``.

    The residual is strictly decreasing in ``x`` with a sign change on
    ``(0, 1]``, so the root is bracketed from the start.  Iterates are a damped
    fixed-point map whose damping is set from the local slope; a step that
    leaves the current bracket or fails to shrink the residual is replaced by
    bisection.
    """
    gamma = _check("gamma", gamma)
    lam = _check("lambda", lam)
    r_hi = _companion_residual(H, gamma, lam, 1.0)
    if r_hi >= -tol:
        return 1.0
    lo, hi = 0.0, 1.0
    x = 1.0
    r = r_hi
    for _ in range(max_iter):
        slope = _companion_slope(H, gamma, lam, x)
        step = x - r / slope
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        r_new = _companion_residual(H, gamma, lam, step)
        if abs(r_new) > abs(r) and hi - lo > 0:
            mid = 0.5 * (lo + hi)
            step, r_new = mid, _companion_residual(H, gamma, lam, mid)
        x, r = step, r_new
        if r > 0:
            lo = x
        else:
            hi = x
        if abs(r) <= tol:
            return x
        if hi - lo <= 4 * np.finfo(float).eps * max(hi, 1e-300):
            break
    if abs(r) <= 1e-10:
        return x
    raise SolverError(
        f"companion fixed point did not converge (gamma={gamma}, lambda={lam})", residual=abs(r)
    )


def asymptotic_moments(H, gammas, lambdas, theta):
    """Population-form limits of ``v``, ``A`` and ``R`` for arbitrary shards.

    Parameters
    ----------
    H : SpectralDistribution
        Limiting spectrum of the population covariance.
    gammas, lambdas : sequence of float
        Per-shard aspect ratios ``p / n_i`` and ridge parameters.
    theta : SignalNoise

    Returns
    -------
    AsymptoticMoments
    """
    gammas = [_check("gamma", g) for g in np.atleast_1d(gammas)]
    lambdas = [_check("lambda", lam) for lam in np.atleast_1d(lambdas)]
    if len(gammas) != len(lambdas):
        raise DomainError("gammas and lambdas must have the same length")
    k = len(gammas)
    s = theta.signal
    t = H.atoms
    x = np.array([solve_companion_x(H, g, lam) for g, lam in zip(gammas, lambdas)])
    ratio = [x[i] * t / (x[i] * t + lambdas[i]) for i in range(k)]

    V = np.empty(k)
    A = np.empty((k, k))
    R = np.empty(k)
    for i in range(k):
        g, lam, xi = gammas[i], lambdas[i], x[i]
        e1 = H.expect(t / (xi * t + lam) ** 2)
        V[i] = s * H.expect(ratio[i])
        A[i, i] = s * (H.expect(ratio[i] ** 2) + lam**2 * g * xi * e1**2 / (1 + g * lam * e1))
        R[i] = theta.sigma2 * g * xi * e1 / (1 + lam * g * e1)
        for j in range(i):
            A[i, j] = A[j, i] = s * H.expect(ratio[i] * ratio[j])
    return AsymptoticMoments(V=V, A=A, R=R, x=x, signal=s)


def isotropic_moments(gammas, lambdas, theta):
    """Closed-form limits of ``v``, ``A``, ``R`` when ``Sigma = I``.

    Independent of :func:`solve_companion_x`; uses only the Marchenko-Pastur
    transform and its derivative.
    """
    gammas = [_check("gamma", g) for g in np.atleast_1d(gammas)]
    lambdas = [_check("lambda", lam) for lam in np.atleast_1d(lambdas)]
    if len(gammas) != len(lambdas):
        raise DomainError("gammas and lambdas must have the same length")
    s = theta.signal
    m = np.array([_mp_m(g, lam) for g, lam in zip(gammas, lambdas)])
    dm = np.array([_mp_dm(g, lam) for g, lam in zip(gammas, lambdas)])
    g = np.array(gammas)
    lam = np.array(lambdas)
    u = np.array([_mp_one_minus_lm(gi, li) for gi, li in zip(gammas, lambdas)])
    V = s * u
    A = s * np.outer(u, u)
    np.fill_diagonal(A, s * (1 - 2 * lam * m + lam**2 * dm))
    R = theta.sigma2 * g * (m - lam * dm)
    return AsymptoticMoments(V=V, A=A, R=R, x=1.0 / m - lam, signal=s)


def isotropic_risk(gammas, lambdas, theta):
    """Optimally weighted distributed risk for ``Sigma = I`` in decoupled form.

    ``sigma^2 alpha^2 / (1 + sum_i V_i^2 / D_i)`` with
    ``D_i = sigma^2 alpha^2 (A_ii + R_ii) - V_i^2``.
    """
    mom = isotropic_moments(gammas, lambdas, theta)
    s = mom.signal
    if s == 0:
        return 0.0
    D = s * (np.diag(mom.A) + mom.R) - mom.V**2
    return float(s / (1.0 + np.sum(mom.V**2 / D)))


def equal_split_weights_risk(k, gamma, lam, theta, m, mprime):
    """Common optimal weight and risk when ``k`` shards have equal size.

    Parameters
    ----------
    k : int
        Number of shards.
    gamma : float
        Full-data aspect ratio ``p / n``; each shard has ``k * gamma``.
    lam : float
        Ridge parameter shared by all shards.
    theta : SignalNoise
    m, mprime : float
        Stieltjes transform of the shard spectrum at ``-lam`` and its
        ``z``-derivative (``-dm/dlam``), exact or estimated from traces.

    Returns
    -------
    (weight, risk) : tuple of float
    """
    k = _check_k(k)
    gamma = _check("gamma", gamma)
    lam = _check("lambda", lam)
    if not (m > 0 and mprime > 0):
        raise DomainError(f"m={m!r} and mprime={mprime!r} must both be positive")
    s = theta.signal
    g = k * gamma
    denom = 1.0 - g + g * lam**2 * mprime
    if abs(denom) < 1e-14:
        raise DomainError(f"vanishing denominator 1 - k*gamma + k*gamma*lambda^2*m' = {denom!r}")
    c = m - lam * mprime
    bias_gap = g * lam**2 * c**2 / denom
    F = s * bias_gap + theta.sigma2 * g * c
    G = s * (1.0 - 2 * lam * m + lam**2 * mprime - bias_gap)
    total = F + k * G
    if not total > 0:
        raise DomainError(f"degenerate weight denominator F + k*G = {total!r}")
    explained = 1.0 - lam * m
    weight = s * explained / total
    risk = s - s**2 * explained**2 * k / total
    return float(weight), float(risk)


# ---------------------------------------------------------------------------
# Optimally tuned isotropic quantities


def _explained(gamma, alpha2):
    """``1 - lam m_gamma(-lam)`` at the optimal ``lam = gamma / alpha2``."""
    return _mp_one_minus_lm(gamma, gamma / alpha2)


def optimal_risk_phi(gamma, alpha2):
    """Optimal risk function ``phi(gamma) = gamma * m_gamma(-gamma/alpha2)``.

    Equals the optimally tuned single-machine risk divided by ``sigma^2``.
    Increases from 0 to ``alpha2`` as ``gamma`` runs over ``(0, inf)``.
    """
    gamma = _check("gamma", gamma)
    alpha2 = _check("alpha2", alpha2)
    return alpha2 * _mp_lm(gamma, gamma / alpha2)


def _excess(gamma, alpha2):
    # alpha2 / phi(gamma) - 1
    u = _explained(gamma, alpha2)
    return u / _mp_lm(gamma, gamma / alpha2)


def optimal_distributed_risk(gammas, alpha2, sigma2=1.0):
    """Risk of optimally weighted, optimally tuned distributed ridge (``Sigma = I``).

    Accepts arbitrary per-shard aspect ratios ``gammas``.
    """
    alpha2 = _check("alpha2", alpha2)
    total = sum(_excess(_check("gamma", g), alpha2) for g in np.atleast_1d(gammas))
    return sigma2 * alpha2 / (1.0 + total)


def optimal_weights_isotropic(gammas, alpha2):
    """Limiting optimal weights for shards with aspect ratios ``gammas``.

    Each weight is ``(alpha2 / phi(gamma_i)) / (1 + sum_j (alpha2 / phi(gamma_j) - 1))``.
    """
    alpha2 = _check("alpha2", alpha2)
    gammas = [_check("gamma", g) for g in np.atleast_1d(gammas)]
    excess = np.array([_excess(g, alpha2) for g in gammas])
    return (1.0 + excess) / (1.0 + excess.sum())


def are_equal_split(k, gamma, alpha2):
    """Asymptotic relative efficiency ``psi(k, gamma, alpha2)`` for equal shards.

    The ratio of the centralized optimal risk to the optimally weighted
    distributed risk; it equals 1 at ``k = 1`` and decreases in ``k``.
    """
    k = _check_k(k)
    gamma = _check("gamma", gamma)
    alpha2 = _check("alpha2", alpha2)
    central = _mp_lm(gamma, gamma / alpha2)
    return central * (1.0 + k * _excess(k * gamma, alpha2))


def infinite_worker_limit_h(alpha2, gamma):
    """Limit of :func:`are_equal_split` as the number of machines grows without bound."""
    alpha2 = _check("alpha2", alpha2)
    gamma = _check("gamma", gamma)
    central = _mp_lm(gamma, gamma / alpha2)
    return central * (1.0 + alpha2 / (gamma * (1.0 + alpha2)))


def optimal_weight_equal_split(k, gamma, alpha2):
    """Common optimal weight ``alpha2 / (alpha2 k - (k - 1) phi(k gamma))``.

    Lies in ``[1/k, 1]``, so the weights of ``k >= 2`` shards sum to more than one.
    """
    k = _check_k(k)
    gamma = _check("gamma", gamma)
    alpha2 = _check("alpha2", alpha2)
    return 1.0 / (1.0 + (k - 1.0) * _explained(k * gamma, alpha2))


def out_of_sample_efficiency(k, gamma, alpha2, sigma2=1.0):
    """Out-of-sample relative efficiency and prediction error for equal shards.

    Returns
    -------
    (oe, o_k) : tuple of float
        ``oe = O_1 / O_k`` and ``o_k = sigma2 + M_k`` with optimal tuning.
    """
    k = _check_k(k)
    gamma = _check("gamma", gamma)
    alpha2 = _check("alpha2", alpha2)
    sigma2 = _check("sigma2", sigma2)
    m_1 = sigma2 * alpha2 * _mp_lm(gamma, gamma / alpha2)
    m_k = sigma2 * alpha2 / (1.0 + k * _excess(k * gamma, alpha2))
    o_k = sigma2 + m_k
    return (sigma2 + m_1) / o_k, o_k


def oe_infinite_worker_limit(alpha2, gamma):
    """Limit of the out-of-sample efficiency as the number of machines grows."""
    alpha2 = _check("alpha2", alpha2)
    gamma = _check("gamma", gamma)
    phi = alpha2 * _mp_lm(gamma, gamma / alpha2)
    return (1.0 + phi) / (1.0 + gamma * alpha2 * (1 + alpha2) / (alpha2 + gamma * (1 + alpha2)))


def equal_split_gammas(gamma, k) -> Sequence[float]:
    """Per-shard aspect ratios for ``k`` equal shards of a dataset with ratio ``gamma``."""
    return [k * gamma] * int(k)
