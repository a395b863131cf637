"""Gaussian maximum likelihood for the noise level and signal-to-noise ratio.

Under ``beta ~ N(0, sigma^2 alpha^2 / p I)`` and ``eps ~ N(0, sigma^2 I)`` the
outcome is ``Y ~ N(0, sigma^2 (alpha^2 / p X X^T + I))``.  Everything here works
in the eigenbasis of ``X X^T / p``, so after one SVD each likelihood
evaluation costs ``O(n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .ridge import DesignMatrix
from .spectral import SignalNoise

SIGMA2_BOX = (1e-8, 1e8)
ALPHA2_BOX = (0.0, 1e8)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ThetaEstimate:
    sigma2: float
    alpha2: float
    loglik: float
    converged: bool

    @property
    def theta(self):
        return SignalNoise(self.sigma2, self.alpha2)


@dataclass(frozen=True)
class FisherInfo:
    """Per-observation Fisher information ``[[I2, I3], [I3, I4]]`` for ``(sigma2, alpha2)``."""

    matrix: np.ndarray

    @property
    def diagonal(self):
        return np.diag(self.matrix).copy()


class _Rotated:
    """Spectrum of ``X X^T / p`` together with ``Y`` in its eigenbasis."""

    def __init__(self, X, Y):
        design = DesignMatrix.wrap(X)
        Y = np.asarray(Y, dtype=float)
        if Y.shape != (design.n,):
            raise DomainError(f"response has shape {Y.shape}, expected ({design.n},)")
        self.n = design.n
        self.d = design.s**2 / design.p
        self.z2 = (design.U.T @ Y) ** 2
        resid = Y - design.U @ (design.U.T @ Y)
        # zero modes of X X^T: the part of Y orthogonal to the column space
        self.null = float(resid @ resid)

    def loglik(self, sigma2, alpha2):
        scale = alpha2 * self.d + 1.0
        quad = np.sum(self.z2 / scale) + self.null
        logdet = np.sum(np.log1p(alpha2 * self.d))
        return float(-0.5 * math.log(sigma2) - logdet / (2 * self.n) - quad / (2 * sigma2 * self.n))

    def quad(self, alpha2):
        return float(np.sum(self.z2 / (alpha2 * self.d + 1.0)) + self.null)

    def quad_and_logdet(self, alpha2):
        alpha2 = np.atleast_1d(alpha2)[:, None]
        quad = np.sum(self.z2 / (alpha2 * self.d + 1.0), axis=1) + self.null
        logdet = np.sum(np.log1p(alpha2 * self.d), axis=1)
        return quad, logdet


def gaussian_loglik(X, Y, theta):
    """Normalized Gaussian log-likelihood ``l(theta)`` (constants dropped).

    ``-1/2 log sigma2 - (2n)^{-1} log det(alpha2/p X X^T + I)
    - (2 sigma2 n)^{-1} Y^T (alpha2/p X X^T + I)^{-1} Y``
    """
    sigma2, alpha2 = float(theta.sigma2), float(theta.alpha2)
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2!r}")
    if alpha2 < 0:
        raise DomainError(f"alpha2 must be nonnegative, got {alpha2!r}")
    return _Rotated(X, Y).loglik(sigma2, alpha2)


def _golden_max(f, lo, hi, iters=80):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        if b - a <= 1e-13 * (1.0 + abs(a) + abs(b)):
            break
    return (c, fc) if fc >= fd else (d, fd)


def _grids(size):
    sig = np.logspace(math.log10(SIGMA2_BOX[0]), math.log10(SIGMA2_BOX[1]), size)
    alp = np.concatenate([[0.0], np.logspace(-6, math.log10(ALPHA2_BOX[1]), size - 1)])
    return sig, alp


def fit_mle(X, Y, grid_size=16, cycles=40):
    """Maximize the Gaussian likelihood over ``sigma2 in [1e-8, 1e8]``, ``alpha2 in [0, 1e8]``.

    A ``grid_size x grid_size`` logarithmic grid (with ``alpha2 = 0`` as its
    first row) locates a starting point, then up to ``cycles`` rounds alternate
    between the two coordinates.  The ``sigma2`` step is exact (``Y^T S^{-1} Y / n``
    clipped to the box); the ``alpha2`` step is a golden-section search on the
    likelihood with ``sigma2`` profiled out.  Steps only accept improvements, so
    the result is at least as good as every grid point.
    """
    rot = _Rotated(X, Y)
    if rot.n < 2:
        raise DomainError("need at least two observations")
    sig_grid, alp_grid = _grids(grid_size)
    quad, logdet = rot.quad_and_logdet(alp_grid)
    table = (
        -0.5 * np.log(sig_grid)[None, :]
        - logdet[:, None] / (2 * rot.n)
        - quad[:, None] / (2 * sig_grid[None, :] * rot.n)
    )
    ia, js = np.unravel_index(np.argmax(table), table.shape)
    alpha2, sigma2 = float(alp_grid[ia]), float(sig_grid[js])
    best = float(table[ia, js])
    ratio = alp_grid[2] / alp_grid[1]

    def best_sigma2(a):
        # exact maximizer of l over sigma2 for fixed alpha2, kept inside the box
        return min(max(rot.quad(a) / rot.n, SIGMA2_BOX[0]), SIGMA2_BOX[1])

    def profile(a):
        return rot.loglik(best_sigma2(a), a)

    converged = False
    for _ in range(cycles):
        start = best
        s2 = best_sigma2(alpha2)
        val = rot.loglik(s2, alpha2)
        if val > best:
            sigma2, best = s2, val

        # alpha2 step on the profile: bracket one grid ratio either side
        if alpha2 < alp_grid[1]:
            a, val = _golden_max(profile, 0.0, alp_grid[1] * ratio)
        else:
            lo = math.log(alpha2 / ratio)
            hi = math.log(min(alpha2 * ratio, ALPHA2_BOX[1]))
            u, val = _golden_max(lambda u: profile(math.exp(u)), lo, hi)
            a = math.exp(u)
        if val > best:
            alpha2, sigma2, best = a, best_sigma2(a), val
        zero = profile(0.0)
        if zero > best:
            alpha2, sigma2, best = 0.0, best_sigma2(0.0), zero

        if best - start <= 1e-12 * (1.0 + abs(best)):
            converged = True
            break
    return ThetaEstimate(sigma2=sigma2, alpha2=alpha2, loglik=best, converged=converged)


def fisher_information(X, theta):
    """Fisher information for ``(sigma2, alpha2)``, normalized per observation.

    ``I_k = (2 n sigma^{8-2k})^{-1} tr[(X X^T/p)^{k-2} (alpha2/p X X^T + I)^{2-k}]``
    for ``k = 2, 3, 4``; zero eigenvalues of ``X X^T`` are included.
    """
    sigma2, alpha2 = float(theta.sigma2), float(theta.alpha2)
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2!r}")
    if alpha2 < 0:
        raise DomainError(f"alpha2 must be nonnegative, got {alpha2!r}")
    design = DesignMatrix.wrap(X)
    n = design.n
    d = design.s**2 / design.p
    ratio = d / (alpha2 * d + 1.0)
    # n - rank zero eigenvalues add to the trace only for k = 2
    i2 = 1.0 / (2 * sigma2**2)
    i3 = np.sum(ratio) / (2 * n * sigma2)
    i4 = np.sum(ratio**2) / (2 * n)
    return FisherInfo(np.array([[i2, i3], [i3, i4]]))


def aggregate_theta(estimates, mode="mean", infos=None):
    """Combine per-shard estimates into one global ``ThetaEstimate``.

    ``mode="mean"`` averages coordinatewise.  ``mode="inverse_variance"``
    weights each coordinate by the matching diagonal Fisher entry of each
    shard (``I2`` for ``sigma2``, ``I4`` for ``alpha2``), normalized to sum to one.
    """
    estimates = list(estimates)
    if not estimates:
        raise DomainError("cannot aggregate an empty list of estimates")
    est = np.array([[e.sigma2, e.alpha2] for e in estimates], dtype=float)
    if mode == "mean":
        weights = np.full_like(est, 1.0 / len(estimates))
    elif mode == "inverse_variance":
        if infos is None or len(infos) != len(estimates):
            raise DomainError("inverse_variance aggregation needs one FisherInfo per estimate")
        diag = np.array([info.diagonal for info in infos])
        if np.any(diag <= 0):
            raise DomainError("Fisher diagonal entries must be positive")
        weights = diag / diag.sum(axis=0)
    else:
        raise DomainError(f"unknown aggregation mode {mode!r}")
    sigma2, alpha2 = (weights * est).sum(axis=0)
    return ThetaEstimate(
        sigma2=float(sigma2),
        alpha2=float(alpha2),
        loglik=float(np.mean([e.loglik for e in estimates])),
        converged=all(e.converged for e in estimates),
    )
