"""Synthetic random-effects data, CSV ingestion and train-only normalization."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, ParseError
from .spectral import SignalNoise

BLOCK_ROWS = 1024


@dataclass(frozen=True)
class NormalizationStats:
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    constant_columns: np.ndarray

    @property
    def has_constant_columns(self):
        return bool(np.any(self.constant_columns))


@dataclass(frozen=True)
class Dataset:
    """Design ``X`` (``n x p``) and response ``Y``.

    Synthetic data also carries the true coefficients and ``theta``.
    """

    X: np.ndarray
    Y: np.ndarray
    beta: Optional[np.ndarray] = None
    theta: Optional[SignalNoise] = None
    stats: Optional[NormalizationStats] = None
    columns: Optional[tuple] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2 or Y.ndim != 1 or X.shape[0] != Y.shape[0]:
            raise DomainError(f"incompatible shapes X{X.shape}, Y{Y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DomainError("dataset contains NaN or infinite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def subset(self, rows):
        rows = np.asarray(rows)
        return replace(self, X=self.X[rows], Y=self.Y[rows])


@dataclass(frozen=True)
class SynthSpec:
    n: int
    p: int
    design: str = "isotropic"
    rho: float = 0.0
    alpha2: float = 1.0
    sigma2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise DomainError(f"n and p must be positive, got n={self.n}, p={self.p}")
        if self.design not in ("isotropic", "ar1"):
            raise DomainError(f"unknown design {self.design!r}")
        if not -1 < self.rho < 1:
            raise DomainError(f"AR-1 coefficient must lie in (-1, 1), got {self.rho}")
        if self.alpha2 < 0 or self.sigma2 < 0:
            raise DomainError("alpha2 and sigma2 must be nonnegative")


def _ar1_rows(z, rho):
    # x_1 = z_1, x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j along each row
    c = math.sqrt(1.0 - rho * rho)
    z = z.copy()
    z[:, 0] /= c
    return lfilter([c], [1.0, -rho], z, axis=1)


def generate(spec):
    """Draw ``Y = X beta + eps`` from the random-effects model.

    Rows of ``X`` are ``N(0, Sigma)`` with ``Sigma = I`` or ``Sigma_ij = rho^|i-j|``;
    ``beta`` has i.i.d. ``N(0, sigma2 alpha2 / p)`` entries and ``eps`` is
    ``N(0, sigma2)``.  Rows are produced in fixed-size blocks, each from its own
    child of one ``SeedSequence``, so blocks can be generated independently.
    """
    root = np.random.SeedSequence(spec.seed)
    n_blocks = -(-spec.n // BLOCK_ROWS)
    beta_ss, eps_ss, *block_ss = root.spawn(2 + n_blocks)
    blocks = []
    for b, ss in enumerate(block_ss):
        rows = min(BLOCK_ROWS, spec.n - b * BLOCK_ROWS)
        z = np.random.default_rng(ss).standard_normal((rows, spec.p))
        if spec.design == "ar1" and spec.rho != 0.0:
            z = _ar1_rows(z, spec.rho)
        blocks.append(z)
    X = np.vstack(blocks)
    beta = np.random.default_rng(beta_ss).standard_normal(spec.p) * math.sqrt(
        spec.sigma2 * spec.alpha2 / spec.p
    )
    eps = np.random.default_rng(eps_ss).standard_normal(spec.n) * math.sqrt(spec.sigma2)
    return Dataset(X=X, Y=X @ beta + eps, beta=beta, theta=SignalNoise(spec.sigma2, spec.alpha2))


def ar1_covariance(p, rho):
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def load_csv(path, outcome_column=-1, has_header=True):
    """Read a rectangular numeric CSV into a :class:`Dataset`.

    ``outcome_column`` is a column name (requires a header) or an integer
    index, negative values counting from the end.  Errors report 1-based
    file line and column numbers.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if has_header:
        if not rows:
            raise ParseError("empty file", row=1)
        header = [h.strip() for h in rows[0]]
        body = rows[1:]
        first_line = 2
    else:
        header = None
        body = rows
        first_line = 1
    body_lines = [(i + first_line, r) for i, r in enumerate(body) if any(c.strip() for c in r)]
    if not body_lines:
        raise ParseError("no data rows", row=first_line)
    width = len(header) if header is not None else len(body_lines[0][1])
    if width < 2:
        raise ParseError("need at least one feature column and one outcome column", row=first_line)
    values = np.empty((len(body_lines), width))
    for r, (line, cells) in enumerate(body_lines):
        if len(cells) != width:
            raise ParseError(f"ragged row: expected {width} fields, found {len(cells)}", row=line)
        for c, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r}", row=line, column=c + 1) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell!r}", row=line, column=c + 1)
            values[r, c] = v

    if isinstance(outcome_column, str):
        if header is None or outcome_column not in header:
            raise ParseError(f"outcome column {outcome_column!r} not found in header", row=1)
        out = header.index(outcome_column)
    else:
        out = int(outcome_column)
        if not -width <= out < width:
            raise ParseError(f"outcome column index {out} out of range for {width} columns")
        out %= width
    keep = [c for c in range(width) if c != out]
    columns = tuple(header[c] for c in keep) if header is not None else None
    return Dataset(X=values[:, keep], Y=values[:, out], columns=columns)


def save_csv(dataset, path, header=True):
    """Write features then outcome, at full ``repr`` precision."""
    names = list(dataset.columns) if dataset.columns else [f"x{j + 1}" for j in range(dataset.p)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(names + ["y"])
        for xrow, y in zip(dataset.X, dataset.Y):
            w.writerow([repr(float(v)) for v in xrow] + [repr(float(y))])


def center_normalize(train, test=None):
    """Center and scale columns of ``X`` and ``Y`` with statistics from ``train`` only.

    Columns with zero sample variance are centered, left at scale 1 and
    flagged in ``stats.constant_columns``.
    """
    if train.n < 1:
        raise DomainError("training set is empty")
    x_mean = train.X.mean(axis=0)
    x_sd = train.X.std(axis=0, ddof=1) if train.n > 1 else np.zeros(train.p)
    constant = ~(x_sd > 0)
    x_scale = np.where(constant, 1.0, x_sd)
    y_mean = float(train.Y.mean())
    y_sd = float(train.Y.std(ddof=1)) if train.n > 1 else 0.0
    y_scale = y_sd if y_sd > 0 else 1.0
    stats = NormalizationStats(x_mean, x_scale, y_mean, y_scale, constant)

    def apply(ds):
        return replace(
            ds,
            X=(ds.X - x_mean) / x_scale,
            Y=(ds.Y - y_mean) / y_scale,
            beta=None,
            theta=None,
            stats=stats,
        )

    return apply(train), (apply(test) if test is not None else None), stats


def train_test_split(dataset, n_train, n_test, seed=0):
    """Disjoint random row samples of sizes ``n_train`` and ``n_test``."""
    if n_train < 1 or n_test < 0 or n_train + n_test > dataset.n:
        raise DomainError(
            f"cannot draw {n_train} training and {n_test} test rows from {dataset.n}"
        )
    perm = np.random.default_rng(np.random.SeedSequence(seed)).permutation(dataset.n)
    train_rows = np.sort(perm[:n_train])
    test_rows = np.sort(perm[n_train : n_train + n_test])
    return dataset.subset(train_rows), dataset.subset(test_rows)
