"""Simulated one-shot distributed ridge protocol.

Workers own immutable shards and send back one compact :class:`ShardSummary`
per ridge parameter: the local coefficients plus a handful of scalars.  The
combiner never touches raw data.  Two combination rules are provided:

* :func:`wonder_general` tunes a common ``lambda`` on a grid around
  ``k p / (n alpha2_hat)`` and weights shards with the equal-split formula,
  plugging in shard-averaged trace estimates of ``m`` and ``m'``.
* :func:`wonder_isotropic` tunes each shard at ``gamma_i / alpha2_hat_i`` and
  uses the closed-form isotropic weights; it needs no validation data.

Summaries serialize to JSON so workers and combiner can also run as separate
processes that share a directory.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError
from .mle import ThetaEstimate, aggregate_theta, fisher_information, fit_mle
from .ridge import DesignMatrix, ridge_fit, trace_functionals
from .spectral import (
    VALUE_MAX,
    SignalNoise,
    are_equal_split,
    equal_split_weights_risk,
    optimal_weights_isotropic,
    out_of_sample_efficiency,
)

DEFAULT_MULTIPLIERS = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
SUMMARY_KIND = "wonder.shard_summary"
# local alpha2_hat of exactly zero would give an infinite ridge parameter
LOCAL_ALPHA2_FLOOR = 1e-6


@dataclass(frozen=True)
class WonderConfig:
    k: int = 1
    partition: str = "contiguous"
    seed: int = 0
    lambda_multipliers: tuple = DEFAULT_MULTIPLIERS
    validation_fraction: float = 0.1
    theta_mode: str = "mean"
    center_shards: bool = False

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k!r}")
        if self.partition not in ("contiguous", "shuffled"):
            raise DomainError(f"unknown partition strategy {self.partition!r}")
        if not 0 <= self.validation_fraction <= 0.5:
            raise DomainError("validation_fraction must lie in [0, 0.5]")
        if self.theta_mode not in ("mean", "inverse_variance"):
            raise DomainError(f"unknown theta aggregation mode {self.theta_mode!r}")
        mults = tuple(float(m) for m in self.lambda_multipliers)
        if not mults or any(not (m > 0 and math.isfinite(m)) for m in mults):
            raise DomainError("lambda grid must be a nonempty list of positive multipliers")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "lambda_multipliers", mults)


@dataclass(frozen=True)
class Shard:
    X: np.ndarray
    Y: np.ndarray
    shard_id: int
    seed: int = 0
    rows: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class ShardSummary:
    """Everything a worker transmits for one ridge parameter."""

    shard_id: int
    n: int
    lam: float
    beta_hat: np.ndarray
    theta_hat: ThetaEstimate
    m_hat: float
    mprime_hat: float

    SCALARS = 8  # n, lambda, sigma2, alpha2, loglik, converged, m, m'

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("shard size must be positive")
        beta = np.asarray(self.beta_hat, dtype=float)
        scalars = (self.lam, self.m_hat, self.mprime_hat, self.theta_hat.sigma2, self.theta_hat.alpha2)
        if not (np.all(np.isfinite(beta)) and all(math.isfinite(v) for v in scalars)):
            raise DomainError(f"summary of shard {self.shard_id} has non-finite entries")
        object.__setattr__(self, "beta_hat", beta)

    @property
    def p(self):
        return self.beta_hat.size

    def payload_floats(self):
        return self.p + self.SCALARS

    def to_dict(self):
        return {
            "kind": SUMMARY_KIND,
            "shard_id": int(self.shard_id),
            "n_i": int(self.n),
            "lambda": float(self.lam),
            "beta_hat": [float(b) for b in self.beta_hat],
            "sigma2_hat": float(self.theta_hat.sigma2),
            "alpha2_hat": float(self.theta_hat.alpha2),
            "loglik": float(self.theta_hat.loglik),
            "converged": bool(self.theta_hat.converged),
            "m_hat": float(self.m_hat),
            "mprime_hat": float(self.mprime_hat),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        if doc.get("kind") != SUMMARY_KIND:
            raise DomainError(f"not a shard summary document: kind={doc.get('kind')!r}")
        theta = ThetaEstimate(
            sigma2=float(doc["sigma2_hat"]),
            alpha2=float(doc["alpha2_hat"]),
            loglik=float(doc.get("loglik", float("nan"))),
            converged=bool(doc.get("converged", True)),
        )
        return cls(
            shard_id=int(doc["shard_id"]),
            n=int(doc["n_i"]),
            lam=float(doc["lambda"]),
            beta_hat=np.array(doc["beta_hat"], dtype=float),
            theta_hat=theta,
            m_hat=float(doc["m_hat"]),
            mprime_hat=float(doc["mprime_hat"]),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class WeightPlan:
    weights: np.ndarray
    lam: float
    theta: SignalNoise
    kind: str
    lambdas: Optional[np.ndarray] = None
    validation_mse: Optional[np.ndarray] = None

    @property
    def weight_sum(self):
        return float(np.sum(self.weights))


@dataclass
class RiskReport:
    """Theory and empirical risk figures for one run; JSON-serializable."""

    config: dict = field(default_factory=dict)
    theory: dict = field(default_factory=dict)
    empirical: dict = field(default_factory=dict)
    weights: list = field(default_factory=list)
    seed: Optional[int] = None
    version: str = ""
    timing: Optional[dict] = None

    def to_dict(self):
        doc = asdict(self)
        if doc["timing"] is None:
            del doc["timing"]
        return doc

    def to_json(self):
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=2) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class MessageLog:
    """Counts what each worker sends to the combiner."""

    def __init__(self):
        self.records = []

    def record(self, summary):
        self.records.append(
            {
                "shard_id": summary.shard_id,
                "lambda": summary.lam,
                "floats": summary.payload_floats(),
                "bytes": 8 * summary.payload_floats(),
            }
        )

    def per_worker(self):
        out = {}
        for r in self.records:
            out.setdefault(r["shard_id"], []).append(r)
        return out


# ---------------------------------------------------------------------------
# Partitioning


def carve_validation(dataset, fraction, seed=0):
    """Hold out ``fraction`` of the rows before partitioning; returns ``(train, validation)``."""
    if fraction <= 0:
        return dataset, None
    n_val = max(1, int(round(fraction * dataset.n)))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    perm = rng.permutation(dataset.n)
    return dataset.subset(np.sort(perm[n_val:])), dataset.subset(np.sort(perm[:n_val]))


def partition(dataset, config):
    """Split rows into ``config.k`` shards whose sizes differ by at most one.

    The first ``n mod k`` shards get the extra row.  With the ``shuffled``
    strategy rows are permuted by a generator seeded from ``config.seed`` first.
    """
    n, k = dataset.n, config.k
    if k > n:
        raise DomainError(f"cannot split {n} rows into {k} shards")
    ss = np.random.SeedSequence(config.seed)
    perm_ss, *shard_ss = ss.spawn(k + 1)
    if config.partition == "shuffled":
        order = np.random.default_rng(perm_ss).permutation(n)
    else:
        order = np.arange(n)
    shards = []
    for i, rows in enumerate(np.array_split(order, k)):
        shards.append(
            Shard(
                X=dataset.X[rows],
                Y=dataset.Y[rows],
                shard_id=i,
                seed=int(shard_ss[i].generate_state(1)[0]),
                rows=rows,
            )
        )
    return shards


# ---------------------------------------------------------------------------
# Workers


class LocalWorker:
    """A worker holding one shard; its SVD and local MLE are computed once."""

    def __init__(self, shard, center=False):
        X, Y = shard.X, shard.Y
        if center:
            X = X - X.mean(axis=0)
            Y = Y - Y.mean()
        self.shard = shard
        self.design = DesignMatrix(X)
        self.Y = np.asarray(Y, dtype=float)
        self._theta = None

    @property
    def theta(self):
        if self._theta is None:
            self._theta = fit_mle(self.design, self.Y)
        return self._theta

    def fisher(self):
        th = self.theta
        return fisher_information(self.design, SignalNoise(max(th.sigma2, 1e-8), th.alpha2))

    def summarize(self, lam):
        fit = ridge_fit(self.design, self.Y, lam)
        m, mp = trace_functionals(self.design, lam)
        return ShardSummary(
            shard_id=self.shard.shard_id,
            n=self.design.n,
            lam=fit.lam,
            beta_hat=fit.coef,
            theta_hat=self.theta,
            m_hat=m,
            mprime_hat=mp,
        )


def local_worker(shard, lam):
    """One worker pass: local ridge fit, local MLE and trace functionals."""
    return LocalWorker(shard).summarize(lam)


def _map(executor, fn, items):
    if executor is None:
        return [fn(it) for it in items]
    return list(executor.map(fn, items))


def _global_theta(workers, mode, executor=None):
    estimates = _map(executor, lambda w: w.theta, workers)
    infos = _map(executor, lambda w: w.fisher(), workers) if mode == "inverse_variance" else None
    return aggregate_theta(estimates, mode=mode, infos=infos)


def _ordered(summaries):
    return sorted(summaries, key=lambda s: s.shard_id)


def _weighted_sum(summaries, weights):
    beta = np.zeros(summaries[0].p)
    for s, w in zip(summaries, weights):
        beta += w * s.beta_hat
    return beta


# ---------------------------------------------------------------------------
# Combiner rules


def combine_general(summaries, theta, p):
    """Equal-split weighting of summaries computed at a common ``lambda``.

    Returns ``(beta_dist, weights, theoretical_risk)``.
    """
    summaries = _ordered(summaries)
    k = len(summaries)
    lams = {s.lam for s in summaries}
    if len(lams) != 1:
        raise DomainError("general combination needs a common lambda across shards")
    lam = lams.pop()
    n = sum(s.n for s in summaries)
    m = float(np.mean([s.m_hat for s in summaries]))
    mp = float(np.mean([s.mprime_hat for s in summaries]))
    w, risk = equal_split_weights_risk(k, p / n, lam, theta, m, mp)
    weights = np.full(k, w)
    return _weighted_sum(summaries, weights), weights, risk


def combine_isotropic(summaries, alpha2):
    """Closed-form isotropic weights for summaries with arbitrary shard sizes."""
    summaries = _ordered(summaries)
    if not alpha2 > 0:
        raise DomainError(
            "estimated signal-to-noise ratio is zero; weights are undefined, "
            "use the null estimator beta = 0 instead"
        )
    gammas = [s.p / s.n for s in summaries]
    weights = optimal_weights_isotropic(gammas, alpha2)
    return _weighted_sum(summaries, weights), weights


def _check_equal_shards(shards):
    sizes = [s.n for s in shards]
    if max(sizes) - min(sizes) > 1:
        raise DomainError(
            f"general WONDER assumes equal shard sizes, got {min(sizes)}..{max(sizes)} rows; "
            "use wonder_isotropic for unequal splits"
        )


def _mse(X, Y, beta):
    r = Y - X @ beta
    return float(r @ r / len(Y))


def wonder_general(shards, config, validation=None, theta=None, log=None, executor=None):
    """Weighted one-shot distributed ridge for a general design.

    Parameters
    ----------
    shards : list of Shard
        Equal-size shards (sizes may differ by one row).
    config : WonderConfig
    validation : Dataset, optional
        Held-out rows for picking ``lambda``; required when the grid has more
        than one point.
    theta : SignalNoise, optional
        Known ``(sigma2, alpha2)``; when omitted the local MLEs are aggregated.
    log : MessageLog, optional
        Receives every summary sent to the combiner.
    executor : concurrent.futures.Executor, optional
        Runs workers in parallel; the reduction stays sequential.

    Returns
    -------
    beta_dist : ndarray
    plan : WeightPlan
    report : RiskReport
    """
    if not shards:
        raise DomainError("no shards")
    shards = sorted(shards, key=lambda s: s.shard_id)
    _check_equal_shards(shards)
    k = len(shards)
    p = shards[0].p
    n = sum(s.n for s in shards)
    workers = _map(executor, lambda s: LocalWorker(s, center=config.center_shards), shards)
    if theta is None:
        theta = _global_theta(workers, config.theta_mode, executor).theta
    if not theta.alpha2 > 0:
        raise DomainError(
            "estimated signal-to-noise ratio is zero; the lambda grid is undefined, "
            "use the null estimator beta = 0 instead"
        )
    lam0 = k * p / (n * theta.alpha2)
    if k == 1:
        # one shard is the centralized fit; at lam0 the formula weight is 1 up to rounding
        grid = np.array([min(lam0, VALUE_MAX)])
    else:
        grid = np.array([min(mult * lam0, VALUE_MAX) for mult in config.lambda_multipliers])
    if grid.size > 1 and (validation is None or validation.n == 0):
        raise DomainError("a multi-point lambda grid needs validation data")

    candidates = []
    for lam in grid:
        summaries = _map(executor, lambda w: w.summarize(lam), workers)
        if log is not None:
            for s in _ordered(summaries):
                log.record(s)
        beta, weights, risk = combine_general(summaries, theta, p)
        val = _mse(validation.X, validation.Y, beta) if validation is not None else float("nan")
        candidates.append((lam, beta, weights, risk, val))

    best = 0
    for i, c in enumerate(candidates):
        # strict inequality keeps the smaller lambda on ties
        if c[4] < candidates[best][4]:
            best = i
    lam, beta, weights, risk, _ = candidates[best]
    val_mse = np.array([c[4] for c in candidates])
    plan = WeightPlan(
        weights=weights, lam=float(lam), theta=theta, kind="general",
        lambdas=grid, validation_mse=val_mse,
    )
    gamma = p / n
    report = RiskReport(
        config={"k": k, "n": n, "p": p, "lambda0": lam0, "kind": "general"},
        theory={
            "M_k": risk,
            "ARE": are_equal_split(k, gamma, theta.alpha2),
            "OE": out_of_sample_efficiency(k, gamma, theta.alpha2, max(theta.sigma2, 1e-10))[0],
        },
        empirical={
            "lambda_grid": grid.tolist(),
            "validation_mse": val_mse.tolist(),
            "selected_lambda": float(lam),
        },
        weights=weights.tolist(),
        seed=config.seed,
    )
    return beta, plan, report


def wonder_isotropic(shards, config, theta=None, log=None, executor=None):
    """Weighted one-shot distributed ridge for an isotropic design.

    Shard ``i`` fits ridge at ``gamma_i / alpha2_i`` with its own MLE
    ``alpha2_i`` (or the known ``theta``); the combiner averages the local
    MLEs and applies the closed-form optimal weights.  One round, no
    validation data.
    """
    if not shards:
        raise DomainError("no shards")
    shards = sorted(shards, key=lambda s: s.shard_id)
    workers = _map(executor, lambda s: LocalWorker(s, center=config.center_shards), shards)

    def send(w):
        alpha2 = theta.alpha2 if theta is not None else w.theta.alpha2
        gamma_i = w.design.p / w.design.n
        lam = min(gamma_i / max(alpha2, LOCAL_ALPHA2_FLOOR), VALUE_MAX)
        return w.summarize(lam)

    summaries = _ordered(_map(executor, send, workers))
    if log is not None:
        for s in summaries:
            log.record(s)
    if theta is None:
        if config.theta_mode == "inverse_variance":
            infos = _map(executor, lambda w: w.fisher(), workers)
        else:
            infos = None
        theta = aggregate_theta([s.theta_hat for s in summaries], config.theta_mode, infos).theta
    beta, weights = combine_isotropic(summaries, theta.alpha2)
    k = len(shards)
    n = sum(s.n for s in summaries)
    p = summaries[0].p
    lams = np.array([s.lam for s in summaries])
    plan = WeightPlan(weights=weights, lam=float(lams.mean()), theta=theta, kind="isotropic", lambdas=lams)
    gamma = p / n
    report = RiskReport(
        config={"k": k, "n": n, "p": p, "kind": "isotropic"},
        theory={
            "ARE": are_equal_split(k, gamma, theta.alpha2),
            "OE": out_of_sample_efficiency(k, gamma, theta.alpha2, max(theta.sigma2, 1e-10))[0],
        },
        empirical={"local_lambdas": lams.tolist()},
        weights=weights.tolist(),
        seed=config.seed,
    )
    return beta, plan, report


def baselines(shards, config=None, theta=None, naive_lambda=None, local_lambda=None, executor=None):
    """Naive average of local fits and the single-shard estimator.

    By default the naive average fits every shard at ``p / (n alpha2)`` with
    weights ``1/k``; the local estimator uses shard 0 alone at
    ``k p / (n alpha2)``.  Returns ``{"naive": (beta, plan), "local": (beta, plan)}``.
    """
    config = config or WonderConfig(k=len(shards))
    shards = sorted(shards, key=lambda s: s.shard_id)
    workers = _map(executor, lambda s: LocalWorker(s, center=config.center_shards), shards)
    if theta is None:
        theta = _global_theta(workers, config.theta_mode, executor).theta
    k = len(shards)
    p = shards[0].p
    n = sum(s.n for s in shards)
    if naive_lambda is None or local_lambda is None:
        if not theta.alpha2 > 0:
            raise DomainError("estimated alpha2 is zero; baseline ridge parameters are undefined")
    lam_naive = naive_lambda if naive_lambda is not None else min(p / (n * theta.alpha2), VALUE_MAX)
    lam_local = local_lambda if local_lambda is not None else min(k * p / (n * theta.alpha2), VALUE_MAX)

    naive_w = np.full(k, 1.0 / k)
    fits = _map(executor, lambda w: ridge_fit(w.design, w.Y, lam_naive).coef, workers)
    beta_naive = np.zeros(p)
    for w, b in zip(naive_w, fits):
        beta_naive += w * b
    local_w = np.zeros(k)
    local_w[0] = 1.0
    beta_local = ridge_fit(workers[0].design, workers[0].Y, lam_local).coef
    return {
        "naive": (beta_naive, WeightPlan(naive_w, float(lam_naive), theta, "naive")),
        "local": (beta_local, WeightPlan(local_w, float(lam_local), theta, "local")),
    }


# ---------------------------------------------------------------------------
# File exchange


def write_summary(summary, directory):
    """Write one summary as ``shard-<id>-<lambda>.json``; returns the path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"shard-{summary.shard_id:05d}-{summary.lam!r}.json"
    tmp = path.with_suffix(".tmp")
    tmp.write_text(summary.to_json())
    tmp.replace(path)
    return path


def read_summaries(directory):
    """Load every summary document in ``directory``, ordered by shard id then lambda."""
    out = [ShardSummary.from_json(p.read_text()) for p in sorted(Path(directory).glob("shard-*.json"))]
    return sorted(out, key=lambda s: (s.shard_id, s.lam))
