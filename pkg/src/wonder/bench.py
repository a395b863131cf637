"""Experiment harnesses behind the command line: theory tables, efficiency
simulations, regularization sweeps and end-to-end fits on CSV data."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .data import SynthSpec, center_normalize, generate, load_csv
from .errors import DomainError
from .protocol import (
    DEFAULT_MULTIPLIERS,
    RiskReport,
    WonderConfig,
    baselines,
    carve_validation,
    partition,
    wonder_general,
    wonder_isotropic,
)
from .ridge import (
    DesignMatrix,
    finite_sample_weights,
    oracle_mse_of_weights,
    ridge_fit,
    trace_functionals,
)
from .spectral import (
    SignalNoise,
    are_equal_split,
    equal_split_weights_risk,
    infinite_worker_limit_h,
    oe_infinite_worker_limit,
    optimal_risk_phi,
    optimal_weight_equal_split,
    optimal_weights_isotropic,
    out_of_sample_efficiency,
)

MAX_CELLS = 10**8
VERSION = f"wonder {__version__}"


def _guard(n, p, allow_large):
    if n * p > MAX_CELLS and not allow_large:
        raise DomainError(
            f"n*p = {n * p} exceeds the resource guard of {MAX_CELLS}; pass allow_large to override"
        )


def _pool_map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# theory


THEORY_COLUMNS = ("gamma", "alpha2", "k", "phi", "psi", "h", "W", "OE", "H")


def theory_table(gammas, alpha2s, ks):
    """Every combination of ``gamma``, ``alpha2`` and ``k`` as a list of row dicts.

    ``phi`` is the optimal single-machine risk, ``psi`` the equal-split ARE,
    ``h`` its infinite-worker limit, ``W`` the optimal equal-split weight and
    ``OE``/``H`` the prediction efficiency and its limit.
    """
    rows = []
    for g in gammas:
        for a in alpha2s:
            for k in ks:
                rows.append(
                    {
                        "gamma": float(g),
                        "alpha2": float(a),
                        "k": int(k),
                        "phi": optimal_risk_phi(g, a),
                        "psi": are_equal_split(k, g, a),
                        "h": infinite_worker_limit_h(a, g),
                        "W": optimal_weight_equal_split(k, g, a),
                        "OE": out_of_sample_efficiency(k, g, a)[0],
                        "H": oe_infinite_worker_limit(a, g),
                    }
                )
    return rows


def theory_self_check(rows, tol=1e-8):
    """Return a list of failure messages (empty when every check passes)."""
    bad = []
    for r in rows:
        if r["k"] == 1 and abs(r["psi"] - 1.0) > tol:
            bad.append(f"psi != 1 at k=1 (gamma={r['gamma']}, alpha2={r['alpha2']}): {r['psi']}")
        if not (1.0 / r["k"] - tol <= r["W"] <= 1.0 + tol):
            bad.append(f"W outside [1/k, 1] at {r}")
        if not (0 < r["psi"] <= 1 + tol and 0 < r["OE"] <= 1 + tol):
            bad.append(f"efficiency outside (0, 1] at {r}")
    by_alpha = {}
    for r in rows:
        by_alpha.setdefault(r["alpha2"], {})[r["gamma"]] = r["h"]
    for a, curve in by_alpha.items():
        hs = [curve[g] for g in sorted(curve)]
        if any(h1 < h0 - tol for h0, h1 in zip(hs, hs[1:])):
            bad.append(f"h not increasing in gamma at alpha2={a}")
    return bad


# ---------------------------------------------------------------------------
# efficiency simulation


def _sq(v):
    return float(v @ v)


def simulate_efficiency(n, p, ks, seeds, alpha2=1.0, sigma2=1.0, threads=1, allow_large=False):
    """Realized relative efficiency of the optimally weighted distributed ridge.

    For each seed one isotropic dataset is drawn.  The global fit uses
    ``lambda = p / (n alpha2)``; for each ``k`` the rows are split into
    contiguous shards, each fit at ``p / (n_i alpha2)`` and combined with the
    limiting optimal weights.  Known ``theta`` is used throughout.

    Returns one row per ``(k, seed)`` with the realized ratio
    ``||beta_global - beta||^2 / ||beta_dist - beta||^2``, the theoretical
    ``psi``, the sum of the limiting weights and the sum of the finite-sample
    oracle weights, sorted by ``(k, seed)``.
    """
    if not n >= p >= 1:
        raise DomainError(f"need n >= p >= 1, got n={n}, p={p}")
    _guard(n, p, allow_large)
    ks = sorted({int(k) for k in ks})
    if ks[0] < 1 or ks[-1] > n:
        raise DomainError("every k must lie in [1, n]")

    def one(seed):
        data = generate(SynthSpec(n=n, p=p, alpha2=alpha2, sigma2=sigma2, seed=seed))
        glob = ridge_fit(data.X, data.Y, p / (n * alpha2)).coef
        err_global = _sq(glob - data.beta)
        out = []
        for k in ks:
            shards = partition(data, WonderConfig(k=k))
            designs = [DesignMatrix(s.X) for s in shards]
            lams = [p / (d.n * alpha2) for d in designs]
            w = optimal_weights_isotropic([p / d.n for d in designs], alpha2)
            beta = np.zeros(p)
            for wi, d, s, lam in zip(w, designs, shards, lams):
                beta += wi * ridge_fit(d, s.Y, lam).coef
            w_star, _, _ = finite_sample_weights(designs, data.beta, sigma2, lams)
            out.append(
                {
                    "k": k,
                    "seed": int(seed),
                    "realized": err_global / _sq(beta - data.beta),
                    "psi": are_equal_split(k, p / n, alpha2),
                    "weight_sum": float(np.sum(w)),
                    "oracle_weight_sum": float(np.sum(w_star)),
                }
            )
        return out

    rows = [r for chunk in _pool_map(one, list(seeds), threads) for r in chunk]
    rows.sort(key=lambda r: (r["k"], r["seed"]))
    return rows


def summarize_efficiency(rows):
    """Mean and Monte Carlo standard deviation of the realized efficiency per ``k``."""
    out = []
    for k in sorted({r["k"] for r in rows}):
        vals = np.array([r["realized"] for r in rows if r["k"] == k])
        sums = np.array([r["oracle_weight_sum"] for r in rows if r["k"] == k])
        psi = next(r["psi"] for r in rows if r["k"] == k)
        out.append(
            {
                "k": k,
                "seeds": int(vals.size),
                "mean_realized": float(vals.mean()),
                "sd_realized": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                "psi": psi,
                "frac_oracle_sum_above_one": float(np.mean(sums > 1.0)),
            }
        )
    return out


# ---------------------------------------------------------------------------
# regularization sweep


def lambda_sweep(
    n,
    p,
    ks,
    seeds,
    design="isotropic",
    rho=0.0,
    multipliers=DEFAULT_MULTIPLIERS,
    alpha2=1.0,
    sigma2=1.0,
    threads=1,
    allow_large=False,
):
    """Distributed risk over a grid ``lambda = c * k gamma / alpha2``.

    For each seed and ``k`` the shards are fixed and the risk is the exact
    expected squared estimation error over the noise, given the design and
    ``beta``.  ``risk`` uses the finite-sample optimal weights and
    ``naive_risk`` the plain average; ``plugin_risk`` uses the equal-split
    weight computed from shard trace estimates, as the protocol would.  All are averaged over seeds.

    Returns ``(rows, argmin)`` where ``argmin[k]`` is the multiplier with the
    smallest mean ``risk``.
    """
    _guard(n, p, allow_large)
    ks = sorted({int(k) for k in ks})
    mults = [float(c) for c in multipliers]
    gamma = p / n

    def one(seed):
        data = generate(SynthSpec(n=n, p=p, design=design, rho=rho, alpha2=alpha2, sigma2=sigma2, seed=seed))
        b2 = _sq(data.beta)
        theta = SignalNoise(sigma2, alpha2)
        res = {}
        for k in ks:
            designs = [DesignMatrix(s.X) for s in partition(data, WonderConfig(k=k))]
            for c in mults:
                lam = c * k * gamma / alpha2
                _, mse, moments = finite_sample_weights(designs, data.beta, sigma2, lam)
                naive = oracle_mse_of_weights(moments, np.full(k, 1.0 / k), b2)
                # the weight the protocol would use, from shard-averaged trace estimates
                tr = np.array([trace_functionals(d, lam) for d in designs]).mean(axis=0)
                try:
                    w, _ = equal_split_weights_risk(k, gamma, lam, theta, tr[0], tr[1])
                    plug = oracle_mse_of_weights(moments, np.full(k, w), b2)
                except DomainError:
                    plug = math.nan
                res[(k, c)] = (mse, naive, plug)
        return res

    results = _pool_map(one, list(seeds), threads)
    rows = []
    argmin = {}
    for k in ks:
        best = None
        for c in mults:
            risks = np.array([r[(k, c)][0] for r in results])
            naive = np.array([r[(k, c)][1] for r in results])
            plug = np.array([r[(k, c)][2] for r in results])
            row = {
                "k": k,
                "multiplier": c,
                "lambda": c * k * gamma / alpha2,
                "risk": float(risks.mean()),
                "risk_sd": float(risks.std(ddof=1)) if risks.size > 1 else 0.0,
                "naive_risk": float(naive.mean()),
                "plugin_risk": float(plug.mean()),
            }
            rows.append(row)
            if best is None or row["risk"] < best["risk"]:
                best = row
        argmin[k] = best["multiplier"]
    return rows, argmin


# ---------------------------------------------------------------------------
# end-to-end fit


@dataclass(frozen=True)
class WonderRun:
    beta: np.ndarray
    report: RiskReport


def _test_mse(test, beta):
    r = test.Y - test.X @ beta
    return float(r @ r / test.n)


def run_wonder(train, test, config, mode="general", normalize=True, theta=None):
    """Fit one estimator on ``train`` and score it on ``test``.

    The validation carve-out is removed from the training rows for every
    mode, so all modes see the same training data.  With ``normalize`` the
    columns are centered and scaled with training statistics.
    """
    if mode not in ("general", "isotropic", "naive", "local"):
        raise DomainError(f"unknown mode {mode!r}")
    if normalize:
        train, test, _ = center_normalize(train, test)
    fit_rows, validation = carve_validation(train, config.validation_fraction, config.seed)
    shards = partition(fit_rows, config)
    if mode == "general":
        beta, plan, report = wonder_general(shards, config, validation=validation, theta=theta)
    elif mode == "isotropic":
        beta, plan, report = wonder_isotropic(shards, config, theta=theta)
    else:
        beta, plan = baselines(shards, config, theta=theta)[mode]
        report = RiskReport(
            config={"k": config.k, "n": fit_rows.n, "p": fit_rows.p, "kind": mode},
            weights=plan.weights.tolist(),
            seed=config.seed,
        )
    report.config.update(
        {
            "mode": mode,
            "partition": config.partition,
            "lambda_multipliers": list(config.lambda_multipliers),
            "validation_fraction": config.validation_fraction,
            "theta_mode": config.theta_mode,
            "center_shards": config.center_shards,
            "normalize": normalize,
        }
    )
    report.empirical["lambda"] = plan.lam if mode != "isotropic" else None
    report.empirical["sigma2_hat"] = plan.theta.sigma2
    report.empirical["alpha2_hat"] = plan.theta.alpha2
    if test is not None and test.n > 0:
        report.empirical["test_mse"] = _test_mse(test, beta)
    report.version = VERSION
    if report.empirical.get("lambda") is None:
        del report.empirical["lambda"]
    return WonderRun(beta=beta, report=report)


def run_wonder_csv(train_path, test_path, config, mode="general", outcome_column=-1, normalize=True):
    train = load_csv(train_path, outcome_column=outcome_column)
    test = load_csv(test_path, outcome_column=outcome_column) if test_path else None
    if test is not None and test.p != train.p:
        raise DomainError(f"train has {train.p} features but test has {test.p}")
    return run_wonder(train, test, config, mode=mode, normalize=normalize)


def msd_like(n_train=10000, n_test=2000, p=90, alpha2=1.0, sigma2=1.0, rho=0.0, seed=0):
    """Synthetic stand-in for the song-year regression: 90 features plus the outcome.

    Isotropic by default; ``rho`` switches to AR-1 correlated features.
    """
    data = generate(SynthSpec(n=n_train + n_test, p=p, design="ar1", rho=rho, alpha2=alpha2, sigma2=sigma2, seed=seed))
    rows = np.arange(data.n)
    return data.subset(rows[:n_train]), data.subset(rows[n_train:])


def weight_sum_fraction(rows, key="oracle_weight_sum", min_k=2):
    vals = [r[key] for r in rows if r["k"] >= min_k]
    if not vals:
        return math.nan
    return float(np.mean(np.array(vals) > 1.0))
