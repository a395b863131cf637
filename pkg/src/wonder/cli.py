"""Command-line front end.

    wonder theory --gamma 0.1 0.5 1 --alpha2 1 --k 1 2 5 --self-check
    wonder simulate-efficiency --n 4000 --p 400 --k 2 5 10 --seeds 50
    wonder lambda-sweep --design ar1 --rho 0.9 --n 1500 --p 250 --k 1 2 5
    wonder wonder --train train.csv --test test.csv --k 10 --mode general

Every flag can also be given in a JSON file passed with ``--config``; keys
are the flag names with dashes replaced by underscores, and explicit flags
win over the file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import jsonschema
import numpy as np

from . import bench
from .errors import WonderError
from .protocol import DEFAULT_MULTIPLIERS, WonderConfig

EXIT_OK, EXIT_SELF_CHECK, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
_num_list = {"type": "array", "items": _num, "minItems": 1}
_int_list = {"type": "array", "items": _pos_int, "minItems": 1}

_COMMON = {
    "seed": {"type": "integer", "minimum": 0},
    "out": {"type": "string"},
    "threads": _pos_int,
    "self_check": {"type": "boolean"},
    "timing": {"type": "boolean"},
}

SCHEMAS = {
    "theory": {
        "gamma": _num_list,
        "gamma_range": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
        "alpha2": _num_list,
        "k": _int_list,
    },
    "simulate-efficiency": {
        "n": _pos_int,
        "p": _pos_int,
        "alpha2": _num,
        "sigma2": _num,
        "k": _int_list,
        "seeds": _pos_int,
        "summary": {"type": "string"},
        "allow_large": {"type": "boolean"},
    },
    "lambda-sweep": {
        "design": {"enum": ["isotropic", "ar1"]},
        "rho": _num,
        "n": _pos_int,
        "p": _pos_int,
        "alpha2": _num,
        "sigma2": _num,
        "k": _int_list,
        "multipliers": _num_list,
        "seeds": _pos_int,
        "allow_large": {"type": "boolean"},
    },
    "wonder": {
        "train": {"type": "string"},
        "test": {"type": "string"},
        "synthetic_msd": {"type": "boolean"},
        "k": _pos_int,
        "mode": {"enum": ["general", "isotropic", "naive", "local"]},
        "outcome_column": {"type": ["string", "integer"]},
        "coef_out": {"type": "string"},
        "partition": {"enum": ["contiguous", "shuffled"]},
        "lambda_multipliers": _num_list,
        "validation_fraction": _num,
        "theta_mode": {"enum": ["mean", "inverse_variance"]},
        "center_shards": {"type": "boolean"},
        "no_normalize": {"type": "boolean"},
    },
}

DEFAULTS = {
    "theory": {"gamma": [0.1, 0.5, 1.0, 2.0, 5.0], "alpha2": [1.0], "k": [1, 2, 5, 10]},
    "simulate-efficiency": {
        "n": 4000, "p": 400, "alpha2": 1.0, "sigma2": 1.0, "k": [1, 2, 5, 10], "seeds": 50,
        "allow_large": False,
    },
    "lambda-sweep": {
        "design": "isotropic", "rho": 0.0, "n": 1500, "p": 250, "alpha2": 1.0, "sigma2": 1.0,
        "k": [1, 2, 5], "multipliers": list(DEFAULT_MULTIPLIERS), "seeds": 10, "allow_large": False,
    },
    "wonder": {
        "k": 1, "mode": "general", "outcome_column": -1, "partition": "contiguous",
        "lambda_multipliers": list(DEFAULT_MULTIPLIERS), "validation_fraction": 0.1,
        "theta_mode": "mean", "center_shards": False, "no_normalize": False, "synthetic_msd": False,
    },
}
_COMMON_DEFAULTS = {"seed": 0, "threads": 1, "self_check": False, "timing": False}


def schema_for(command):
    return {
        "type": "object",
        "properties": {**_COMMON, **SCHEMAS[command]},
        "additionalProperties": False,
    }


def _store_true():
    # None when absent so a config file value is not clobbered
    return {"action": "store_const", "const": True, "default": None}


def build_parser():
    parser = argparse.ArgumentParser(prog="wonder", description="Weighted one-shot distributed ridge regression.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values for any flag")
    common.add_argument("--seed", type=int, default=None, help="base random seed")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--threads", type=int, default=None, help="worker threads")
    common.add_argument("--self-check", dest="self_check", **_store_true())
    common.add_argument("--timing", **_store_true(), help="include wall-clock timing in the report")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", parents=[common], help="tabulate limiting risk and efficiency formulas")
    p.add_argument("--gamma", type=float, nargs="+")
    p.add_argument("--gamma-range", dest="gamma_range", type=float, nargs=3, metavar=("LO", "HI", "NUM"),
                   help="log-spaced gamma grid")
    p.add_argument("--alpha2", type=float, nargs="+")
    p.add_argument("--k", type=int, nargs="+")

    p = sub.add_parser("simulate-efficiency", parents=[common], help="realized vs theoretical efficiency")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--k", type=int, nargs="+")
    p.add_argument("--seeds", type=int, help="number of seeds, starting at --seed")
    p.add_argument("--summary", help="also write per-k means and sd to this CSV")
    p.add_argument("--allow-large", dest="allow_large", **_store_true())

    p = sub.add_parser("lambda-sweep", parents=[common], help="distributed risk over a lambda grid")
    p.add_argument("--design", choices=["isotropic", "ar1"])
    p.add_argument("--rho", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--k", type=int, nargs="+")
    p.add_argument("--multipliers", type=float, nargs="+")
    p.add_argument("--seeds", type=int)
    p.add_argument("--allow-large", dest="allow_large", **_store_true())

    p = sub.add_parser("wonder", parents=[common], help="fit on CSV data and report test error")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--synthetic-msd", dest="synthetic_msd", **_store_true(),
                   help="use a generated 91-feature stand-in instead of --train/--test")
    p.add_argument("--k", type=int)
    p.add_argument("--mode", choices=["general", "isotropic", "naive", "local"])
    p.add_argument("--outcome-column", dest="outcome_column")
    p.add_argument("--coef-out", dest="coef_out")
    p.add_argument("--partition", choices=["contiguous", "shuffled"])
    p.add_argument("--lambda-multipliers", dest="lambda_multipliers", type=float, nargs="+")
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float)
    p.add_argument("--theta-mode", dest="theta_mode", choices=["mean", "inverse_variance"])
    p.add_argument("--center-shards", dest="center_shards", **_store_true())
    p.add_argument("--no-normalize", dest="no_normalize", **_store_true())
    return parser


class UsageError(Exception):
    pass


def resolve(args):
    """Merge defaults, the config file and explicit flags, then validate."""
    command = args.command
    opts = {**_COMMON_DEFAULTS, **DEFAULTS[command]}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        try:
            jsonschema.validate(cfg, schema_for(command))
        except jsonschema.ValidationError as exc:
            raise UsageError(f"config {args.config}: {exc.message}") from None
        opts.update(cfg)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        opts[key] = value
    try:
        jsonschema.validate(opts, schema_for(command))
    except jsonschema.ValidationError as exc:
        raise UsageError(f"invalid option {'/'.join(map(str, exc.path))}: {exc.message}") from None
    return opts


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _seeds(opts):
    return list(range(opts["seed"], opts["seed"] + opts["seeds"]))


def cmd_theory(opts):
    gammas = list(opts["gamma"])
    if "gamma_range" in opts:
        lo, hi, num = opts["gamma_range"]
        if not (0 < lo < hi) or num < 2 or num != int(num):
            raise UsageError("--gamma-range needs 0 < LO < HI and an integer NUM >= 2")
        gammas = list(np.geomspace(lo, hi, int(num)))
    rows = bench.theory_table(gammas, opts["alpha2"], opts["k"])
    _emit(rows_to_csv(rows, bench.THEORY_COLUMNS), opts.get("out"))
    return bench.theory_self_check(rows) if opts["self_check"] else []


def cmd_simulate_efficiency(opts):
    rows = bench.simulate_efficiency(
        opts["n"], opts["p"], opts["k"], _seeds(opts), alpha2=opts["alpha2"], sigma2=opts["sigma2"],
        threads=opts["threads"], allow_large=opts["allow_large"],
    )
    cols = ("k", "seed", "realized", "psi", "weight_sum", "oracle_weight_sum")
    _emit(rows_to_csv(rows, cols), opts.get("out"))
    summary = bench.summarize_efficiency(rows)
    text = rows_to_csv(summary, ("k", "seeds", "mean_realized", "sd_realized", "psi", "frac_oracle_sum_above_one"))
    if opts.get("summary"):
        _emit(text, opts["summary"])
    else:
        sys.stderr.write(text)
    bad = []
    if opts["self_check"]:
        for r in rows:
            if r["k"] == 1 and r["realized"] != 1.0:
                bad.append(f"k=1 realized efficiency is {r['realized']!r} at seed {r['seed']}, expected 1")
            if r["k"] >= 2 and not r["weight_sum"] > 1.0:
                bad.append(f"limiting weights sum to {r['weight_sum']!r} <= 1 at k={r['k']}")
    return bad


def cmd_lambda_sweep(opts):
    rows, argmin = bench.lambda_sweep(
        opts["n"], opts["p"], opts["k"], _seeds(opts), design=opts["design"], rho=opts["rho"],
        multipliers=opts["multipliers"], alpha2=opts["alpha2"], sigma2=opts["sigma2"],
        threads=opts["threads"], allow_large=opts["allow_large"],
    )
    for r in rows:
        r["is_argmin"] = r["multiplier"] == argmin[r["k"]]
    cols = ("k", "multiplier", "lambda", "risk", "risk_sd", "naive_risk", "plugin_risk", "is_argmin")
    _emit(rows_to_csv(rows, cols), opts.get("out"))
    bad = []
    if opts["self_check"] and 1 in argmin:
        mults = sorted(opts["multipliers"])
        if 1.0 in mults:
            pos = mults.index(argmin[1]) - mults.index(1.0)
            if abs(pos) > 1:
                bad.append(f"k=1 argmin multiplier {argmin[1]} is more than one grid step from 1")
    return bad


def cmd_wonder(opts):
    config = WonderConfig(
        k=opts["k"], partition=opts["partition"], seed=opts["seed"],
        lambda_multipliers=tuple(opts["lambda_multipliers"]),
        validation_fraction=opts["validation_fraction"], theta_mode=opts["theta_mode"],
        center_shards=opts["center_shards"],
    )
    normalize = not opts["no_normalize"]
    start = time.perf_counter()
    if opts["synthetic_msd"]:
        train, test = bench.msd_like(seed=opts["seed"])
        run = bench.run_wonder(train, test, config, mode=opts["mode"], normalize=normalize)
    else:
        if not opts.get("train"):
            raise UsageError("--train is required unless --synthetic-msd is given")
        outcome = opts["outcome_column"]
        if isinstance(outcome, str):
            try:
                outcome = int(outcome)
            except ValueError:
                pass
        run = bench.run_wonder_csv(opts["train"], opts.get("test"), config, mode=opts["mode"],
                                   outcome_column=outcome, normalize=normalize)
    if opts["timing"]:
        run.report.timing = {"seconds": time.perf_counter() - start}
    _emit(run.report.to_json(), opts.get("out"))
    if opts.get("coef_out"):
        coef_rows = [{"index": j, "coef": float(b)} for j, b in enumerate(run.beta)]
        _emit(rows_to_csv(coef_rows, ("index", "coef")), opts["coef_out"])
    bad = []
    if opts["self_check"]:
        if not np.all(np.isfinite(run.beta)):
            bad.append("non-finite coefficients")
        if "test_mse" in run.report.empirical and not np.isfinite(run.report.empirical["test_mse"]):
            bad.append("non-finite test MSE")
    return bad


COMMANDS = {
    "theory": cmd_theory,
    "simulate-efficiency": cmd_simulate_efficiency,
    "lambda-sweep": cmd_lambda_sweep,
    "wonder": cmd_wonder,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        failures = COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"wonder: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WonderError, OSError) as exc:
        print(f"wonder: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for msg in failures:
        print(f"self-check failed: {msg}", file=sys.stderr)
    return EXIT_SELF_CHECK if failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
