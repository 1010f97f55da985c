"""Command-line driver: ``biasedselect {simulate,sweep,asymptotic,design,verify}``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
3 infeasible constraints.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

from . import asymptotics, verify
from .bias import MultiplicativeBias, interaction_gap
from .config import biases_for, load, parse_config
from .core import check_feasibility, constraints_to_dict
from .distributions import assumption2_c
from .exceptions import AssumptionViolation, InfeasibleConstraintsError, ValidationError
from .montecarlo import default_workers, estimate_utility_ratio, sweep_nonintersectional

log = logging.getLogger("biasedselect")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3
COMMANDS = ("simulate", "sweep", "asymptotic", "design", "verify")


def fmt(x):
    """Round-trip text for numbers: 17 significant digits for floats."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])


def write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _beta_cols(bias, p):
    beta = getattr(bias, "beta", None)
    return list(beta) if beta is not None else [math.nan] * p


def cmd_simulate(cfg):
    p = cfg.problem.p
    rows, results = [], []
    for bias in biases_for(cfg):
        est = estimate_utility_ratio(cfg.problem, cfg.distribution, bias, cfg.constraints, cfg.trials, cfg.seed)
        rows.append(_beta_cols(bias, p) + [est.mean, est.stderr, est.trials, est.seed])
        results.append({"beta": _beta_cols(bias, p), **est.to_record()})
    header = [f"beta{ell + 1}" for ell in range(p)] + ["mean", "stderr", "trials", "seed"]
    write_csv(os.path.join(cfg.out_dir, "simulate.csv"), header, rows)
    summary = {"command": "simulate", "results": results}
    if cfg.constraints is not None:
        summary["constraints"] = constraints_to_dict(cfg.constraints)
    write_json(os.path.join(cfg.out_dir, "simulate.json"), summary)
    for r in results:
        print(f"beta={r['beta']} mean={fmt(r['mean'])} stderr={fmt(r['stderr'])}")
    return EXIT_OK


def cmd_sweep(cfg):
    p = cfg.problem.p
    bound_cols = [f"L{ell + 1}" for ell in range(p)]
    header = [f"beta{ell + 1}" for ell in range(p)] + bound_cols + ["feasible", "mean", "stderr", "trials", "seed"]
    rows, best = [], []
    for bias in biases_for(cfg):
        res = sweep_nonintersectional(
            cfg.problem, cfg.distribution, bias, cfg.L1_grid, cfg.L2_grid, cfg.trials, cfg.seed, L3_grid=cfg.L3_grid
        )
        betas = _beta_cols(bias, p)
        for bounds, ok, est in res.rows():
            stats = [est.mean, est.stderr, est.trials, est.seed] if est is not None else [None] * 4
            rows.append(betas + list(bounds) + [ok] + stats)
        arg, est = res.argmax
        best.append({"beta": betas, "argmax": list(arg), **est.to_record()})
        print(f"beta={betas} argmax L={list(arg)} max mean={fmt(est.mean)} stderr={fmt(est.stderr)}")
    write_csv(os.path.join(cfg.out_dir, "sweep.csv"), header, rows)
    write_json(os.path.join(cfg.out_dir, "sweep.json"), {"command": "sweep", "max": best})
    return EXIT_OK


def _thm3(cfg, bias):
    try:
        c = assumption2_c(cfg.distribution).c
    except AssumptionViolation:
        return math.nan
    gap = interaction_gap(bias, cfg.distribution, cfg.problem)
    return asymptotics.thm3_bound(c, float(cfg.problem.rho), float(cfg.problem.eta), gap).value


def cmd_asymptotic(cfg):
    sizes = cfg.problem.structure
    n, rho, eta = cfg.problem.n, float(cfg.problem.rho), float(cfg.problem.eta)
    header = ["beta1", "beta2", "L1", "L2", "limit_ratio", "thm1_bound", "thm3_bound"]
    rows, results = [], []
    for bias in biases_for(cfg):
        if cfg.fixed_bounds is not None:
            L1, L2 = cfg.fixed_bounds
            ratio = asymptotics.limit_utility_ratio(bias, cfg.distribution, sizes, n, L1, L2)
        else:
            best = asymptotics.max_limit_ratio(bias, cfg.distribution, sizes, n, cfg.grid_resolution)
            L1, L2, ratio = best.L1, best.L2, best.ratio
        betas = _beta_cols(bias, 2)
        thm1 = asymptotics.thm1_bound(rho, eta, bias.beta).value if isinstance(bias, MultiplicativeBias) else math.nan
        thm3 = _thm3(cfg, bias)
        rows.append(betas + [L1, L2, ratio, thm1, thm3])
        results.append({"beta": betas, "L1": L1, "L2": L2, "limit_ratio": ratio, "thm1_bound": thm1, "thm3_bound": thm3})
        print(f"beta={betas} L=({fmt(L1)}, {fmt(L2)}) limit_ratio={fmt(ratio)}")
    write_csv(os.path.join(cfg.out_dir, "asymptotic.csv"), header, rows)
    write_json(os.path.join(cfg.out_dir, "asymptotic.json"), {"command": "asymptotic", "results": _jsonable(results)})
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonable(v) for v in obj]
    return obj


def cmd_design(cfg):
    cons = cfg.constraints
    verdict = check_feasibility(cfg.problem, cons)
    st = cfg.problem.structure
    doc = {
        "command": "design",
        "epsilon": cfg.epsilon,
        "m": st.m,
        "n": cfg.problem.n,
        "cells": {
            sig: {"size": st.cell_size(sig), "L": cons.get(sig), "capped": sig in cons.capped} for sig in st.signatures
        },
        "total": cons.total(),
        "feasible": bool(verdict),
        "constraints": constraints_to_dict(cons),
    }
    write_json(os.path.join(cfg.out_dir, "design.json"), doc)
    for sig in st.signatures:
        flag = " (capped)" if sig in cons.capped else ""
        print(f"L_{sig} = {cons.get(sig)}{flag}")
    return EXIT_OK


def cmd_verify(seed=0):
    ok = True
    for res in verify.run_all(seed):
        print(f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.detail}")
        ok &= res.passed
    return EXIT_OK if ok else EXIT_RUNTIME


HANDLERS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "asymptotic": cmd_asymptotic, "design": cmd_design}


def build_parser():
    parser = argparse.ArgumentParser(prog="biasedselect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="experiment config (JSON)", required=name != "verify")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="root seed (overrides run.seed)")
        sp.add_argument("--trials", type=int, help="trial count (overrides run.trials)")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        default_workers()
        if args.command == "verify":
            return cmd_verify(args.seed or 0)
        cfg = parse_config(load(args.config), args.command, seed=args.seed, trials=args.trials, out_dir=args.out)
    except ValidationError as exc:
        log.error("invalid config: %s", exc)
        return EXIT_CONFIG
    except InfeasibleConstraintsError as exc:
        log.error("infeasible constraints: %s", exc)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001
        log.error("%s", exc)
        return EXIT_RUNTIME
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
        return HANDLERS[args.command](cfg)
    except InfeasibleConstraintsError as exc:
        log.error("infeasible constraints: %s", exc)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
