"""Experiment runner: grid sweeps, example reproductions, check suites.

Three subcommands.  ``estimate`` sweeps one estimator over an
(epsilon, N) grid from a JSON config and writes per-cell rows plus the
aggregated estimate.  ``reproduce`` replays the worked shift-space
computations (dyadic-grid trend, small-denominator span/sep bounds, the
cylinder measure).  ``check`` drives the full inequality suite.  Reports
are deterministic: sorted keys, no timestamps, sequential cell order;
wall-clock timing goes to stderr only.

Exit codes: 0 all good, 2 at least one check or assertion failed,
3 invalid config, 4 budget exhaustion left partial results.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys as _sys
import time
from dataclasses import dataclass, field, is_dataclass, asdict

import numpy as np

from . import __version__
from .metric import BudgetExceeded, DomainError
from .systems import (ShiftSpec, build_alphabet_shift, build_full_shift,
                      build_line, system_from_config)
from .covers import (CANDIDATE_GRID, EXACT, GREEDY, CoverInfeasible,
                     max_separated, min_spanning, separation_report,
                     sandwich_check)
from .dimensions import (DEFAULT_DELTA, LOWER, UPPER, EvidenceGrid,
                         chain_check, chain_report, dim_eps_H,
                         fixed_threshold_grid, hausdorff_grid, holder_check,
                         mean_assouad_estimate, mean_hausdorff_estimate,
                         metric_mean_estimate, product_check,
                         psi_intermediate_estimate, psi_monotonicity_check,
                         psi_table, psi_theta, psi_threshold, psi_zero,
                         threshold_grid, union_stability_check)
from .measures import (example3_cert, example3_cylinders, example3_measure,
                       example3_params, frostman_cert, frostman_construct,
                       mass_distribution_lower_bound, uniform_growth_certificate,
                       uniform_measure)

EXIT_OK = 0
EXIT_CHECK_FAILED = 2
EXIT_CONFIG = 3
EXIT_BUDGET = 4

CSV_COLUMNS = ("system", "N", "epsilon", "window_lo", "window_hi", "s",
               "delta", "statistic", "value", "method")

FLAVORS = ("mean_hausdorff", "metric_mean", "psi_intermediate",
           "mean_assouad")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


@dataclass
class RunReport:
    """Everything one run produced, in emission order."""
    kind: str
    label: str
    provenance: dict
    cells: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    budget_hit: bool = False

    def add_check(self, name, system, passed, details=(), failures=(),
                  skipped=()):
        self.checks.append({
            "name": name, "system": system, "passed": bool(passed),
            "details": [_jsonable(d) for d in details],
            "failures": [_jsonable(f) for f in failures],
            "skipped": [_jsonable(s) for s in skipped]})
        if not passed:
            self.failures.append(f"{name}[{system}]")

    def exit_code(self):
        if self.failures:
            return EXIT_CHECK_FAILED
        if self.budget_hit:
            return EXIT_BUDGET
        return EXIT_OK

    def to_json_dict(self):
        return {"kind": self.kind, "label": self.label,
                "provenance": self.provenance,
                "estimates": self.estimates, "checks": self.checks,
                "cells": self.cells,
                "failures": [_jsonable(f) for f in self.failures],
                "skipped": [_jsonable(s) for s in self.skipped],
                "budget_hit": self.budget_hit,
                "exit_code": self.exit_code()}


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(asdict(obj))
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


def _config_hash(cfg) -> str:
    canon = json.dumps(_jsonable(cfg), sort_keys=True,
                       separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _provenance(cfg, seed) -> dict:
    return {"version": __version__, "config_hash": _config_hash(cfg),
            "seed": int(seed)}


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")


def _float_grid(cfg, name, decreasing) -> tuple:
    values = cfg.get(name)
    _require(isinstance(values, (list, tuple)) and values,
             f"field '{name}' must be a nonempty list")
    out = tuple(float(v) for v in values)
    step = np.diff(out)
    if decreasing:
        _require((step < 0).all(), f"field '{name}' must strictly decrease")
    else:
        _require((step > 0).all(), f"field '{name}' must strictly increase")
    return out


def _scale_grid(cfg, name="scales") -> tuple:
    values = cfg.get(name)
    _require(isinstance(values, (list, tuple)) and values,
             f"field '{name}' must be a nonempty list")
    out = tuple(int(v) for v in values)
    _require(all(v > 0 for v in out), f"field '{name}' needs positive N")
    _require((np.diff(out) > 0).all(),
             f"field '{name}' must strictly increase")
    return out


def _psi_from_config(spec):
    _require(isinstance(spec, dict) and "kind" in spec,
             "field 'psi' must be an object with a 'kind'")
    kind = spec["kind"]
    bound = float(spec.get("domain_bound", 1.0))
    if kind == "power_theta":
        _require("theta" in spec, "psi kind 'power_theta' needs 'theta'")
        return psi_theta(float(spec["theta"]), bound)
    if kind == "zero":
        return psi_zero(bound)
    if kind == "table":
        _require(spec.get("pairs"), "psi kind 'table' needs 'pairs'")
        return psi_table([(float(e), float(v)) for e, v in spec["pairs"]],
                         bound)
    raise ConfigError(f"unknown psi kind {kind!r}")


def _build_system(cfg, field_name="system"):
    spec = cfg.get(field_name)
    _require(isinstance(spec, dict), f"field '{field_name}' must be an "
                                     f"object")
    try:
        return system_from_config(spec)
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"field '{field_name}': {exc}")


def _mode(cfg):
    mode = cfg.get("mode", EXACT)
    _require(mode in (EXACT, GREEDY), "field 'mode' must be exact|greedy")
    return mode


def _cover_mode(mode):
    """Cost optimizers call their heuristic mode candidate_grid."""
    return EXACT if mode == EXACT else CANDIDATE_GRID


def _cell_row(system, N, eps, value, statistic, method, window=("", ""),
              s="", delta=""):
    return {"system": system, "N": int(N), "epsilon": eps,
            "window_lo": window[0], "window_hi": window[1], "s": s,
            "delta": delta, "statistic": statistic,
            "value": "" if value is None else value, "method": method}


# -- estimate ----------------------------------------------------------------

def run_estimate(config) -> RunReport:
    """Sweep one estimator over the configured grid.

    Per-cell budget exhaustion degrades that cell to the greedy solver and
    records the degradation in the method column; the run continues.
    """
    seed = int(config.get("seed", 0))
    report = RunReport("estimate", config.get("label", "estimate"),
                       _provenance(config, seed))
    flavor = config.get("flavor")
    _require(flavor in FLAVORS,
             f"field 'flavor' must be one of {', '.join(FLAVORS)}")
    sys_ = _build_system(config)
    mode = _mode(config)
    node_budget = config.get("node_budget")
    delta = float(config.get("delta", DEFAULT_DELTA))
    sides = config.get("sides", [LOWER, UPPER])
    _require(all(s in (LOWER, UPPER) for s in sides),
             "field 'sides' entries must be lower|upper")

    if flavor == "mean_assouad":
        return _estimate_assouad(report, config, sys_, mode, node_budget)

    epsilons = _float_grid(config, "epsilons", decreasing=True)
    scales = _scale_grid(config)
    psi = _psi_from_config(config["psi"]) if flavor == "psi_intermediate" \
        else None
    statistic = config.get("statistic", "sep")
    if flavor == "metric_mean":
        _require(statistic in ("sep", "span"),
                 "field 'statistic' must be sep|span")

    cells = {}
    for eps in epsilons:
        for N in scales:
            value, method, window, s_col = None, mode, ("", ""), ""
            try:
                value, method, window = _estimate_cell(
                    sys_, flavor, statistic, psi, delta, float(eps), int(N),
                    mode, node_budget)
            except BudgetExceeded as exc:
                report.budget_hit = True
                report.failures.append(
                    f"cell(eps={eps}, N={N}): budget: {exc}")
                method = "budget"
            except CoverInfeasible as exc:
                report.skipped.append(
                    f"cell(eps={eps}, N={N}): infeasible window: {exc}")
                method = "infeasible"
            if method == "greedy(budget)":
                report.budget_hit = True
            cells[(float(eps), int(N))] = value
            kind = {"mean_hausdorff": "hausdorff_ratio",
                    "metric_mean": f"{statistic}_ratio",
                    "psi_intermediate": "psi_threshold"}[flavor]
            report.cells.append(_cell_row(
                sys_.name, N, eps, value, kind, method, window,
                s="", delta=delta if flavor == "psi_intermediate" else ""))

    grid = EvidenceGrid(sys_.name, {"mean_hausdorff": "hausdorff_ratio",
                                    "metric_mean": f"{statistic}_ratio",
                                    "psi_intermediate": "psi_threshold"}[flavor],
                        epsilons, scales, cells,
                        {"mode": mode, "delta": delta})
    if len(grid.epsilons) < 2 or len(grid.scales) < 2:
        # single row or column: the cells stand on their own, there is
        # just no trend to aggregate
        report.skipped.append("estimates: grid too small for trend fits "
                              "(need two epsilons and two scales)")
        return report
    for side in sides:
        try:
            if flavor == "mean_hausdorff":
                est = mean_hausdorff_estimate(sys_, grid, side)
            elif flavor == "metric_mean":
                est = metric_mean_estimate(sys_, grid, side, statistic)
            else:
                est = psi_intermediate_estimate(sys_, grid, psi, side)
            report.estimates.append(_jsonable(est.to_json_dict()))
        except DomainError as exc:
            report.failures.append(f"estimate[{side}]: {exc}")
    return report


def _estimate_cell(sys_, flavor, statistic, psi, delta, eps, N, mode,
                   node_budget):
    """One grid cell; falls back to greedy when the exact solver runs out."""
    def attempt(m):
        if flavor == "mean_hausdorff":
            return dim_eps_H(sys_, N, eps, mode=_cover_mode(m),
                             node_budget=node_budget) / N, ("", "")
        if flavor == "metric_mean":
            fn = max_separated if statistic == "sep" else min_spanning
            rep = fn(sys_, N, eps, mode=m, node_budget=node_budget)
            count = rep.sep_count if statistic == "sep" else rep.span_count
            return (math.log2(count) / (N * abs(math.log2(eps))), ("", ""))
        value = psi_threshold(sys_, N, eps, psi, delta,
                              mode=_cover_mode(m), node_budget=node_budget)
        return value, (psi(eps), eps)

    if mode == GREEDY:
        value, window = attempt(GREEDY)
        return value, GREEDY, window
    try:
        value, window = attempt(EXACT)
        return value, EXACT, window
    except BudgetExceeded:
        value, window = attempt(GREEDY)
        return value, "greedy(budget)", window


def _estimate_assouad(report, config, sys_, mode, node_budget):
    R_list = _float_grid(config, "R_list", decreasing=False)
    r_list = _float_grid(config, "r_list", decreasing=False)
    scales = _scale_grid(config)
    try:
        fit = mean_assouad_estimate(sys_, scales, R_list, r_list, mode=mode,
                                    node_budget=node_budget)
    except BudgetExceeded as exc:
        report.budget_hit = True
        report.failures.append(f"assouad: budget: {exc}")
        return report
    for (u, R, r, N, count) in fit.samples:
        report.cells.append(_cell_row(
            sys_.name, N, "", math.log2(count), "assouad_log_span", mode,
            window=(r, R)))
    report.estimates.append(_jsonable({
        "system": sys_.name, "flavor": "mean_assouad", "a": fit.a,
        "C": fit.C, "N_threshold": fit.N_threshold,
        "samples": len(fit.samples)}))
    if fit.check():
        report.failures.append("assouad envelope has negative residuals")
    return report


# -- reproduce ---------------------------------------------------------------

def run_reproduce(example, params) -> RunReport:
    """Replay a worked shift-space computation and assert its bounds."""
    example = example.replace("_", "-")
    seed = int(params.get("seed", 0))
    report = RunReport("reproduce", example,
                       _provenance({"example": example, **params}, seed))
    if example == "example1":
        return _reproduce_example1(report, params)
    if example == "example3-span":
        return _reproduce_example3_span(report, params)
    if example == "example3-measure":
        return _reproduce_example3_measure(report, params)
    raise ConfigError("example must be one of example1, example3-span, "
                      "example3-measure")


def _reproduce_example1(report, params):
    """Dyadic-grid full shift: count ratio trends toward 1 from below."""
    grid_size = int(params.get("m_max") or 2)
    n_max = int(params.get("n_max") or 3)
    depth = int(params.get("depth", 6))
    _require(grid_size >= 2, "example1 needs m_max (grid points) >= 2")
    sys_ = build_full_shift(ShiftSpec(grid_size, depth))
    epsilons = [2.0 ** -k for k in range(1, 5)]
    scales = list(range(1, n_max + 1))
    finest = None
    for eps in epsilons:
        for N in scales:
            rep = max_separated(sys_, N, eps)
            value = math.log2(rep.sep_count) / (N * abs(math.log2(eps)))
            report.cells.append(_cell_row(sys_.name, N, eps, value,
                                          "sep_ratio", rep.method))
            finest = (eps, N, rep.sep_count, value)
    eps, N, count, value = finest
    detail = (f"finest cell eps={eps:g} N={N}: sep={count} "
              f"statistic={value:.4f}")
    report.add_check("example1_trend_band", sys_.name,
                     0.2 <= value <= 1.0, details=[detail],
                     failures=[] if 0.2 <= value <= 1.0 else [detail])
    return report


def _example3_levels(m):
    eps = 1.0 / (2.0 * m * m)
    l = math.ceil(math.log2(m * m)) + 1
    h = math.floor(-math.log2(eps))
    return eps, l, h


def _reproduce_example3_span(report, params):
    """Span upper bound (3m)^(N+l) and sep lower bound m^(N+h).

    The span count certifies the bound in either solver mode (greedy covers
    overestimate the minimum); the sep count certifies only via exact
    solves or a witness of sufficient size.
    """
    m_max = int(params.get("m_max") or 3)
    n_max = int(params.get("n_max") or 3)
    for m in range(2, m_max + 1):
        eps, l, h = _example3_levels(m)
        small = [1.0 / k for k in range(1, m + 1)]
        for N in range(1, n_max + 1):
            depth = N + l
            span_bound = (3 * m) ** (N + l)
            sep_bound = m ** (N + h)
            try:
                full = build_alphabet_shift([0.0] + small, depth,
                                            name=f"K({m},{depth})")
                rep = _degraded_count(min_spanning, full, N, eps)
                ok = rep.span_count <= span_bound
                report.cells.append(_cell_row(full.name, N, eps,
                                              rep.span_count, "span",
                                              rep.method))
                report.add_check(
                    f"example3_span[m={m},N={N}]", full.name, ok,
                    details=[f"span={rep.span_count} <= (3m)^(N+l)="
                             f"{span_bound} (depth {depth})"],
                    failures=[] if ok else
                    [f"span={rep.span_count} > {span_bound}"])
            except BudgetExceeded as exc:
                report.budget_hit = True
                report.skipped.append(
                    f"example3_span[m={m},N={N}]: budget: {exc}")
            try:
                restricted = build_alphabet_shift(small, depth,
                                                  name=f"A({m},{depth})")
                rep = _degraded_count(max_separated, restricted, N, eps)
                certified = rep.sep_count >= sep_bound
                report.cells.append(_cell_row(restricted.name, N, eps,
                                              rep.sep_count, "sep",
                                              rep.method))
                report.add_check(
                    f"example3_sep[m={m},N={N}]", restricted.name, certified,
                    details=[f"sep={rep.sep_count} vs m^(N+h)={sep_bound} "
                             f"(h={h}, method {rep.method})"],
                    failures=[] if certified else
                    [f"sep={rep.sep_count} < {sep_bound}"])
            except BudgetExceeded as exc:
                report.budget_hit = True
                report.skipped.append(
                    f"example3_sep[m={m},N={N}]: budget: {exc}")
    return report


# Exact-search ration for one reproduce cell; cells that blow through it
# degrade to the greedy bound so the sweep stays interactive.
REPRODUCE_NODE_BUDGET = 200_000


def _degraded_count(fn, sys_, N, eps):
    try:
        return fn(sys_, N, eps, mode=EXACT,
                  node_budget=REPRODUCE_NODE_BUDGET)
    except BudgetExceeded:
        return fn(sys_, N, eps, mode=GREEDY)


def _reproduce_example3_measure(report, params):
    """Cylinder measure: total mass >= 1 and window growth at theta/4."""
    theta = float(params.get("theta") or 0.5)
    m_max = int(params.get("m_max") or 3)
    n_max = int(params.get("n_max") or 2)
    for m in range(3, max(3, m_max) + 1):
        for N in range(1, n_max + 1):
            sys_ = build_alphabet_shift([1.0 / k for k in range(1, m + 1)],
                                        N, name=f"A({m},{N})")
            p = example3_params(theta, m, N)
            mu = example3_measure(sys_, p)
            cert = example3_cert(p)
            fam = example3_cylinders(sys_, p)
            pairs = [np.concatenate([fam[i], fam[j]])
                     for i in range(len(fam))
                     for j in range(i + 1, min(len(fam), i + 3))]
            res = mass_distribution_lower_bound(sys_, mu, cert,
                                                test_family=list(fam) + pairs)
            total_ok = mu.total >= 1.0 - 1e-12
            report.cells.append(_cell_row(sys_.name, N, p.epsilon, mu.total,
                                          "measure_total", EXACT,
                                          s=p.growth_exponent))
            report.add_check(
                f"example3_measure[m={m},N={N}]", sys_.name,
                total_ok and res.passed,
                details=[f"total={mu.total:.6g} certified_s="
                         f"{p.growth_exponent:.6g} floor={res.floor:.6g}"],
                failures=([] if total_ok else
                          [f"total={mu.total:.6g} < 1"]) +
                         [_jsonable(v) for v in res.violations[:3]])
    return report


# -- check -------------------------------------------------------------------

DEFAULT_CHECK_CONFIG = {
    "systems": [
        {"kind": "two_point", "distance": 1.0},
        {"kind": "line", "grid_size": 3},
        {"kind": "k_shift", "m_max": 2, "depth": 2},
    ],
    "epsilons": [0.5, 0.25],
    "scales": [1, 2],
    "product_epsilons": [0.35, 0.2],
    "psi": {"kind": "power_theta", "theta": 0.5},
    "delta": 0.5,
    "mode": EXACT,
    "partitions": 3,
    "holder": True,
    "products": True,
    "frostman": {"system": {"kind": "line", "grid_size": 41},
                 "theta": 0.125, "epsilon": 0.4, "s": 0.25, "delta": 0.5},
}


def run_checks(config) -> RunReport:
    """Drive every inequality suite over the configured systems."""
    merged = dict(DEFAULT_CHECK_CONFIG)
    merged.update(config or {})
    config = merged
    seed = int(config.get("seed", 0))
    report = RunReport("check", config.get("label", "check"),
                       _provenance(config, seed))
    mode = _mode(config)
    epsilons = _float_grid(config, "epsilons", decreasing=True)
    scales = _scale_grid(config)
    psi = _psi_from_config(config["psi"])
    delta = float(config.get("delta", DEFAULT_DELTA))
    rng = np.random.default_rng(seed)

    systems = []
    for i, spec in enumerate(config["systems"]):
        try:
            systems.append(system_from_config(spec))
        except DomainError as exc:
            report.add_check(f"system_build[{i}]",
                             str(spec.get("kind", "?")), False,
                             failures=[str(exc)])
    for sys_ in systems:
        _check_sandwich(report, sys_, epsilons, scales, mode)
        _check_chain(report, sys_, epsilons, scales, psi, delta, mode)
        _check_monotonicity(report, sys_, psi, epsilons, scales, delta,
                            mode)
        _check_union(report, sys_, psi, epsilons, scales, delta, mode, rng,
                     int(config.get("partitions", 3)))
        _check_uniform_roundtrip(report, sys_, epsilons, scales)
    if config.get("holder", True):
        _check_holder(report, psi, delta, mode)
    if config.get("products", True):
        prod_eps = _float_grid(config, "product_epsilons", decreasing=True)
        _check_products(report, psi, prod_eps, scales, delta, mode)
    if config.get("frostman"):
        _check_frostman(report, config["frostman"], mode)
    for row in report.checks:
        report.cells.append(_cell_row(
            row["system"], 0, "", 1.0 if row["passed"] else 0.0,
            row["name"], mode))
    return report


def _check_sandwich(report, sys_, epsilons, scales, mode):
    if mode != EXACT:
        report.skipped.append(
            f"sandwich[{sys_.name}]: greedy counts are one-sided bounds; "
            f"the sandwich needs exact mode")
        return
    for N in scales:
        radii = sorted({float(e) for e in epsilons}
                       | {2.0 * float(e) for e in epsilons})
        reports = [separation_report(sys_, N, e) for e in radii]
        res = sandwich_check(reports)
        report.add_check(f"sandwich[N={N}]", sys_.name, res.ok,
                         details=res.checked, failures=res.failures)


def _check_chain(report, sys_, epsilons, scales, psi, delta, mode):
    rep = chain_report(sys_, epsilons, scales, psi, delta,
                       mode=_cover_mode(mode))
    report.add_check("chain_cells", sys_.name, rep.passed,
                     details=rep.details, failures=rep.failures,
                     skipped=rep.skipped)
    try:
        h_grid = hausdorff_grid(sys_, epsilons, scales,
                                mode=_cover_mode(mode))
        t_grid = threshold_grid(sys_, epsilons, scales, psi, delta,
                                mode=_cover_mode(mode))
        f_grid = fixed_threshold_grid(sys_, epsilons, scales, delta,
                                      mode=_cover_mode(mode))
        ests = [mean_hausdorff_estimate(sys_, h_grid, side)
                for side in (LOWER, UPPER)]
        ests += [psi_intermediate_estimate(sys_, t_grid, psi, side)
                 for side in (LOWER, UPPER)]
        rep2 = chain_check(ests, fixed_grid=f_grid)
        report.add_check("chain_estimates", sys_.name, rep2.passed,
                         details=rep2.details, failures=rep2.failures,
                         skipped=rep2.skipped)
    except DomainError as exc:
        report.add_check("chain_estimates", sys_.name, False,
                         failures=[str(exc)])


def _check_monotonicity(report, sys_, psi, epsilons, scales, delta, mode):
    rep = psi_monotonicity_check(sys_, psi_zero(), psi, epsilons, scales,
                                 delta, mode=_cover_mode(mode))
    report.add_check("psi_monotonicity[zero<=psi]", sys_.name, rep.passed,
                     details=rep.details, failures=rep.failures,
                     skipped=rep.skipped)


def _check_union(report, sys_, psi, epsilons, scales, delta, mode, rng,
                 partitions):
    if sys_.n < 2:
        report.skipped.append(f"union[{sys_.name}]: needs >= 2 points")
        return
    for k in range(partitions):
        perm = rng.permutation(sys_.n)
        cut = int(rng.integers(1, sys_.n))
        rep = union_stability_check(sys_, perm[:cut], perm[cut:], epsilons,
                                    scales, psi, delta=delta,
                                    mode=_cover_mode(mode))
        report.add_check(f"union_stability[{k}]", sys_.name, rep.passed,
                         details=rep.details[:4], failures=rep.failures,
                         skipped=rep.skipped)


def _check_uniform_roundtrip(report, sys_, epsilons, scales):
    eps = float(min(epsilons))
    N = int(max(scales))
    cert = uniform_growth_certificate(sys_, N, (eps / 4.0, eps), 0.5)
    res = mass_distribution_lower_bound(sys_, uniform_measure(sys_), cert)
    report.add_check("uniform_measure_roundtrip", sys_.name, res.passed,
                     details=[f"floor={res.floor:.6g} at s={res.s}"],
                     failures=[_jsonable(v) for v in res.violations[:3]])


def _check_holder(report, psi, delta, mode):
    quarter = [
        (build_line(9), build_line(33), "line(9)->line(33)"),
        (build_alphabet_shift((1.0, 0.5), 2, name="K(2,2)"),
         build_alphabet_shift((0.25, 0.125), 2, name="K(2,2)/4"),
         "K(2,2)->K(2,2)/4"),
    ]
    C, alpha = 0.25, 1.0
    for src, dst, label in quarter:
        f_ids = np.arange(src.n)
        eps_grid = (0.5, 0.25)
        pairs = [(e, C * psi(e / (4.0 * C)) ** alpha) for e in eps_grid]
        psi1 = psi_table(pairs, domain_bound=1.0)
        try:
            rep = holder_check(src, dst, f_ids, C, alpha, psi, psi1,
                               eps_grid, (1, 2), delta,
                               mode=_cover_mode(mode))
            report.add_check(f"holder[{label}]", src.name, rep.passed,
                             details=rep.details[:6], failures=rep.failures,
                             skipped=rep.skipped)
        except DomainError as exc:
            report.add_check(f"holder[{label}]", src.name, False,
                             failures=[str(exc)])


def _check_products(report, psi, epsilons, scales, delta, mode):
    two = system_from_config({"kind": "two_point"})
    line3 = build_line(3)
    for sys_a, sys_b, label in ((two, two, "two x two"),
                                (two, line3, "two x line3")):
        rep = product_check(sys_a, sys_b, psi, epsilons, scales,
                            delta=delta, mode=_cover_mode(mode))
        report.add_check(f"product[{label}]", f"{sys_a.name} x {sys_b.name}",
                         rep.passed, details=rep.details[:6],
                         failures=rep.failures, skipped=rep.skipped)


def _check_frostman(report, cfg, mode):
    try:
        sys_ = system_from_config(cfg["system"])
        psi = psi_theta(float(cfg.get("theta", 0.125)))
        eps = float(cfg.get("epsilon", 0.4))
        s = float(cfg.get("s", 0.25))
        delta = float(cfg.get("delta", 0.5))
        measure, params = frostman_construct(sys_, int(cfg.get("scale", 1)),
                                             psi, eps, s, delta,
                                             mode=_cover_mode(mode))
        total_ok = abs(measure.total - 1.0) <= 1e-9
        res = mass_distribution_lower_bound(sys_, measure,
                                            frostman_cert(psi, params))
        report.add_check(
            "frostman_roundtrip", sys_.name, total_ok and res.passed,
            details=[f"m={params.m} l={params.l} c2={params.c2:.3g} "
                     f"c={params.c:.6g} floor={params.floor:.6g} "
                     f"total_before={params.total_before_norm:.6g}"],
            failures=([] if total_ok else ["normalization drift"]) +
                     [_jsonable(v) for v in res.violations[:3]])
    except DomainError as exc:
        report.add_check("frostman_roundtrip",
                         str(cfg.get("system", {}).get("kind", "?")), False,
                         failures=[str(exc)])


# -- output ------------------------------------------------------------------

def _write_report(report, out_dir, fmt):
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, report.label.replace("/", "_"))
    paths = []
    if report.cells:
        if fmt == "csv":
            path = base + "-cells.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS,
                                        lineterminator="\n")
                writer.writeheader()
                for row in report.cells:
                    writer.writerow({k: _csv_value(row[k])
                                     for k in CSV_COLUMNS})
        else:
            path = base + "-cells.json"
            with open(path, "w") as fh:
                fh.write(json.dumps(_jsonable(report.cells), sort_keys=True,
                                    indent=2) + "\n")
        paths.append(path)
    path = base + "-report.json"
    with open(path, "w") as fh:
        fh.write(json.dumps(report.to_json_dict(), sort_keys=True, indent=2)
                 + "\n")
    paths.append(path)
    return paths


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    return v


# -- entry point --------------------------------------------------------------

def _parser():
    parser = argparse.ArgumentParser(
        prog="mdimlab", description="dynamical cover statistics runner")
    parser.add_argument("--out-dir", default="runs")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = parser.add_subparsers(dest="command", required=True)
    est = sub.add_parser("estimate", help="sweep one estimator over a grid")
    est.add_argument("--config", required=True)
    rep = sub.add_parser("reproduce", help="replay a worked example")
    rep.add_argument("example", choices=("example1", "example3-span",
                                         "example3-measure"))
    rep.add_argument("--theta", type=float, default=None)
    rep.add_argument("--m-max", type=int, default=None)
    rep.add_argument("--n-max", type=int, default=None)
    chk = sub.add_parser("check", help="run the inequality suite")
    chk.add_argument("--config", default=None)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    started = time.perf_counter()
    try:
        if args.command == "estimate":
            config = _load_config(args.config)
            config.setdefault("seed", args.seed)
            report = run_estimate(config)
        elif args.command == "reproduce":
            report = run_reproduce(args.example,
                                   {"theta": args.theta, "m_max": args.m_max,
                                    "n_max": args.n_max, "seed": args.seed})
        else:
            config = _load_config(args.config) if args.config else {}
            config.setdefault("seed", args.seed)
            report = run_checks(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    paths = _write_report(report, args.out_dir, args.format)
    elapsed = time.perf_counter() - started
    for line in _summary_lines(report):
        print(line)
    print(f"[mdimlab] {report.kind} '{report.label}' finished in "
          f"{elapsed:.2f}s -> {', '.join(paths)}", file=_sys.stderr)
    return report.exit_code()


def _summary_lines(report):
    lines = []
    for chk in report.checks:
        status = "PASS" if chk["passed"] else "FAIL"
        lines.append(f"{status} {chk['name']} [{chk['system']}]")
    for est in report.estimates:
        lines.append(f"estimate {est.get('flavor')}[{est.get('side', '-')}]"
                     f" = {est.get('value', est.get('a'))}")
    for skip in report.skipped:
        lines.append(f"SKIP {skip}")
    return lines


if __name__ == "__main__":
    raise SystemExit(main())
