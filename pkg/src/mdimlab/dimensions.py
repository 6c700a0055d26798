"""Dimension estimators over (epsilon, N) evidence grids.

The limiting definitions (epsilon to 0, N to infinity) are replaced on the
finite models by tail aggregation over a grid of computed statistics: the
inner limit over N becomes a max/min over the large-N half of a column, the
outer limit over epsilon becomes the value at the finest epsilon plus a
recorded linear fit in 1/|log eps|.  All logarithms are base 2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .metric import TOL, DomainError, check_scale, leq, lt, ball_members
from .covers import (EXACT, CoverInfeasible, candidate_diameters,
                     hausdorff_content, max_separated, min_spanning,
                     optimal_cover_cost)

MEAN_HAUSDORFF = "mean_hausdorff"
METRIC_MEAN = "metric_mean"
PSI_INTERMEDIATE = "psi_intermediate"
MEAN_ASSOUAD = "mean_assouad"
UPPER = "upper"
LOWER = "lower"

POWER_THETA = "power_theta"
ZERO = "zero"
CUSTOM_TABLE = "custom_table"

DEFAULT_DELTA = 0.5
BISECT_TOL = 1e-6


# -- window floor functions ----------------------------------------------

@dataclass(frozen=True)
class AdmissibleFunction:
    """Lower edge of the diameter window: monotone, below the identity.

    ``power_theta`` evaluates eps**(1/theta); ``zero`` pins the floor at 0,
    collapsing the window to a plain content window; ``custom_table`` looks
    values up in a finite (eps, value) table.
    """
    kind: str
    theta: float = None
    domain_bound: float = 1.0
    table: tuple = None

    def __post_init__(self):
        if self.kind not in (POWER_THETA, ZERO, CUSTOM_TABLE):
            raise DomainError(f"unknown admissible kind {self.kind!r}")
        if not 0 < self.domain_bound <= 1:
            raise DomainError("domain_bound must lie in (0, 1]")
        if self.kind == POWER_THETA:
            if self.theta is None or not 0 < self.theta <= 1:
                raise DomainError("theta must lie in (0, 1]")
        if self.kind == CUSTOM_TABLE:
            if not self.table:
                raise DomainError("custom_table needs (eps, value) pairs")
            object.__setattr__(self, "table",
                               tuple(sorted((float(e), float(v))
                                            for e, v in self.table)))

    def __call__(self, eps):
        eps = float(eps)
        if not 0 < eps <= self.domain_bound + TOL:
            raise DomainError(f"eps {eps} outside domain (0, "
                              f"{self.domain_bound}]")
        if self.kind == ZERO:
            return 0.0
        if self.kind == POWER_THETA:
            return eps ** (1.0 / self.theta)
        for e, v in self.table:
            if abs(e - eps) <= TOL:
                return v
        raise DomainError(f"eps {eps} not tabulated")

    def describe(self):
        if self.kind == POWER_THETA:
            return f"power_theta({self.theta})"
        if self.kind == ZERO:
            return "zero"
        return f"custom_table({len(self.table)} entries)"

    def check_grid(self, epsilons):
        """Violations of monotonicity, value < eps, and vanishing ratio."""
        eps = sorted(float(e) for e in epsilons)
        vals = [self(e) for e in eps]
        bad = []
        for e, v in zip(eps, vals):
            if self.kind != ZERO and not lt(v, e):
                bad.append(f"value {v} not below eps {e}")
        for (e0, v0), (e1, v1) in zip(zip(eps, vals), zip(eps[1:], vals[1:])):
            if lt(v1, v0):
                bad.append(f"not monotone between eps {e0} and {e1}")
            if self.kind != ZERO and lt(v1 / e1, v0 / e0):
                bad.append(f"ratio increases from eps {e0} to {e1}")
        return bad


def psi_theta(theta, domain_bound=1.0) -> AdmissibleFunction:
    """eps -> eps**(1/theta); theta in (0, 1)."""
    return AdmissibleFunction(POWER_THETA, theta=float(theta),
                              domain_bound=domain_bound)


def psi_zero(domain_bound=1.0) -> AdmissibleFunction:
    """The zero floor: the window degenerates to (0, eps]."""
    return AdmissibleFunction(ZERO, domain_bound=domain_bound)


def psi_table(pairs, domain_bound=1.0) -> AdmissibleFunction:
    return AdmissibleFunction(CUSTOM_TABLE, table=tuple(pairs),
                              domain_bound=domain_bound)


def _validated_psi(psi, epsilons):
    bad = psi.check_grid(epsilons)
    if bad:
        raise DomainError("window floor not admissible on this grid: "
                          + "; ".join(bad[:3]))
    return psi


# -- evidence grids --------------------------------------------------------

@dataclass(frozen=True)
class EvidenceGrid:
    """Per-cell statistics over decreasing epsilons and increasing scales.

    ``cells`` maps (eps, N) to the statistic value, or None for cells whose
    window was infeasible.  Every cell is computed with one system, one
    window rule and one solver mode, recorded in ``meta``.
    """
    system: str
    statistic_kind: str
    epsilons: tuple
    scales: tuple
    cells: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        scl = tuple(int(N) for N in self.scales)
        if any(b >= a for a, b in zip(eps, eps[1:])) or not eps:
            raise DomainError("epsilons must be strictly decreasing")
        if any(b <= a for a, b in zip(scl, scl[1:])) or not scl:
            raise DomainError("scales must be strictly increasing")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "scales", scl)
        missing = [(e, N) for e in eps for N in scl
                   if (e, N) not in self.cells]
        if missing:
            raise DomainError(f"missing grid cells: {missing[:3]}")

    def value(self, eps, N):
        return self.cells[(float(eps), int(N))]

    def column(self, eps):
        """Values over the scales for one epsilon (None cells skipped)."""
        return [self.cells[(float(eps), N)] for N in self.scales]

    def rows(self):
        out = []
        for e in self.epsilons:
            for N in self.scales:
                v = self.cells[(e, N)]
                out.append({"system": self.system, "N": N, "epsilon": e,
                            "window_lo": self.meta.get("window_lo", ""),
                            "window_hi": self.meta.get("window_hi", ""),
                            "s": self.meta.get("s", ""),
                            "delta": self.meta.get("delta", ""),
                            "statistic": self.statistic_kind,
                            "value": "" if v is None else v,
                            "method": self.meta.get("mode", EXACT)})
        return out


def _tail(values):
    """The upper half of a sequence (at least one element)."""
    k = (len(values) + 1) // 2
    return values[len(values) - k:]


def _column_tail(grid, eps, drop_none=True):
    vals = [grid.cells[(eps, N)] for N in _tail(grid.scales)]
    if drop_none:
        vals = [v for v in vals if v is not None]
    return vals


def _require_grid(grid):
    if len(grid.epsilons) < 2 or len(grid.scales) < 2:
        raise DomainError("insufficient grid: need at least two epsilons "
                          "and two scales")


def _fit_in_log(eps_values, aggregates):
    """Linear fit of the per-epsilon aggregates against 1/|log2 eps|."""
    xs, ys = [], []
    for e, v in zip(eps_values, aggregates):
        if v is None or not 0 < e < 1:
            continue
        xs.append(1.0 / abs(math.log2(e)))
        ys.append(v)
    if len(xs) < 2 or len(set(xs)) < 2:
        return {"fit_intercept": None, "fit_slope": None}
    slope, intercept = np.polyfit(np.asarray(xs), np.asarray(ys), 1)
    return {"fit_intercept": float(intercept), "fit_slope": float(slope)}


# -- estimates --------------------------------------------------------------

@dataclass(frozen=True)
class DimensionEstimate:
    """A one-sided dimension estimate together with its evidence."""
    flavor: str
    side: str
    value: float
    grid: EvidenceGrid
    extrapolation: dict

    def __post_init__(self):
        if self.side not in (UPPER, LOWER):
            raise DomainError(f"side must be upper or lower, got {self.side}")
        if self.value < -TOL:
            raise DomainError(f"estimate value {self.value} is negative")
        object.__setattr__(self, "value", max(0.0, float(self.value)))

    def to_json_dict(self):
        g = self.grid
        return {"system": g.system, "flavor": self.flavor, "side": self.side,
                "value": self.value, "delta": g.meta.get("delta"),
                "grid": g.rows(), "extrapolation": self.extrapolation}


@dataclass(frozen=True)
class AssouadFit:
    """Envelope fit span(ball R, scale r) <= C (R/r)^a over the samples."""
    C: float
    a: float
    N_threshold: int
    residuals: tuple
    samples: tuple = ()

    def check(self):
        return [r for r in self.residuals if r < -1e-9]


@dataclass(frozen=True)
class CheckReport:
    """Outcome of an inequality suite: pass/fail plus per-cell detail."""
    name: str
    passed: bool
    details: tuple
    failures: tuple
    skipped: tuple = ()


# -- per-cell thresholds ----------------------------------------------------

def _bisect_threshold(feasible, hi_start, tol):
    """Smallest x >= 0 with feasible(x), for a monotone feasibility set."""
    if feasible(0.0):
        return 0.0
    hi = hi_start
    while not feasible(hi):
        hi *= 2.0
        if hi > 2.0 ** 22:
            raise DomainError("threshold bisection failed to bracket")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def dim_eps_H(sys, scale, epsilon, tol=BISECT_TOL, mode=EXACT, subset=None,
              min_diameter=0.0, node_budget=None) -> float:
    """t-threshold where the optimal content at cutoff epsilon reaches 1.

    With the default floor 0 every finite model thresholds at 0, since
    vanishing balls carry no cost; a positive ``min_diameter`` acts as the
    resolution floor below which the model cannot distinguish scales.
    """
    N = check_scale(scale)
    if tol <= 0:
        raise DomainError("tol must be positive")
    cand = candidate_diameters(sys, scale, (min_diameter, float(epsilon)),
                               subset, strict_hi=True)
    if cand.size and not leq(float(cand.max()), 1.0):
        raise DomainError("content is only monotone in t when every "
                          "admissible diameter is <= 1")

    def feasible(t):
        c, _ = hausdorff_content(sys, scale, t, epsilon, mode, subset,
                                 node_budget, min_diameter)
        return leq(c, 1.0)

    return _bisect_threshold(feasible, 1.0, tol)


def psi_threshold(sys, scale, epsilon, psi, delta=DEFAULT_DELTA,
                  tol=BISECT_TOL, mode=EXACT, subset=None,
                  node_budget=None) -> float:
    """Smallest s where the optimal windowed cover cost drops below delta.

    The window is (psi(eps), eps] and the cost of a cover is
    sum (2 r_i)^(N s); the cost is re-optimized at every probed s because
    the cheapest cover may change shape with the exponent.
    """
    N = check_scale(scale)
    epsilon = float(epsilon)
    if not 0 < epsilon < 1:
        raise DomainError("threshold needs 0 < epsilon < 1")
    if delta <= 0:
        raise DomainError("delta must be positive")
    lo = psi(epsilon)
    if not lt(lo, epsilon):
        raise CoverInfeasible(f"window floor {lo} reaches eps {epsilon}")

    def feasible(s):
        cover = optimal_cover_cost(sys, scale, (lo, epsilon), s, mode=mode,
                                   subset=subset, node_budget=node_budget)
        return lt(cover.cost, delta)

    return _bisect_threshold(feasible, 1.0, tol)


def fixed_diameter_threshold(sys, scale, epsilon, delta=DEFAULT_DELTA,
                             mode=EXACT, subset=None,
                             node_budget=None) -> float:
    """Threshold when every cover ball is pinned to diameter epsilon.

    With a single admissible diameter the optimal cover minimizes the count
    n, so the crossing of n * eps^(N s) = delta has the closed form
    log2(n / delta) / (N |log2 eps|).
    """
    N = check_scale(scale)
    epsilon = float(epsilon)
    if not 0 < epsilon < 1:
        raise DomainError("threshold needs 0 < epsilon < 1")
    window = (epsilon * (1.0 - 1e-9), epsilon)
    cover = optimal_cover_cost(sys, scale, window, 0.0, mode=mode,
                               subset=subset, node_budget=node_budget)
    count = cover.count
    s0 = math.log2(count / delta) / (N * abs(math.log2(epsilon)))
    return max(0.0, s0)


# -- grid builders ----------------------------------------------------------

def hausdorff_grid(sys, epsilons, scales, tol=BISECT_TOL, mode=EXACT,
                   subset=None, min_diameter=0.0,
                   node_budget=None) -> EvidenceGrid:
    """Cells dim_eps_H(eps, N) / N."""
    cells = {}
    for e in epsilons:
        for N in scales:
            cells[(float(e), int(N))] = dim_eps_H(
                sys, N, e, tol, mode, subset, min_diameter,
                node_budget) / int(N)
    return EvidenceGrid(sys.name, "hausdorff_ratio", tuple(epsilons),
                        tuple(scales), cells,
                        {"mode": mode, "min_diameter": min_diameter})


def counting_grid(sys, epsilons, scales, statistic="sep", mode=EXACT,
                  subset=None, node_budget=None) -> EvidenceGrid:
    """Cells log2(count) / (N |log2 eps|) for sep or span counts."""
    if statistic not in ("sep", "span"):
        raise DomainError("statistic must be 'sep' or 'span'")
    fn = max_separated if statistic == "sep" else min_spanning
    cells = {}
    for e in epsilons:
        if not 0 < float(e) < 1:
            raise DomainError("counting statistics need 0 < eps < 1")
        for N in scales:
            rep = fn(sys, N, e, mode=mode, subset=subset,
                     node_budget=node_budget)
            count = rep.sep_count if statistic == "sep" else rep.span_count
            cells[(float(e), int(N))] = (
                math.log2(count) / (int(N) * abs(math.log2(float(e)))))
    return EvidenceGrid(sys.name, f"{statistic}_ratio", tuple(epsilons),
                        tuple(scales), cells, {"mode": mode})


def threshold_grid(sys, epsilons, scales, psi, delta=DEFAULT_DELTA,
                   tol=BISECT_TOL, mode=EXACT, subset=None,
                   node_budget=None) -> EvidenceGrid:
    """Cells s*(eps, N); infeasible windows leave None cells."""
    _validated_psi(psi, epsilons)
    cells = {}
    for e in epsilons:
        for N in scales:
            try:
                cells[(float(e), int(N))] = psi_threshold(
                    sys, N, e, psi, delta, tol, mode, subset, node_budget)
            except CoverInfeasible as exc:
                warnings.warn(f"cell (eps={e}, N={N}) infeasible: {exc}")
                cells[(float(e), int(N))] = None
    return EvidenceGrid(sys.name, "psi_threshold", tuple(epsilons),
                        tuple(scales), cells,
                        {"mode": mode, "delta": delta,
                         "psi": psi.describe()})


def fixed_threshold_grid(sys, epsilons, scales, delta=DEFAULT_DELTA,
                         mode=EXACT, subset=None,
                         node_budget=None) -> EvidenceGrid:
    """Cells of the fixed-diameter threshold (the all-2r=eps cover)."""
    cells = {}
    for e in epsilons:
        for N in scales:
            cells[(float(e), int(N))] = fixed_diameter_threshold(
                sys, N, e, delta, mode, subset, node_budget)
    return EvidenceGrid(sys.name, "fixed_threshold", tuple(epsilons),
                        tuple(scales), cells, {"mode": mode, "delta": delta})


# -- aggregation ------------------------------------------------------------

def _aggregate_columns(grid, inner):
    """Per-epsilon aggregate over the large-N tail; None if all dropped."""
    out = []
    for e in grid.epsilons:
        vals = _column_tail(grid, e)
        if not vals:
            warnings.warn(f"epsilon column {e} entirely infeasible; dropped")
            out.append(None)
        else:
            out.append(inner(vals))
    return out


def mean_hausdorff_estimate(sys, grid, side) -> DimensionEstimate:
    """Tail value of dim_eps_H/N columns, with the fit in 1/|log eps|."""
    _require_grid(grid)
    if grid.statistic_kind != "hausdorff_ratio":
        raise DomainError("grid cells must be dim_eps_H / N")
    inner = max if side == UPPER else min
    per_eps = _aggregate_columns(grid, inner)
    finest = per_eps[-1]
    if finest is None:
        raise DomainError("finest epsilon column is infeasible")
    extrap = {"per_epsilon": per_eps, "final_epsilon": grid.epsilons[-1],
              "tail_value": finest}
    extrap.update(_fit_in_log(grid.epsilons, per_eps))
    return DimensionEstimate(MEAN_HAUSDORFF, side, finest, grid, extrap)


def metric_mean_estimate(sys, grid, side, statistic=None) -> DimensionEstimate:
    """Count-ratio statistic: limsup over N inside, max/min over eps tail."""
    _require_grid(grid)
    if grid.statistic_kind not in ("sep_ratio", "span_ratio"):
        raise DomainError("grid cells must be log(count)/(N |log eps|)")
    if statistic is not None and f"{statistic}_ratio" != grid.statistic_kind:
        raise DomainError(f"grid holds {grid.statistic_kind}, not "
                          f"{statistic} cells")
    per_eps = _aggregate_columns(grid, max)
    tail = [v for v in _tail(per_eps) if v is not None]
    if not tail:
        raise DomainError("every epsilon column is infeasible")
    value = max(tail) if side == UPPER else min(tail)
    extrap = {"per_epsilon": per_eps, "final_epsilon": grid.epsilons[-1],
              "tail_value": value}
    extrap.update(_fit_in_log(grid.epsilons, per_eps))
    return DimensionEstimate(METRIC_MEAN, side, value, grid, extrap)


def psi_intermediate_estimate(sys, grid, psi, side) -> DimensionEstimate:
    """Threshold cells aggregated over the (small-eps, large-N) tail.

    The upper side takes the max over the tail (the exponent that works for
    every late cell); the lower side takes the min (an exponent achieved by
    some late cell).
    """
    _require_grid(grid)
    if grid.statistic_kind != "psi_threshold":
        raise DomainError("grid cells must be s*(eps, N) thresholds")
    tail_cells = []
    for e in _tail(grid.epsilons):
        tail_cells.extend(_column_tail(grid, e))
    if not tail_cells:
        raise DomainError("every tail cell is infeasible")
    value = max(tail_cells) if side == UPPER else min(tail_cells)
    per_eps = _aggregate_columns(grid, max if side == UPPER else min)
    extrap = {"per_epsilon": per_eps, "final_epsilon": grid.epsilons[-1],
              "tail_value": value, "delta": grid.meta.get("delta")}
    extrap.update(_fit_in_log(grid.epsilons, per_eps))
    return DimensionEstimate(PSI_INTERMEDIATE, side, value, grid, extrap)


def mean_assouad_estimate(sys, scales, R_list, r_list, centers=None,
                          mode=EXACT, node_budget=None) -> AssouadFit:
    """Envelope exponent for span(ball(u, R), r) <= C (R/r)^a.

    Samples every (center, R, r, N) with r <= min(1, R), computes the exact
    span of the ball restricted to the model, least-squares fits log span
    against log(R/r), and lifts C so every residual is nonnegative.
    """
    if centers is None:
        step = max(1, sys.n // 64)
        centers = range(0, sys.n, step)
    xs, ys, samples = [], [], []
    for N in scales:
        for u in centers:
            row = sys.bowen_row(int(u), N)
            for R in R_list:
                members = np.flatnonzero(leq(row, float(R)))
                for r in r_list:
                    if not leq(float(r), min(1.0, float(R))):
                        continue
                    rep = min_spanning(sys, N, r, mode=mode, subset=members,
                                       node_budget=node_budget)
                    xs.append(math.log2(float(R) / float(r)))
                    ys.append(math.log2(rep.span_count))
                    samples.append((int(u), float(R), float(r), int(N),
                                    rep.span_count))
    if not samples:
        raise DomainError("no admissible (center, R, r, N) samples")
    xs, ys = np.asarray(xs), np.asarray(ys)
    if np.ptp(xs) > TOL:
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = 0.0
    a = max(0.0, slope)
    log_C = float(np.max(ys - a * xs))
    C = 2.0 ** max(0.0, log_C)
    residuals = tuple(float(v)
                      for v in (math.log2(C) + a * xs - ys))
    return AssouadFit(C, a, int(min(scales)) - 1, residuals, tuple(samples))


# -- inequality suites -------------------------------------------------------

def chain_report(sys, epsilons, scales, psi, delta=DEFAULT_DELTA,
                 tol=BISECT_TOL, mode=EXACT, subset=None,
                 node_budget=None) -> CheckReport:
    """Cell-wise chain: content threshold <= windowed s* <= fixed-diameter.

    This is the level at which the two-sided comparison of the three cover
    statistics is literally assertable on finite data.
    """
    _validated_psi(psi, epsilons)
    details, failures = [], []
    for e in epsilons:
        for N in scales:
            hc = dim_eps_H(sys, N, e, tol, mode, subset,
                           node_budget=node_budget) / int(N)
            try:
                sp = psi_threshold(sys, N, e, psi, delta, tol, mode, subset,
                                   node_budget)
            except CoverInfeasible:
                details.append(f"eps={e} N={N}: window infeasible, skipped")
                continue
            sf = fixed_diameter_threshold(sys, N, e, delta, mode, subset,
                                          node_budget)
            line = (f"eps={e} N={N}: H/N={hc:.6f} <= s*={sp:.6f} "
                    f"<= fixed={sf:.6f}")
            details.append(line)
            if not (leq(hc, sp + 2 * tol) and leq(sp, sf + 2 * tol)):
                failures.append(line)
    return CheckReport("chain", not failures, tuple(details),
                       tuple(failures))


def chain_check(estimates, fixed_grid=None, tol=BISECT_TOL) -> CheckReport:
    """Chain inequalities between finished estimates, cell-wise.

    Requires matched grids (same system, epsilons, scales, delta).  The
    assertable form is per cell: the content threshold ratio stays below the
    windowed threshold, which stays below the fixed-diameter threshold (pass
    ``fixed_grid`` for the latter).  Within each flavor lower <= upper and
    all values are nonnegative.  Cross-flavor orderings of the aggregated
    values are recorded in the details but not asserted: the finite-grid
    aggregates may cross even though the limits cannot.
    """
    if not estimates:
        raise DomainError("no estimates given")
    grids = [est.grid for est in estimates]
    if fixed_grid is not None:
        grids = grids + [fixed_grid]
    base = grids[0]
    for g in grids[1:]:
        if (g.system != base.system or g.epsilons != base.epsilons
                or g.scales != base.scales):
            raise DomainError("estimates computed on mismatched grids")
    deltas = {g.meta.get("delta") for g in grids
              if g.meta.get("delta") is not None}
    if len(deltas) > 1:
        raise DomainError("estimates computed with different deltas")
    details, failures = [], []
    by_flavor = {}
    for est in estimates:
        by_flavor.setdefault(est.flavor, {})[est.side] = est
    h_grid = next((e.grid for e in estimates
                   if e.flavor == MEAN_HAUSDORFF), None)
    psi_grid = next((e.grid for e in estimates
                     if e.flavor == PSI_INTERMEDIATE), None)
    cell_pairs = []
    if h_grid is not None and psi_grid is not None:
        cell_pairs.append(("H/N", h_grid, "s*", psi_grid))
    if psi_grid is not None and fixed_grid is not None:
        cell_pairs.append(("s*", psi_grid, "fixed", fixed_grid))
    for la, ga, lb, gb in cell_pairs:
        for e in base.epsilons:
            for N in base.scales:
                va, vb = ga.cells[(e, N)], gb.cells[(e, N)]
                if va is None or vb is None:
                    continue
                line = (f"eps={e} N={N}: {la}={va:.6f} <= {lb}={vb:.6f}")
                if not leq(va, vb + 2 * tol):
                    failures.append(line)
        details.append(f"cell-wise {la} <= {lb} over "
                       f"{len(base.epsilons) * len(base.scales)} cells")
    for flavor, sides in by_flavor.items():
        for side, est in sides.items():
            if est.value < -TOL:
                failures.append(f"{flavor}/{side} negative: {est.value}")
        if LOWER in sides and UPPER in sides:
            lo, hi = sides[LOWER].value, sides[UPPER].value
            line = f"{flavor}: lower={lo:.6f} <= upper={hi:.6f}"
            details.append(line)
            if not leq(lo, hi + 1e-9):
                failures.append(line)
    order = [(MEAN_HAUSDORFF, UPPER), (PSI_INTERMEDIATE, UPPER),
             (METRIC_MEAN, UPPER)]
    vals = [f"{f}/{s}={by_flavor[f][s].value:.6f}"
            for f, s in order if f in by_flavor and s in by_flavor[f]]
    if len(vals) > 1:
        details.append("aggregate order (recorded): " + " vs ".join(vals))
    return CheckReport("chain_estimates", not failures, tuple(details),
                       tuple(failures))


def psi_monotonicity_check(sys, psi1, psi2, epsilons, scales,
                           delta=DEFAULT_DELTA, tol=BISECT_TOL, mode=EXACT,
                           subset=None, node_budget=None) -> CheckReport:
    """Wider windows never raise the threshold: psi1 <= psi2 -> s*1 <= s*2."""
    for e in epsilons:
        if lt(psi2(e), psi1(e)):
            raise DomainError(f"psi ordering violated at eps={e}")
    details, failures = [], []
    for e in epsilons:
        for N in scales:
            s1 = psi_threshold(sys, N, e, psi1, delta, tol, mode, subset,
                               node_budget)
            try:
                s2 = psi_threshold(sys, N, e, psi2, delta, tol, mode, subset,
                                   node_budget)
            except CoverInfeasible:
                details.append(f"eps={e} N={N}: narrow window infeasible")
                continue
            line = f"eps={e} N={N}: s*(psi1)={s1:.6f} <= s*(psi2)={s2:.6f}"
            details.append(line)
            if not leq(s1, s2 + 2 * tol):
                failures.append(line)
    return CheckReport("psi_monotonicity", not failures, tuple(details),
                       tuple(failures))


def union_stability_check(sys, ids_a, ids_b, epsilons, scales, psi,
                          s_values=(0.5, 1.0), delta=DEFAULT_DELTA,
                          tol=BISECT_TOL, mode=EXACT,
                          node_budget=None) -> CheckReport:
    """Cover costs are subadditive and thresholds union-stable.

    Cell-wise: cost(A union B) <= cost(A) + cost(B) at each probed s, and
    the doubled-budget threshold of the union stays below the larger of the
    factor thresholds.
    """
    ids_a = np.unique(np.asarray(list(ids_a), dtype=np.int64))
    ids_b = np.unique(np.asarray(list(ids_b), dtype=np.int64))
    for ids in (ids_a, ids_b):
        if ids.size == 0 or ids.min() < 0 or ids.max() >= sys.n:
            raise DomainError("subsets must be nonempty point ids of sys")
    ids_u = np.union1d(ids_a, ids_b)
    b_in_a = np.isin(ids_b, ids_a).all()
    details, failures = [], []
    for e in epsilons:
        window = (psi(e), float(e))
        if not lt(window[0], window[1]):
            details.append(f"eps={e}: window infeasible, skipped")
            continue
        for N in scales:
            for s in s_values:
                parts = {}
                for tag, ids in (("A", ids_a), ("B", ids_b), ("U", ids_u)):
                    parts[tag] = optimal_cover_cost(
                        sys, N, window, s, mode=mode, subset=ids,
                        node_budget=node_budget).cost
                line = (f"eps={e} N={N} s={s}: cost(U)={parts['U']:.6g} vs "
                        f"cost(A)+cost(B)={parts['A'] + parts['B']:.6g}")
                details.append(line)
                if not leq(parts["U"], parts["A"] + parts["B"]):
                    failures.append(line)
            sa = psi_threshold(sys, N, e, psi, delta, tol, mode, ids_a,
                               node_budget)
            sb = psi_threshold(sys, N, e, psi, delta, tol, mode, ids_b,
                               node_budget)
            su = psi_threshold(sys, N, e, psi, 2 * delta, tol, mode, ids_u,
                               node_budget)
            line = (f"eps={e} N={N}: s*_2delta(U)={su:.6f} vs "
                    f"max(s*(A), s*(B))={max(sa, sb):.6f}")
            details.append(line)
            if not leq(su, max(sa, sb) + 2 * tol):
                failures.append(line)
            if b_in_a:
                su1 = psi_threshold(sys, N, e, psi, delta, tol, mode, ids_u,
                                    node_budget)
                sa1 = psi_threshold(sys, N, e, psi, delta, tol, mode, ids_a,
                                    node_budget)
                if abs(su1 - sa1) > 2 * tol:
                    failures.append(f"eps={e} N={N}: B within A but "
                                    f"s*(U)={su1} != s*(A)={sa1}")
    return CheckReport("union_stability", not failures, tuple(details),
                       tuple(failures))


def _holder_pairs_violation(src, dst, f_ids, C, alpha, scales):
    for N in scales:
        for i in range(src.n):
            d_src = src.bowen_row(i, N)
            d_dst = dst.bowen_pairs(f_ids[i:i + 1], f_ids, N)[0]
            bound = C * d_src ** alpha
            bad = np.flatnonzero(d_dst > bound + 1e-9)
            if bad.size:
                j = int(bad[0])
                return (N, i, j, float(d_dst[j]), float(bound[j]))
    return None


def holder_check(src, dst, f_ids, C, alpha, psi, psi1, epsilons, scales,
                 delta=DEFAULT_DELTA, tol=BISECT_TOL, mode=EXACT,
                 perfectness=None, node_budget=None) -> CheckReport:
    """Distortion of windowed cover costs under a (C, alpha)-Holder map.

    Verifies the map is (C, alpha)-Holder in every probed Bowen metric,
    checks the window-compatibility hypothesis relating psi1 to psi, then
    pushes an optimal source cover forward and asserts the image cost stays
    below (4C)^(N s) * delta at the matched cell.
    """
    f_ids = np.asarray(list(f_ids), dtype=np.int64)
    if f_ids.shape != (src.n,):
        raise DomainError("f must map every source point to a target id")
    if not (0 < C and 0 < alpha <= 1):
        raise DomainError("need C > 0 and alpha in (0, 1]")
    hit = _holder_pairs_violation(src, dst, f_ids, C, alpha, scales)
    if hit is not None:
        N, i, j, d, bound = hit
        raise DomainError(
            f"map is not ({C}, {alpha})-Holder at scale {N}: pair "
            f"({i}, {j}) has image distance {d} > {bound}")
    p_const = getattr(perfectness, "constant", None) or 1.0
    details, failures = [], []
    for e in epsilons:
        e = float(e)
        e_src = (e / (4.0 * C)) ** (1.0 / alpha)
        hyp = C * p_const * psi(e_src) ** alpha
        if lt(hyp, psi1(e)):
            raise DomainError(
                f"window hypothesis fails at eps={e}: psi1={psi1(e)} "
                f"> C p psi((eps/4C)^(1/alpha))^alpha = {hyp}")
        for N in scales:
            try:
                s_cell = psi_threshold(src, N, e_src, psi, delta, tol, mode,
                                       node_budget=node_budget) + 10 * tol
            except CoverInfeasible:
                details.append(f"eps={e} N={N}: source window infeasible")
                continue
            cover = optimal_cover_cost(src, N, (psi(e_src), e_src), s_cell,
                                       mode=mode, node_budget=node_budget)
            expo = N * s_cell / alpha
            image_cost = 0.0
            window_ok = True
            covered = set()
            for b in cover.balls:
                diam = 2.0 * C * (b.diameter / 2.0) ** alpha
                radius = diam / 2.0
                members = ball_members(dst, int(f_ids[b.center]), radius, N,
                                       subset=f_ids)
                covered.update(int(f_ids[m]) for m in b.members)
                image_pts = {int(f_ids[m]) for m in b.members}
                if not image_pts <= set(int(m) for m in members):
                    window_ok = False
                if not (lt(psi1(e), diam) and leq(diam, e)):
                    window_ok = False
                image_cost += diam ** expo
            bound = (4.0 * C) ** expo * delta
            line = (f"eps={e} N={N}: image cost {image_cost:.6g} <= "
                    f"(4C)^(Ns) delta = {bound:.6g}")
            details.append(line)
            if not window_ok:
                failures.append(f"eps={e} N={N}: pushforward ball left the "
                                f"admissible window or lost members")
            if not leq(image_cost, bound):
                failures.append(line)
            if covered != {int(v) for v in f_ids}:
                failures.append(f"eps={e} N={N}: pushforward misses image "
                                f"points")
    return CheckReport("holder", not failures, tuple(details),
                       tuple(failures))


def product_check(sys_a, sys_b, psi, epsilons, scales, s_a=0.5, s_b=0.5,
                  delta=DEFAULT_DELTA, tol=BISECT_TOL, mode=EXACT,
                  measures=None, node_budget=None) -> CheckReport:
    """Cover-cost subadditivity and measure-certified superadditivity.

    In half-max mode a product ball of diameter t is the product of factor
    balls of diameter 2t, so factor covers of windows (2 psi(eps), 2 eps]
    assemble into an admissible product cover whose cost dominates the exact
    optimum; in max mode a product of factor measures certifies the lower
    cost floor a/c through the mass distribution argument.
    """
    from .systems import build_product
    from .measures import uniform_growth_certificate
    prod_half = build_product(sys_a, sys_b, "half_max")
    prod_max = build_product(sys_a, sys_b, "max")
    details, failures = [], []
    for e in epsilons:
        e = float(e)
        lo, hi = psi(e), e
        if not (lt(lo, hi) and lt(2.0 * hi, 1.0)):
            details.append(f"eps={e}: doubled factor window infeasible, "
                           f"skipped")
            continue
        for N in scales:
            # -- subadditivity in half-max mode ---------------------------
            try:
                cover_a = optimal_cover_cost(sys_a, N, (2 * lo, 2 * hi), s_a,
                                             mode=mode,
                                             node_budget=node_budget)
            except CoverInfeasible:
                details.append(f"eps={e} N={N}: factor window infeasible")
                continue
            diams = [float(t) for t in
                     candidate_diameters(sys_a, N, (2 * lo, 2 * hi))]
            count_b = {}
            for t in diams:
                cb = optimal_cover_cost(sys_b, N, (t * (1 - 1e-9), t), 0.0,
                                        mode=mode, node_budget=node_budget)
                count_b[t] = cb.count
            witness_cost = sum(count_b[b.diameter]
                               * (b.diameter / 2.0) ** (N * (s_a + s_b))
                               for b in cover_a.balls)
            exact = optimal_cover_cost(prod_half, N, (lo, hi), s_a + s_b,
                                       mode=mode, node_budget=node_budget)
            line = (f"eps={e} N={N}: half-max exact {exact.cost:.6g} <= "
                    f"witness {witness_cost:.6g}")
            details.append(line)
            if not leq(exact.cost, witness_cost):
                failures.append(line)
            s_b_cover = max((math.log2(c) / (N * math.log2(2.0 / t))
                             for t, c in count_b.items()
                             if 0 < t < 2.0 and c > 1), default=0.0)
            s_star_a = psi_threshold(sys_a, N, 2 * hi,
                                     _scaled_floor(psi, e), delta, tol,
                                     mode, node_budget=node_budget)
            s_star_prod = psi_threshold(prod_half, N, hi, psi, delta, tol,
                                        mode, node_budget=node_budget)
            line = (f"eps={e} N={N}: s*(prod)={s_star_prod:.6f} <= "
                    f"s*(A)={s_star_a:.6f} + cover(B)={s_b_cover:.6f}")
            details.append(line)
            if not leq(s_star_prod, s_star_a + s_b_cover + 4 * tol):
                failures.append(line)
            # -- superadditivity in max mode via product measures ----------
            if lo <= 0:
                details.append(f"eps={e} N={N}: zero window floor, product "
                               f"measure floor skipped (growth constants "
                               f"transfer only for positive floors)")
                continue
            if measures is None:
                cert_a = uniform_growth_certificate(sys_a, N, (lo, hi), s_a)
                cert_b = uniform_growth_certificate(sys_b, N, (lo, hi), s_b)
            else:
                cert_a, cert_b = measures
            floor = cert_a.a * cert_b.a / (cert_a.c * cert_b.c)
            exact_max = optimal_cover_cost(prod_max, N, (lo, hi), s_a + s_b,
                                           mode=mode,
                                           node_budget=node_budget)
            line = (f"eps={e} N={N}: max-mode exact {exact_max.cost:.6g} >= "
                    f"measure floor {floor:.6g}")
            details.append(line)
            if not leq(floor, exact_max.cost + TOL):
                failures.append(line)
    return CheckReport("product", not failures, tuple(details),
                       tuple(failures))


def _scaled_floor(psi, eps):
    """Floor for the doubled factor window (2 psi(eps) at 2 eps)."""
    return psi_table([(2.0 * eps, 2.0 * psi(eps))],
                     domain_bound=min(1.0, 2.0 * eps))
