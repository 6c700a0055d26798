"""Separated sets, spanning sets, optimal ball covers, and cube hierarchies.

The counting side implements the two packing quantities of the Bowen metric
d_N: sep(N, eps), the largest cardinality of a subset with all pairwise
distances >= eps, and span(N, eps), the smallest number of open eps-balls
centered in the set that cover it.  Both have a greedy mode (bounds) and an
exact branch-and-bound mode, and exact counts always satisfy the sandwich

    sep(N, 2 eps) <= span(N, eps) <= sep(N, eps).

The cover-cost side minimizes sums of powers of nominal ball diameters over
covers whose diameters are confined to a window; Hausdorff content and the
windowed dimension statistics are both built on it.

On a finite model only finitely many balls matter: shrinking a ball onto the
farthest point it must contain never increases its cost, so the candidate
nominal diameters are the doubled realized pairwise distances clipped to the
window, together with the window's upper edge (so a ball that would shrink
below the window can still be charged at the cheapest admissible diameter)
and 0 when the window tolerates vanishing balls.  Exact covers over this
candidate family attain the minimum the continuum definitions take over all
real radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metric import (TOL, Ball, BudgetExceeded, DomainError, MetricSystem,
                     check_scale, leq, lt)
from .systems import DEFAULT_NODE_BUDGET

EXACT = "exact"
GREEDY = "greedy"
GREEDY_LOWER = "greedy_lower"
GREEDY_UPPER = "greedy_upper"

# Universe size past which exact-search nodes charge the budget by scan
# work rather than by count alone (keeps abort wall time bounded).
WORK_GATE = 128
CANDIDATE_GRID = "candidate_grid"


class CoverInfeasible(DomainError):
    """No admissible ball family can cover the target set."""


# -- shared helpers -----------------------------------------------------

def _resolve_subset(sys: MetricSystem, subset):
    if subset is None:
        return np.arange(sys.n, dtype=np.int64)
    ids = np.asarray(sorted({int(i) for i in subset}), dtype=np.int64)
    if ids.size == 0:
        raise DomainError("empty point set")
    if ids.min() < 0 or ids.max() >= sys.n:
        raise DomainError("subset ids out of range")
    return ids


def _node_budget(node_budget):
    return int(node_budget) if node_budget is not None else DEFAULT_NODE_BUDGET


def _chunked_rows(sys, ids, N):
    """Yield (row_offset, block) pieces of the ids-by-ids Bowen matrix."""
    step = max(1, int(4.0e6 // max(1, ids.size)))
    for a in range(0, ids.size, step):
        yield a, sys.bowen_pairs(ids[a:a + step], ids, N)


def realized_distances(sys, scale, subset=None) -> np.ndarray:
    """Sorted unique positive d_N values over the given ids."""
    N = check_scale(scale)
    ids = _resolve_subset(sys, subset)
    pieces = [np.unique(block) for _, block in _chunked_rows(sys, ids, N)]
    vals = np.unique(np.concatenate(pieces))
    return vals[vals > TOL]


def _strict_neighbor_lists(sys, ids, epsilon, N, keep_self):
    """Per row i, positions j (into ids) with d_N(ids[i], ids[j]) < epsilon."""
    out = []
    for a, block in _chunked_rows(sys, ids, N):
        close = lt(block, epsilon)
        for r in range(block.shape[0]):
            row = close[r]
            if not keep_self:
                row[a + r] = False
            out.append(np.flatnonzero(row))
    return out


def _prefix_split(sys, epsilon, N):
    """Block decomposition of a word system when classes cannot interact.

    Word-shift systems record their alphabet and depth.  If eps <= gap/2,
    where gap is the smallest spacing between alphabet values, then two words
    that differ in one of their first q = min(N, depth) letters are at Bowen
    distance >= gap/2: the differing letter becomes the leading coordinate of
    some iterate counted by d_N, and the leading metric weight is 1/2.  So
    neither separation conflicts nor open eps-balls cross the classes of
    equal length-q prefixes, the classes are contiguous id blocks, and the
    hold-last shift makes all blocks isometric.  Exact sep/span then reduce
    to one block times the number of classes.
    """
    info = getattr(sys, "word_info", None)
    if info is None:
        return None
    alphabet = np.sort(np.asarray(info["alphabet"], dtype=float))
    if alphabet.size < 2:
        return None
    gap = float(np.diff(alphabet).min())
    if not leq(epsilon, gap / 2.0):
        return None
    q = min(N, info["depth"])
    block = alphabet.size ** (info["depth"] - q)
    return block, sys.n // block


# -- separated sets (max independent set in the conflict graph) --------

def _greedy_separated(sys, N, epsilon, ids, seed=()):
    """Greedy maximal eps-separated subset of ids (ascending id order).

    Each pick blocks everything strictly within eps of it, so the result is
    pairwise >= eps apart and cannot be extended.  ``seed`` points (already
    pairwise separated) are taken first; the cube hierarchy uses this to
    extend a coarser net.
    """
    alive = np.zeros(sys.n, dtype=bool)
    alive[ids] = True
    chosen = []
    for v in list(seed) + list(ids):
        v = int(v)
        if not alive[v]:
            continue
        chosen.append(v)
        alive &= ~lt(sys.bowen_row(v, N), epsilon)
    return chosen


def _components(n, neigh):
    seen = np.zeros(n, dtype=bool)
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp, stack = [], [s]
        seen[s] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in neigh[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        comps.append(sorted(comp))
    return comps


def _exact_mis(neigh, n, budget):
    """Maximum independent set of the conflict graph, by branch and bound.

    neigh[v] is the set of vertices conflicting with v.  Within each
    connected component: peel vertices of conflict degree <= 1 (some maximum
    solution always keeps them), prune with the matching bound (every
    conflict edge of a matching costs at least one vertex), and branch on a
    highest-degree vertex.  Deterministic: all choice points break ties by
    vertex id.
    """
    nodes = 0
    solution = []
    # Past desk size a node charges the budget in proportion to the scans
    # it causes, so exhaustion fires in bounded wall-clock time.
    for comp in _components(n, neigh):
        cset = set(comp)
        order = sorted(comp, key=lambda v: (len(neigh[v] & cset), v))
        best, blocked = [], set()
        for v in order:
            if v not in blocked:
                best.append(v)
                blocked.add(v)
                blocked |= neigh[v]
        best = sorted(best)
        stack = [(cset, [])]
        while stack:
            P, cur = stack.pop()
            nodes += 1
            if len(P) > WORK_GATE:
                nodes += len(P)
            if nodes > budget:
                raise BudgetExceeded(
                    f"separated-set search exceeded the {budget}-node budget")
            P, cur = set(P), list(cur)
            while True:
                if len(P) > WORK_GATE:
                    nodes += len(P)
                low = [v for v in P if len(neigh[v] & P) <= 1]
                if not low:
                    break
                v = min(low)
                cur.append(v)
                P.discard(v)
                P -= neigh[v]
            if not P:
                if len(cur) > len(best):
                    best = sorted(cur)
                continue
            matched, m = set(), 0
            for v in sorted(P):
                if v in matched:
                    continue
                for w in sorted(neigh[v] & P):
                    if w not in matched and w != v:
                        matched.add(v)
                        matched.add(w)
                        m += 1
                        break
            if len(cur) + len(P) - m <= len(best):
                continue
            v = max(P, key=lambda u: (len(neigh[u] & P), -u))
            stack.append((P - {v}, cur))
            stack.append((P - neigh[v] - {v}, cur + [v]))
        solution.extend(best)
    return sorted(solution), nodes


# -- set cover engine ---------------------------------------------------

def _greedy_cover_indices(universe, families):
    """Standard greedy cover.  families[j] = (order_key, cost, members).

    Selection: best cost per newly covered point, ties broken toward larger
    marginal coverage, then the family order key (diameter, then center id).
    """
    U = set(universe)
    chosen = []
    while U:
        best_j, best_key = None, None
        for j, (key, cost, mem) in enumerate(families):
            new = len(mem & U)
            if new == 0:
                continue
            k = (cost / new, -new, key)
            if best_key is None or k < best_key:
                best_key, best_j = k, j
        if best_j is None:
            raise CoverInfeasible(
                f"point {min(U)} lies in no admissible ball")
        chosen.append(best_j)
        U -= families[best_j][2]
    return chosen


TABLE_CAP = 1 << 18


def _exact_cover(universe, families, budget):
    """Minimum-cost set cover by branch and bound over bitmask states.

    Minimizes (total cost, number of sets) lexicographically, comparing
    costs with the shared tolerance.  Admissible lower bounds: each
    uncovered element is charged at least the cheapest cost-per-element
    ratio of a family containing it, any cover needs at least
    |U| / (largest family) sets, and a greedy packing of mutually
    uncoverable elements charges one family each.  Revisited residual
    universes are cut through a bounded transposition table, which
    collapses the tie plateaus that near-uniform costs produce.  Branches
    on the element covered by the fewest families.  Deterministic via the
    family order keys.
    """
    uni = sorted(set(universe))
    covers_elem = {e: [] for e in uni}
    for j, (_, _, mem) in enumerate(families):
        for e in mem:
            if e in covers_elem:
                covers_elem[e].append(j)
    for e in uni:
        if not covers_elem[e]:
            raise CoverInfeasible(f"point {e} lies in no admissible ball")
    if len(uni) <= 512:
        # element dominance: when every family containing e also contains
        # f, covering e covers f for free, so f can leave the universe
        sig = {e: frozenset(covers_elem[e]) for e in uni}
        kept = []
        for e in uni:
            if not any(sig[f] <= sig[e] for f in kept):
                kept.append(e)
        uni = kept
    bit = {e: i for i, e in enumerate(uni)}
    fmask = []
    for _, _, mem in families:
        m = 0
        for e in mem:
            b = bit.get(e)
            if b is not None:
                m |= 1 << b
        fmask.append(m)
    elem_fams = [covers_elem[e] for e in uni]
    # families never straddle components, so the cover splits into
    # independent subproblems, one per connected piece of the hypergraph
    comp_masks, remaining = [], (1 << len(uni)) - 1
    while remaining:
        seed = remaining & -remaining
        comp = 0
        while seed:
            comp |= seed
            grow = 0
            m = seed
            while m:
                b = (m & -m).bit_length() - 1
                m &= m - 1
                for j in elem_fams[b]:
                    grow |= fmask[j]
            seed = grow & remaining & ~comp
        comp_masks.append(comp)
        remaining &= ~comp
    total_sel, total_cost, nodes = [], 0.0, 0
    seen = {}
    for comp in comp_masks:
        sel, cost, nodes = _cover_component(comp, families, fmask, elem_fams,
                                            seen, nodes, budget)
        total_sel.extend(sel)
        total_cost += cost
    return sorted(total_sel), total_cost, nodes


def _cover_component(comp, families, fmask, elem_fams, seen, nodes, budget):
    """Branch and bound over one connected component of the cover problem."""
    comp_elems = []
    m = comp
    while m:
        b = (m & -m).bit_length() - 1
        comp_elems.append(b)
        m &= m - 1
    greedy_sel = _greedy_cover_indices(
        comp_elems, [(k, c, frozenset(
            b for b in comp_elems if (fmask[j] >> b) & 1))
            for j, (k, c, _) in enumerate(families)])
    best_cost = sum(families[j][1] for j in greedy_sel)
    best_sel = sorted(greedy_sel)
    stack = [(comp, (), 0.0)]
    while stack:
        U, chosen, cost = stack.pop()
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded(
                f"cover search exceeded the {budget}-node budget")
        if not U:
            if cost < best_cost - TOL or (abs(cost - best_cost) <= TOL
                                          and len(chosen) < len(best_sel)):
                best_cost, best_sel = cost, sorted(chosen)
            continue
        prev = seen.get(U)
        if prev is not None and (prev[0] < cost - TOL or
                                 (abs(prev[0] - cost) <= TOL
                                  and prev[1] <= len(chosen))):
            continue
        if len(seen) < TABLE_CAP:
            seen[U] = (cost, len(chosen))
        ubits, m = [], U
        while m:
            b = (m & -m).bit_length() - 1
            ubits.append(b)
            m &= m - 1
        rel = sorted({j for b in ubits for j in elem_fams[b]})
        inter = {j: (fmask[j] & U).bit_count() for j in rel}
        # charge by scan work so exhaustion fires in bounded wall time
        nodes += (len(ubits) + len(rel)) // 4
        ratio_bound = sum(
            min(families[j][1] / inter[j] for j in elem_fams[b])
            for b in ubits)
        min_cost = min(families[j][1] for j in rel)
        lb_sets = math.ceil(len(ubits) / max(inter.values()))
        # packing bound: greedily collect elements no family covers two of;
        # each one forces its own family, at no less than its cheapest cost
        pack_bound, pack_count, blocked = 0.0, 0, 0
        for b in ubits:
            if (blocked >> b) & 1:
                continue
            pack_count += 1
            pack_bound += min(families[j][1] for j in elem_fams[b])
            for j in elem_fams[b]:
                blocked |= fmask[j]
        lb_sets = max(lb_sets, pack_count)
        lb_cost = max(ratio_bound, min_cost * lb_sets, pack_bound)
        if cost + lb_cost <= best_cost + TOL:
            # dual ascent: raise each element's charge until some family
            # containing it saturates; feasible duals price every element
            slack = {j: families[j][1] for j in rel}
            dual = 0.0
            for b in sorted(ubits, key=lambda b: (len(elem_fams[b]), b)):
                raise_by = min(slack[j] for j in elem_fams[b])
                dual += raise_by
                for j in elem_fams[b]:
                    slack[j] -= raise_by
            lb_cost = max(lb_cost, dual)
        if cost + lb_cost > best_cost + TOL:
            continue
        if cost + lb_cost > best_cost - TOL and \
                len(chosen) + lb_sets >= len(best_sel):
            continue
        pick = min(ubits, key=lambda b: (len(elem_fams[b]), b))
        options = sorted(
            elem_fams[pick],
            key=lambda j: (families[j][1] / inter[j], -inter[j],
                           families[j][0]))
        for j in reversed(options):
            stack.append((U & ~fmask[j], chosen + (j,),
                          cost + families[j][1]))
    return best_sel, best_cost, nodes


# -- sep / span reports --------------------------------------------------

@dataclass(frozen=True)
class SeparationReport:
    """Exact or one-sided-bound packing counts at one (N, eps) cell."""
    system: str
    scale: int
    epsilon: float
    sep_count: int = None
    span_count: int = None
    method: str = EXACT
    witness: tuple = ()

    def rows(self):
        """CSV-ready dict rows, one per statistic carried by the report."""
        out = []
        for kind, value in (("sep", self.sep_count), ("span", self.span_count)):
            if value is not None:
                out.append({
                    "system_label": self.system, "N": self.scale,
                    "epsilon": self.epsilon, "window_lo": "",
                    "window_hi": "", "s": "", "statistic_kind": kind,
                    "value": value, "method": self.method})
        return out


def max_separated(sys, scale, epsilon, mode=EXACT, subset=None,
                  node_budget=None) -> SeparationReport:
    """Largest (N, eps)-separated subset: pairwise d_N >= eps.

    Exact mode solves maximum independent set on the conflict graph (edges
    where d_N < eps) and aborts with BudgetExceeded past the node budget;
    greedy mode returns a maximal set, a lower bound on the true count.
    """
    N = check_scale(scale)
    epsilon = float(epsilon)
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    ids = _resolve_subset(sys, subset)
    split = _prefix_split(sys, epsilon, N) if subset is None else None
    if split is not None and split[0] >= ids.size:
        split = None
    if mode == GREEDY:
        if split is not None:
            # blocks are isometric and non-interacting, so the ascending
            # greedy pass repeats the first block's pattern in every class
            block, classes = split
            sol = _greedy_separated(sys, N, epsilon,
                                    np.arange(block, dtype=np.int64))
            witness = tuple(int(p + c * block)
                            for c in range(classes) for p in sol)
            return SeparationReport(sys.name, N, epsilon,
                                    sep_count=len(sol) * classes,
                                    method=GREEDY_LOWER, witness=witness)
        chosen = _greedy_separated(sys, N, epsilon, ids)
        return SeparationReport(sys.name, N, epsilon, sep_count=len(chosen),
                                method=GREEDY_LOWER, witness=tuple(chosen))
    if mode != EXACT:
        raise DomainError(f"unknown mode {mode!r}")
    budget = _node_budget(node_budget)
    if split is not None:
        block, classes = split
        ids_b = np.arange(block, dtype=np.int64)
        neigh = [set(map(int, a)) for a in
                 _strict_neighbor_lists(sys, ids_b, epsilon, N, False)]
        sol, _ = _exact_mis(neigh, block, budget)
        witness = tuple(int(p + c * block)
                        for c in range(classes) for p in sol)
        return SeparationReport(sys.name, N, epsilon,
                                sep_count=len(sol) * classes,
                                method=EXACT, witness=witness)
    neigh = [set(map(int, a)) for a in
             _strict_neighbor_lists(sys, ids, epsilon, N, False)]
    sol, _ = _exact_mis(neigh, ids.size, budget)
    return SeparationReport(sys.name, N, epsilon, sep_count=len(sol),
                            method=EXACT,
                            witness=tuple(int(ids[p]) for p in sol))


def _span_families(sys, ids, epsilon, N):
    members = _strict_neighbor_lists(sys, ids, epsilon, N, keep_self=True)
    return [(int(ids[j]), 1.0, frozenset(map(int, mem)))
            for j, mem in enumerate(members)]


def min_spanning(sys, scale, epsilon, mode=EXACT, subset=None,
                 node_budget=None) -> SeparationReport:
    """Smallest (N, eps)-spanning subset: open eps-balls covering the set.

    The spanning condition is the strict d_N < eps of the definition.  Exact
    mode solves the induced set-cover instance; greedy mode returns the
    standard greedy cover, an upper bound on the true count.
    """
    N = check_scale(scale)
    epsilon = float(epsilon)
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    ids = _resolve_subset(sys, subset)
    split = _prefix_split(sys, epsilon, N) if subset is None else None
    if split is not None and split[0] >= ids.size:
        split = None
    if mode == GREEDY:
        if split is not None:
            # greedy covers blocks independently (balls never cross), and
            # isometry makes every class repeat the first block's choices
            block, classes = split
            ids_b = np.arange(block, dtype=np.int64)
            chosen = _greedy_cover_indices(
                range(block), _span_families(sys, ids_b, epsilon, N))
            centers = sorted(int(ids_b[j]) for j in chosen)
            witness = tuple(int(p + c * block)
                            for c in range(classes) for p in centers)
            return SeparationReport(sys.name, N, epsilon,
                                    span_count=len(chosen) * classes,
                                    method=GREEDY_UPPER, witness=witness)
        chosen = _greedy_cover_indices(range(ids.size),
                                       _span_families(sys, ids, epsilon, N))
        return SeparationReport(sys.name, N, epsilon, span_count=len(chosen),
                                method=GREEDY_UPPER,
                                witness=tuple(sorted(int(ids[j]) for j in chosen)))
    if mode != EXACT:
        raise DomainError(f"unknown mode {mode!r}")
    budget = _node_budget(node_budget)
    if split is not None:
        block, classes = split
        ids_b = np.arange(block, dtype=np.int64)
        sel, _, _ = _exact_cover(range(block),
                                 _span_families(sys, ids_b, epsilon, N),
                                 budget)
        centers = sorted(int(ids_b[j]) for j in sel)
        witness = tuple(int(p + c * block)
                        for c in range(classes) for p in centers)
        return SeparationReport(sys.name, N, epsilon,
                                span_count=len(sel) * classes,
                                method=EXACT, witness=witness)
    families = _span_families(sys, ids, epsilon, N)
    sel, _, _ = _exact_cover(range(ids.size), families, budget)
    return SeparationReport(sys.name, N, epsilon, span_count=len(sel),
                            method=EXACT,
                            witness=tuple(sorted(families[j][0] for j in sel)))


def separation_report(sys, scale, epsilon, subset=None,
                      node_budget=None) -> SeparationReport:
    """Exact sep and span counts merged into a single report."""
    a = max_separated(sys, scale, epsilon, EXACT, subset, node_budget)
    b = min_spanning(sys, scale, epsilon, EXACT, subset, node_budget)
    return SeparationReport(a.system, a.scale, a.epsilon,
                            sep_count=a.sep_count, span_count=b.span_count,
                            method=EXACT, witness=a.witness)


@dataclass(frozen=True)
class SandwichResult:
    ok: bool
    checked: tuple
    failures: tuple


def sandwich_check(reports) -> SandwichResult:
    """Verify sep(2 eps) <= span(eps) <= sep(eps) across exact reports.

    Only exact counts are comparable bounds, so any greedy report is
    rejected.  Raises when the reports mix systems or scales, or when no
    inequality can be formed at all.
    """
    reports = list(reports)
    if not reports:
        raise DomainError("no reports to check")
    if any(r.method != EXACT for r in reports):
        raise DomainError("sandwich comparisons need exact-mode reports")
    if len({r.system for r in reports}) > 1 or len({r.scale for r in reports}) > 1:
        raise DomainError("sandwich reports must share one system and scale")
    seps, spans = {}, {}
    for r in reports:
        if r.sep_count is not None:
            seps[r.epsilon] = r.sep_count
        if r.span_count is not None:
            spans[r.epsilon] = r.span_count

    def lookup(table, x):
        for k, v in table.items():
            if abs(k - x) <= TOL:
                return v
        return None

    checked, failures = [], []
    for eps, sp in sorted(spans.items()):
        se = lookup(seps, eps)
        if se is not None:
            line = f"span({eps:g})={sp} <= sep({eps:g})={se}"
            (checked if sp <= se else failures).append(line)
        se2 = lookup(seps, 2.0 * eps)
        if se2 is not None:
            line = f"sep({2 * eps:g})={se2} <= span({eps:g})={sp}"
            (checked if se2 <= sp else failures).append(line)
    if not checked and not failures:
        raise DomainError("no comparable (eps, 2 eps) report pairs")
    return SandwichResult(not failures, tuple(checked), tuple(failures))


# -- windowed optimal cover costs ----------------------------------------

def candidate_diameters(sys, scale, window, subset=None,
                        strict_hi=False) -> np.ndarray:
    """Admissible nominal ball diameters on the finite model.

    Window mode keeps doubled realized distances in (lo, hi] and always
    includes hi; content mode (strict_hi) keeps doubled distances strictly
    between lo and hi and includes lo itself, so the default lo = 0 admits
    vanishing balls while a positive lo acts as a resolution floor.
    """
    lo, hi = float(window[0]), float(window[1])
    if not 0.0 <= lo < hi:
        raise DomainError("window must satisfy 0 <= lo < hi")
    diams = 2.0 * realized_distances(sys, scale, subset)
    if strict_hi:
        cand = np.concatenate([[lo], diams[lt(lo, diams) & lt(diams, hi)]])
    else:
        cand = diams[lt(lo, diams) & leq(diams, hi)]
        cand = np.concatenate([cand, [hi]])
    return np.unique(cand)


@dataclass(frozen=True)
class BallCover:
    """An admissible-ball cover together with its charged cost.

    ``cost_exponent`` is the dimension parameter supplied by the caller;
    ``exponent`` is the power actually applied to nominal diameters (N*s for
    windowed costs, plain t for Hausdorff content).
    """
    system: str
    scale: int
    window: tuple
    cost_exponent: float
    exponent: float
    cost: float
    balls: tuple
    method: str
    strict_hi: bool = False

    @property
    def count(self) -> int:
        return len(self.balls)

    def check(self, sys, subset=None):
        """Re-verify the cover and window invariants; returns violations."""
        ids = _resolve_subset(sys, subset)
        lo, hi = self.window
        bad = []
        covered = set()
        for b in self.balls:
            covered.update(b.members)
            if self.strict_hi:
                ok = leq(lo, b.diameter) and lt(b.diameter, hi)
            else:
                ok = lt(lo, b.diameter) and leq(b.diameter, hi)
            if not ok:
                bad.append(f"ball at {b.center} has diameter {b.diameter} "
                           f"outside the window")
            inside = set(map(int, np.flatnonzero(
                leq(sys.bowen_row(b.center, self.scale), b.radius))))
            if not set(b.members) <= inside:
                bad.append(f"ball at {b.center} lists members outside radius")
        missing = [int(i) for i in ids if int(i) not in covered]
        if missing:
            bad.append(f"points not covered: {missing[:5]}")
        total = sum(b.diameter ** self.exponent for b in self.balls)
        if abs(total - self.cost) > 1e-9:
            bad.append(f"cost mismatch: {total} != {self.cost}")
        return bad

    def row(self):
        return {
            "system_label": self.system, "N": self.scale,
            "epsilon": "", "window_lo": self.window[0],
            "window_hi": self.window[1], "s": self.cost_exponent,
            "statistic_kind": "cover_cost", "value": self.cost,
            "method": self.method}


def _ball_families(sys, ids, cand, expo, N):
    """One family per (center, useful diameter): cheapest admissible ball
    reaching each realized farthest-member distance from the center."""
    families, meta = [], []
    top = float(cand[-1])
    for pos in range(ids.size):
        row = sys.bowen_pairs(ids[pos:pos + 1], ids, N)[0]
        targets = np.unique(2.0 * row)
        targets = targets[leq(targets, top)]
        ks = np.searchsorted(cand, targets - TOL)
        for t in np.unique(cand[ks[ks < cand.size]]):
            t = float(t)
            members = frozenset(map(int, np.flatnonzero(leq(row, t / 2.0))))
            families.append(((t, int(ids[pos])), t ** expo, members))
            meta.append((int(ids[pos]), t))
    return families, meta


def _prune_dominated(families, meta):
    """Drop families covered-and-priced no better than another (ties keep
    the lowest order key).  Quadratic, so only applied to small instances."""
    keep = []
    for i, (ki, ci, mi) in enumerate(families):
        dominated = False
        for j, (kj, cj, mj) in enumerate(families):
            if i == j or not mi <= mj or cj > ci + TOL:
                continue
            if mj != mi or cj < ci - TOL or kj < ki:
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return [families[i] for i in keep], [meta[i] for i in keep]


def optimal_cover_cost(sys, scale, window, s, mode=EXACT, subset=None,
                       strict_hi=False, node_budget=None,
                       exponent=None) -> BallCover:
    """Cheapest cover by balls with nominal diameters in the window.

    Minimizes sum (2 r_i)^(N s) (or diameter^exponent when an explicit
    exponent is given) over covers of the target ids by closed Bowen balls
    whose nominal diameters are admissible for the window.  ``exact`` solves
    the weighted set-cover instance to optimality; ``candidate_grid`` takes
    the greedy weighted cover over the same candidate family.
    """
    N = check_scale(scale)
    s = float(s)
    if s < 0:
        raise DomainError("cost exponent must be nonnegative")
    expo = N * s if exponent is None else float(exponent)
    ids = _resolve_subset(sys, subset)
    cand = candidate_diameters(sys, scale, window, subset, strict_hi)
    if cand.size == 0:
        raise CoverInfeasible("window admits no ball diameters")
    families, meta = _ball_families(sys, ids, cand, expo, N)
    if len(families) <= 1500:
        families, meta = _prune_dominated(families, meta)
    if mode == EXACT:
        sel, cost, _ = _exact_cover(range(ids.size), families,
                                    _node_budget(node_budget))
        method = EXACT
    elif mode == CANDIDATE_GRID:
        sel = _greedy_cover_indices(range(ids.size), families)
        cost = sum(families[j][1] for j in sel)
        method = CANDIDATE_GRID
    else:
        raise DomainError(f"unknown mode {mode!r}")
    balls = []
    for j in sorted(sel, key=lambda j: (meta[j][1], meta[j][0])):
        center, t = meta[j]
        members = tuple(int(ids[p]) for p in sorted(families[j][2]))
        balls.append(Ball(center, t / 2.0, N, members))
    return BallCover(sys.name, N, (float(window[0]), float(window[1])),
                     s, expo, float(cost), tuple(balls), method, strict_hi)


def hausdorff_content(sys, scale, t, epsilon, mode=EXACT, subset=None,
                      node_budget=None, min_diameter=0.0):
    """(content, witness): optimal cost over covers with 2 r_i < epsilon.

    The charged power is the plain exponent t (the content of the metric
    space (X, d_N); the mean statistic later divides the induced dimension
    by N rather than scaling the exponent).  ``min_diameter`` floors the
    admissible diameters; the default 0 admits vanishing balls, which on a
    finite model makes the content drop to 0 for every positive t.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    N = check_scale(scale)
    if min_diameter <= 0 and float(t) > 0:
        # zero-diameter singletons are admissible and free at positive t,
        # so the optimum is 0 without running the optimizer
        ids = _resolve_subset(sys, subset)
        balls = tuple(Ball(int(i), 0.0, N, (int(i),)) for i in ids)
        cover = BallCover(sys.name, N, (float(min_diameter), float(epsilon)),
                          float(t), float(t), 0.0, balls, mode, True)
        return 0.0, cover
    cover = optimal_cover_cost(sys, scale, (float(min_diameter),
                                            float(epsilon)), t,
                               mode=mode, subset=subset, strict_hi=True,
                               node_budget=node_budget, exponent=float(t))
    return cover.cost, cover


# -- the cube hierarchy ---------------------------------------------------

@dataclass(frozen=True)
class Cube:
    level: int
    index: int
    center: int
    parent: int
    members: tuple


class CubeTree:
    """Nested partitions of the point set by near-ball cubes.

    Level k (k = 1..depth) partitions the points into cubes built around a
    greedy maximal ratio^k-separated net, each cube pinched between the open
    ball of radius c1*ratio^k and the closed ball of radius C1*ratio^k around
    its center, with every cube contained in a single parent cube one level
    up.  Constants are instantiated at c0 = C0 = A0 = 1, so c1 = 1/3 and
    C1 = 2; admissibility requires 12*ratio <= 1.
    """

    def __init__(self, sys, scale, ratio, levels, assign):
        self.system = sys
        self.scale = scale
        self.ratio = float(ratio)
        self.levels = levels          # tuple of tuples of Cube
        self.assign = assign          # per level, point id -> cube index
        self.c0 = self.C0 = self.A0 = 1.0
        self.c1 = self.c0 / (3.0 * self.A0 ** 2)
        self.C1 = 2.0 * self.A0 * self.C0

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level(self, k):
        if not 1 <= k <= self.depth:
            raise DomainError(f"level {k} not built (depth {self.depth})")
        return self.levels[k - 1]

    def cube_index(self, point, k) -> int:
        return int(self.assign[k - 1][point])

    def cube_of(self, point, k) -> Cube:
        return self.levels[k - 1][self.cube_index(point, k)]

    def check(self):
        """Partition, nesting, and sandwich invariants; returns violations."""
        sys, N = self.system, self.scale
        bad = []
        for k in range(1, self.depth + 1):
            cubes = self.levels[k - 1]
            counted = sum(len(q.members) for q in cubes)
            if counted != sys.n:
                bad.append(f"level {k} does not partition: {counted} != {sys.n}")
            r_in, r_out = self.c1 * self.ratio ** k, self.C1 * self.ratio ** k
            for q in cubes:
                row = sys.bowen_row(q.center, N)
                mem = np.asarray(q.members, dtype=np.int64)
                if mem.size and not bool(np.all(leq(row[mem], r_out))):
                    bad.append(f"level {k} cube {q.index}: member outside "
                               f"closed ball radius {r_out:g}")
                inner = np.flatnonzero(lt(row, r_in))
                if not set(map(int, inner)) <= set(q.members):
                    bad.append(f"level {k} cube {q.index}: open ball radius "
                               f"{r_in:g} leaks outside the cube")
                if k > 1 and q.parent != int(self.assign[k - 2][q.center]):
                    bad.append(f"level {k} cube {q.index}: parent mismatch")
            if k > 1:
                prev = self.assign[k - 2]
                for q in cubes:
                    parents = {int(prev[p]) for p in q.members}
                    if parents != {q.parent}:
                        bad.append(f"level {k} cube {q.index} straddles "
                                   f"parents {sorted(parents)}")
        return bad

    def verify(self):
        bad = self.check()
        if bad:
            raise DomainError("cube tree invariants failed: " + "; ".join(bad))


def build_cube_tree(sys, scale, ratio, depth, check=True) -> CubeTree:
    """Build the nested cube partitions of Proposition-style hierarchies.

    Per level k = 1..depth: extend the previous net to a greedy maximal
    ratio^k-separated set (a coarser net is automatically separated at the
    finer gauge, and seeding with it keeps every parent cube stocked with at
    least one center: its own).  Then assign every point to its nearest
    admissible center — an admissible center shares the point's parent cube,
    which both enforces nesting and keeps the assignment a partition — with
    ties broken toward the lowest center index.
    """
    N = check_scale(scale)
    ratio = float(ratio)
    if not (0.0 < ratio and leq(12.0 * ratio, 1.0)):
        raise DomainError("cube ratio must satisfy 12*ratio <= 1")
    depth = int(depth)
    if depth < 1:
        raise DomainError("depth must be >= 1")
    pts = np.arange(sys.n, dtype=np.int64)
    levels, assign = [], []
    centers_prev = []
    for k in range(1, depth + 1):
        r_k = ratio ** k
        centers = _greedy_separated(sys, N, r_k, pts, seed=centers_prev)
        carr = np.asarray(centers, dtype=np.int64)
        dist = np.empty((sys.n, carr.size))
        step = max(1, int(4.0e6 // max(1, carr.size)))
        for a in range(0, sys.n, step):
            dist[a:a + step] = sys.bowen_pairs(pts[a:a + step], carr, N)
        if k > 1:
            prev = assign[-1]
            admissible = prev[carr][None, :] == prev[pts][:, None]
            dist = np.where(admissible, dist, np.inf)
        sel = np.argmin(dist, axis=1)
        cubes = []
        for j, c in enumerate(centers):
            mem = np.flatnonzero(sel == j)
            parent = -1 if k == 1 else int(assign[-1][c])
            cubes.append(Cube(k, j, int(c), parent,
                              tuple(int(x) for x in mem)))
        levels.append(tuple(cubes))
        assign.append(sel)
        centers_prev = centers
    tree = CubeTree(sys, N, ratio, tuple(levels), assign)
    if check:
        tree.verify()
    return tree
