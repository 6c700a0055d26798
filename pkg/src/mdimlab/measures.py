"""Finitely supported measures and dimension certificates.

Three constructions: verifying mass-distribution certificates (a measure
with controlled ball growth forces a floor on windowed cover sums), the
small-denominator cylinder measure on K-shift models, and the Frostman-type
reweighting of a cube-tree hierarchy.  Growth bounds are stated with the
exponent N*s throughout, matching the windowed cover costs they certify.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .metric import TOL, DomainError, check_scale, leq, lt, set_diameter
from .covers import (EXACT, GREEDY, candidate_diameters,
                     optimal_cover_cost, realized_distances,
                     build_cube_tree)
from .dimensions import AdmissibleFunction, psi_table, psi_theta, _tail


@dataclass(frozen=True)
class FiniteMeasure:
    """Nonnegative masses on distinct point ids of one system."""
    support: tuple
    masses: tuple
    size: int

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=np.int64)
        mas = np.asarray(self.masses, dtype=float)
        if sup.shape != mas.shape or sup.ndim != 1:
            raise DomainError("support and masses must align")
        if len(np.unique(sup)) != len(sup):
            raise DomainError("support entries must be distinct")
        if sup.size and (sup.min() < 0 or sup.max() >= self.size):
            raise DomainError("support ids outside the system")
        if (mas < -TOL).any():
            raise DomainError("masses must be nonnegative")
        object.__setattr__(self, "support", tuple(int(i) for i in sup))
        object.__setattr__(self, "masses", tuple(float(v) for v in mas))
        dense = np.zeros(self.size)
        dense[sup] = np.maximum(mas, 0.0)
        object.__setattr__(self, "_dense", dense)

    @property
    def total(self) -> float:
        return float(self._dense.sum())

    def mass_of(self, ids) -> float:
        """Total mass sitting on the given point ids."""
        ids = np.asarray(list(ids), dtype=np.int64)
        return float(self._dense[ids].sum()) if ids.size else 0.0

    def scaled(self, factor) -> "FiniteMeasure":
        return FiniteMeasure(self.support,
                             tuple(m * factor for m in self.masses),
                             self.size)

    def to_json_dict(self, params=None):
        out = {"support": list(self.support), "masses": list(self.masses)}
        out["params"] = params if params is not None else {}
        return out


def uniform_measure(sys, subset=None) -> FiniteMeasure:
    ids = np.arange(sys.n) if subset is None else \
        np.unique(np.asarray(list(subset), dtype=np.int64))
    if ids.size == 0:
        raise DomainError("uniform measure needs a nonempty point set")
    return FiniteMeasure(tuple(ids), (1.0 / ids.size,) * ids.size, sys.n)


@dataclass(frozen=True)
class MassDistributionCert:
    """Constants of a growth certificate: total >= a, ball mass <= c t^(Ns).

    ``checked_cells`` holds (epsilon, N) pairs before verification and
    (epsilon, N, passed) triples afterwards.
    """
    a: float
    c: float
    s: float
    psi: AdmissibleFunction
    checked_cells: tuple = ()

    def __post_init__(self):
        if self.a <= 0 or self.c <= 0:
            raise DomainError("certificate constants a, c must be positive")

    @property
    def ok(self) -> bool:
        cells = self.checked_cells
        return bool(cells) and all(len(c) == 3 and c[2] for c in cells)

    @property
    def floor(self) -> float:
        """The implied windowed cover-cost floor a / c."""
        return self.a / self.c


@dataclass(frozen=True)
class MassBoundResult:
    passed: bool
    s: float
    floor: float
    cert: MassDistributionCert
    violations: tuple


def growth_ball_family(sys, scale, window, centers=None, subset=None):
    """Balls the growth condition must control, as (diameter, members).

    One family per (center, candidate diameter in the window); when the
    window floor is positive an extra clamp ball of nominal diameter lo and
    membership radius lo/2 is included, which extends the certificate to
    every real diameter in the window (the mass in a ball is a step
    function of the diameter, so suprema land on candidates or on the
    floor).
    """
    N = check_scale(scale)
    lo, hi = float(window[0]), float(window[1])
    cand = [float(t) for t in candidate_diameters(sys, scale, (lo, hi),
                                                  subset)]
    if lo > 0:
        cand = [lo] + cand
    if centers is None:
        centers = np.arange(sys.n) if subset is None else \
            np.unique(np.asarray(list(subset), dtype=np.int64))
    pool = np.arange(sys.n) if subset is None else \
        np.unique(np.asarray(list(subset), dtype=np.int64))
    out = []
    for u in centers:
        row = sys.bowen_row(int(u), N)[pool]
        for t in cand:
            members = pool[leq(row, t / 2.0)]
            out.append((t, members))
    return out


def mass_distribution_lower_bound(sys, measure, cert, test_family=(),
                                  subset=None) -> MassBoundResult:
    """Verify a growth certificate and return the implied cover floor.

    Condition (a): the measure carries at least ``cert.a`` of mass.
    Condition (b): every ball of the window family satisfies
    mass <= c * t^(N s) at its nominal diameter t, and every extra test set
    whose realized diameter falls in a cell's window satisfies the same
    bound at its realized diameter.  On success every windowed cover of the
    measured points costs at least a/c at exponent N*s.
    """
    cells = [(float(c[0]), int(c[1])) for c in cert.checked_cells]
    if not cells:
        raise DomainError("certificate lists no (epsilon, N) cells")
    violations = []
    checked = []
    extra = [np.unique(np.asarray(list(U), dtype=np.int64))
             for U in test_family]
    for eps, N in cells:
        lo, hi = cert.psi(eps), eps
        cell_ok = True
        if lt(measure.total, cert.a):
            violations.append({"cell": (eps, N), "kind": "total",
                               "total": measure.total, "floor_a": cert.a})
            cell_ok = False
        family = growth_ball_family(sys, N, (lo, hi), subset=subset)
        used = len(family)
        for t, members in family:
            bound = cert.c * t ** (N * cert.s)
            mass = measure.mass_of(members)
            if not leq(mass, bound):
                violations.append({"cell": (eps, N), "kind": "ball",
                                   "diameter": t, "mass": mass,
                                   "bound": bound,
                                   "members": [int(i) for i in members]})
                cell_ok = False
        for U in extra:
            if U.size == 0:
                continue
            diam = set_diameter(sys, U, N)
            if not (lt(lo, diam) and leq(diam, hi)):
                continue
            used += 1
            bound = cert.c * diam ** (N * cert.s)
            mass = measure.mass_of(U)
            if not leq(mass, bound):
                violations.append({"cell": (eps, N), "kind": "set",
                                   "diameter": diam, "mass": mass,
                                   "bound": bound,
                                   "members": [int(i) for i in U]})
                cell_ok = False
        if used == 0:
            raise DomainError(f"no admissible test sets at cell "
                              f"(eps={eps}, N={N})")
        checked.append((eps, N, cell_ok))
    out_cert = MassDistributionCert(cert.a, cert.c, cert.s, cert.psi,
                                    tuple(checked))
    return MassBoundResult(not violations, cert.s, cert.a / cert.c,
                           out_cert, tuple(violations))


def uniform_growth_certificate(sys, scale, window, s,
                               subset=None) -> MassDistributionCert:
    """Tightest growth certificate of the uniform measure on a window.

    Computes c as the largest ball-mass-to-diameter-power ratio over the
    window family, so the certificate passes by construction and a/c is the
    best uniform-measure cover floor this window can certify.
    """
    N = check_scale(scale)
    lo, hi = float(window[0]), float(window[1])
    measure = uniform_measure(sys, subset)
    worst = 0.0
    for t, members in growth_ball_family(sys, N, (lo, hi), subset=subset):
        if t <= 0:
            raise DomainError("growth certificates need positive diameters")
        worst = max(worst, measure.mass_of(members) / t ** (N * s))
    psi = psi_table([(hi, lo)], domain_bound=hi)
    return MassDistributionCert(measure.total, max(worst, TOL), s, psi,
                                ((hi, N, True),))


# -- Example-3 cylinder measure ---------------------------------------------

@dataclass(frozen=True)
class Example3Params:
    """Window scale and cylinder depth for the K-shift measure.

    ``m`` is tied to ``epsilon`` by 1/(m(m+1)) < 2 eps <= 1/(m(m-1)) (the
    right side vacuous at m = 1), and s defaults to theta/(1+theta), the
    exponent at which the measure's total reaches 1.
    """
    theta: float
    epsilon: float
    m: int
    N: int
    s: float = None

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise DomainError("theta must lie in (0, 1]")
        if self.m < 1:
            raise DomainError("m must be a positive integer")
        check_scale(self.N)
        two_eps = 2.0 * float(self.epsilon)
        lo = 1.0 / (self.m * (self.m + 1))
        if not lt(lo, two_eps):
            raise DomainError(f"2 eps = {two_eps} not above 1/(m(m+1)) = "
                              f"{lo}")
        if self.m > 1:
            hi = 1.0 / (self.m * (self.m - 1))
            if not leq(two_eps, hi):
                raise DomainError(f"2 eps = {two_eps} exceeds 1/(m(m-1)) = "
                                  f"{hi}")
        if self.s is None:
            object.__setattr__(self, "s", self.theta / (1.0 + self.theta))

    @property
    def atom_mass(self) -> float:
        expo = self.N * (1.0 + self.theta) * self.s / (4.0 * self.theta)
        return float(self.epsilon) ** expo

    @property
    def growth_exponent(self) -> float:
        """Per-scale exponent of the certified growth bound."""
        return (1.0 + self.theta) * self.s / 4.0


def example3_params(theta, m, N, epsilon=None, s=None) -> Example3Params:
    """Params with the midpoint window scale eps = 1/(2 m^2)."""
    if epsilon is None:
        epsilon = 1.0 / (2.0 * m * m)
    return Example3Params(theta, epsilon, int(m), int(N), s)


def _word_ids(sys):
    info = getattr(sys, "word_info", None)
    if info is None:
        raise DomainError("system was not built from words over an alphabet")
    alphabet = np.asarray(info["alphabet"])
    return alphabet, int(info["depth"])


def example3_measure(k_sys, params) -> FiniteMeasure:
    """Equal atoms on the small-denominator depth-N cylinders.

    Every depth-N cylinder whose first N letters lie in {1, 1/2, ..., 1/m}
    carries mass eps^(N(1+theta)s/(4 theta)) placed at its canonical
    representative (the prefix continued by repeating its last letter); all
    other cylinders carry none.
    """
    alphabet, depth = _word_ids(k_sys)
    if depth < params.N:
        raise DomainError(f"model depth {depth} is shallower than N = "
                          f"{params.N}")
    letters = []
    for k in range(1, params.m + 1):
        idx = np.flatnonzero(np.abs(alphabet - 1.0 / k) <= TOL)
        if idx.size != 1:
            raise DomainError(f"alphabet lacks the letter 1/{k}")
        letters.append(int(idx[0]))
    g = len(alphabet)
    place = g ** np.arange(depth - 1, -1, -1, dtype=np.int64)
    digit_grid = np.stack(np.meshgrid(*([letters] * params.N),
                                      indexing="ij"), -1)
    prefixes = digit_grid.reshape(-1, params.N)
    words = np.concatenate(
        [prefixes,
         np.repeat(prefixes[:, -1:], depth - params.N, axis=1)], axis=1)
    ids = words @ place
    mass = params.atom_mass
    return FiniteMeasure(tuple(int(i) for i in ids),
                         (mass,) * len(ids), k_sys.n)


def example3_cylinders(k_sys, params, qualifying=True):
    """Depth-N cylinders as point-id blocks, for test families."""
    alphabet, depth = _word_ids(k_sys)
    g = len(alphabet)
    block = g ** (depth - params.N)
    letters = range(g)
    if qualifying:
        letters = [int(i) for i in range(g)
                   if any(abs(alphabet[i] - 1.0 / k) <= TOL
                          for k in range(1, params.m + 1))]
    place = g ** np.arange(params.N - 1, -1, -1, dtype=np.int64)
    out = []
    for prefix in np.stack(np.meshgrid(*([list(letters)] * params.N),
                                       indexing="ij"), -1).reshape(-1,
                                                                   params.N):
        start = int(prefix @ place) * block
        out.append(np.arange(start, start + block, dtype=np.int64))
    return out


def example3_cert(params) -> MassDistributionCert:
    """The certificate the cylinder measure is claimed to satisfy."""
    return MassDistributionCert(1.0, 1.0, params.growth_exponent,
                                psi_theta(params.theta),
                                ((float(params.epsilon), params.N),))


# -- Frostman-type construction ---------------------------------------------

@dataclass(frozen=True)
class FrostmanParams:
    """Levels and constants of one reweighting run.

    ``exponent`` is the construction exponent N*s; caps, floor and the
    output constant c = 13^a C 8^S (1+1/c2)^S delta^-1 gamma^-S are all
    stated with it.
    """
    gamma: float
    s: float
    m: int
    l: int
    c2: float
    c: float
    exponent: float
    delta: float
    epsilon: float
    scale: int
    assouad_a: float
    assouad_C: float
    floor: float
    total_before_norm: float

    def to_json_dict(self):
        return {"gamma": self.gamma, "s": self.s, "m": self.m, "l": self.l,
                "c2": self.c2, "c": self.c, "exponent": self.exponent,
                "delta": self.delta, "epsilon": self.epsilon,
                "scale": self.scale, "assouad_a": self.assouad_a,
                "assouad_C": self.assouad_C, "floor": self.floor,
                "total_before_norm": self.total_before_norm}


def _level_from_bracket(gamma, psi_eps):
    """Largest m with gamma^m / 2 < psi_eps <= gamma^(m-1) / 2."""
    if psi_eps <= 0 or psi_eps > 0.5:
        raise DomainError(f"window floor {psi_eps} admits no seed level "
                          f"(need 0 < psi(eps) <= 1/2)")
    m = 1
    while 0.5 * gamma ** m >= psi_eps:
        m += 1
    if not lt(0.5 * gamma ** m, psi_eps) or not leq(psi_eps,
                                                    0.5 * gamma ** (m - 1)):
        raise DomainError("seed level bracketing failed numerically")
    return m


def frostman_construct(sys, scale, psi, epsilon, s, delta, *,
                       perfectness=None, assouad=None, mode=EXACT,
                       node_budget=None):
    """Reweighted cube-tree measure with certified window ball growth.

    Builds the cube tree at ratio gamma = min(1/20, diameter), seeds the
    deepest selected level with gamma^(m S) per cube (S = N s), caps each
    coarser level at gamma^(level S) by downscaling overweight cubes, and
    normalizes.  The result satisfies mass(ball(u, r)) <= c r^(N s) for
    every center and every radius in (psi(eps), eps], with c as recorded in
    the returned params; each named inequality of the construction is
    asserted and raises on failure.
    """
    from .systems import uniformly_perfect_check
    from .dimensions import mean_assouad_estimate
    N = check_scale(scale)
    epsilon = float(epsilon)
    if not 0 < epsilon < 1:
        raise DomainError("construction needs 0 < epsilon < 1")
    if not 0 < s:
        raise DomainError("target exponent s must be positive")
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    psi_eps = psi(epsilon)
    if psi_eps <= 0:
        raise DomainError("construction needs a positive window floor")

    R = sys.diameter(1)
    gamma = min(1.0 / 20.0, R)
    if gamma <= 0:
        raise DomainError("degenerate system: zero diameter")
    if perfectness is None:
        perfectness = uniformly_perfect_check(sys, (epsilon,), scales=(N,))
    if not perfectness.ok:
        raise DomainError("system is not certified dynamically uniformly "
                          f"perfect: {perfectness.failures[:2]}")
    c2 = float(perfectness.constant)
    if not lt(psi_eps / epsilon, c2 / 320.0):
        raise DomainError(f"psi(eps)/eps = {psi_eps / epsilon:.3g} not "
                          f"below c2/320 = {c2 / 320.0:.3g}")

    S = N * s
    m = _level_from_bracket(gamma, psi_eps)
    if not lt(160.0 * gamma ** m, epsilon):
        raise DomainError(f"level inequality 160 gamma^m < eps fails "
                          f"(gamma={gamma}, m={m}, eps={epsilon})")
    l = 0
    while l + 1 <= m - 1 and leq(8.0 * gamma ** (m - l - 1), epsilon):
        l += 1
    if l < 1:
        raise DomainError(f"level inequality 8 gamma^(m-l) <= eps has no "
                          f"l >= 1 (gamma={gamma}, m={m}, eps={epsilon})")

    window = (psi_eps, epsilon)
    hypothesis = optimal_cover_cost(sys, N, window, s, mode=mode,
                                    node_budget=node_budget)
    if lt(hypothesis.cost, delta):
        raise DomainError(f"dimension hypothesis fails: optimal windowed "
                          f"cover cost {hypothesis.cost:.6g} < delta = "
                          f"{delta} at s = {s}")

    tree = build_cube_tree(sys, N, gamma, m, check=True)
    dense = np.zeros(sys.n)
    for cube in tree.level(m):
        dense[cube.center] = gamma ** (m * S)
    for level in range(m - 1, m - l - 1, -1):
        cap = gamma ** (level * S)
        for cube in tree.level(level):
            ids = np.asarray(cube.members, dtype=np.int64)
            tot = dense[ids].sum()
            if tot > cap:
                dense[ids] *= cap / tot
    for k in range(0, l + 1):
        cap = gamma ** ((m - k) * S)
        for cube in tree.level(m - k):
            tot = dense[np.asarray(cube.members, dtype=np.int64)].sum()
            if not leq(tot, cap):
                raise DomainError(f"level cap violated at level {m - k}: "
                                  f"cube mass {tot:.6g} > {cap:.6g}")

    total = float(dense.sum())
    floor = 8.0 ** (-S) * (1.0 + 1.0 / c2) ** (-S) * delta
    if lt(total, floor):
        raise DomainError(f"mass floor fails: total {total:.6g} < "
                          f"8^-S (1+1/c2)^-S delta = {floor:.6g}")
    dense /= total

    if assouad is None:
        R_list = sorted({min(R, 6.0 * gamma ** (m - j))
                         for j in range(0, l + 1)}
                        | {min(R, 2.0 * epsilon + 2.0 * gamma ** (m - l))})
        r_list = sorted({rr / 13.0 for rr in R_list}
                        | {gamma ** (m - l) / 2.0})
        # span counters name their heuristic mode differently
        span_mode = EXACT if mode == EXACT else GREEDY
        assouad = mean_assouad_estimate(sys, (N,), R_list, r_list,
                                        centers=range(sys.n), mode=span_mode,
                                        node_budget=node_budget)
    a_fit, C_fit = assouad.a, assouad.C
    c = (13.0 ** a_fit * C_fit * 8.0 ** S * (1.0 + 1.0 / c2) ** S
         / delta / gamma ** S)

    support = np.flatnonzero(dense > 0)
    measure = FiniteMeasure(tuple(int(i) for i in support),
                            tuple(float(v) for v in dense[support]), sys.n)
    radii = [float(r) for r in realized_distances(sys, N)
             if lt(psi_eps, float(r)) and leq(float(r), epsilon)]
    radii = [psi_eps] + radii
    for u in range(sys.n):
        row = sys.bowen_row(u, N)
        for r in radii:
            mass = float(dense[leq(row, r)].sum())
            if not leq(mass, c * r ** S):
                raise DomainError(f"growth bound fails at center {u}, "
                                  f"radius {r:.6g}: mass {mass:.6g} > "
                                  f"c r^(Ns) = {c * r ** S:.6g}")
    params = FrostmanParams(gamma, float(s), m, l, c2, c, S, float(delta),
                            epsilon, N, a_fit, C_fit, floor, total)
    return measure, params


def frostman_cert(psi, params) -> MassDistributionCert:
    """The growth certificate implied by a successful construction.

    Ball masses at nominal diameter t are dominated by the mass at radius
    t, and radii up to eps are certified, so the diameter-form constant is
    the construction's own c.
    """
    return MassDistributionCert(1.0, params.c, params.s, psi,
                                ((params.epsilon, params.scale),))


@dataclass(frozen=True)
class CharacterizationBound:
    side: str
    value: float
    per_cell: dict
    skipped: tuple


def measure_characterization_bound(sys, psi, grid, side, delta=0.5,
                                   s_grid=None, mode=EXACT,
                                   node_budget=None) -> CharacterizationBound:
    """Best exponent certified by constructions across the grid.

    Per cell the largest s on the probe grid for which frostman_construct
    succeeds; the construction's hypothesis check keeps every certified s
    below the cell's windowed threshold, so the aggregated value lower
    bounds the matching threshold estimate.  Lower side aggregates by min
    over the tail cells (certified everywhere late), upper side by max
    (certified somewhere late).
    """
    if hasattr(grid, "epsilons"):
        epsilons, scales = tuple(grid.epsilons), tuple(grid.scales)
    else:
        epsilons, scales = tuple(grid[0]), tuple(grid[1])
    if s_grid is None:
        s_grid = [round(0.025 * k, 6) for k in range(1, 41)]
    s_probe = sorted(float(v) for v in s_grid)
    from .systems import uniformly_perfect_check
    per_cell, skipped = {}, []
    for eps in epsilons:
        for N in scales:
            perfectness = uniformly_perfect_check(sys, (float(eps),),
                                                  scales=(int(N),))
            best = None
            reason = None
            for s in reversed(s_probe):
                try:
                    frostman_construct(sys, N, psi, eps, s, delta,
                                       perfectness=perfectness, mode=mode,
                                       node_budget=node_budget)
                    best = s
                    break
                except DomainError as exc:
                    reason = str(exc)
            if best is None:
                skipped.append((float(eps), int(N), reason))
                warnings.warn(f"cell (eps={eps}, N={N}) certified nothing: "
                              f"{reason}")
            per_cell[(float(eps), int(N))] = best
    tail_cells = [per_cell[(float(e), int(N))]
                  for e in _tail(list(epsilons)) for N in _tail(list(scales))]
    feasible = [v for v in tail_cells if v is not None]
    if not feasible:
        value = 0.0
    elif side == "lower":
        value = min(feasible)
    else:
        value = max(feasible)
    return CharacterizationBound(side, value, per_cell, tuple(skipped))
