"""Builders for the finite model systems the toolkit works on.

All sequence models share the metric d(u, v) = sum_n 2^-n |u_n - v_n|
(coordinates indexed from 1) and the left shift with the last coordinate
held fixed, so that Gamma maps the finite point set into itself and depth
headroom controls how many shifts stay faithful to the infinite model.

Builders enforce a point budget: 20000 points by default, overridable by
the ``MDIMLAB_BUDGET`` environment variable or an explicit argument.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass

import numpy as np

from .metric import (TOL, BudgetExceeded, DomainError, MetricSystem, leq,
                     system_from_points_1d)

DEFAULT_POINT_BUDGET = 20_000
DEFAULT_NODE_BUDGET = 10_000_000


def point_budget(budget=None) -> int:
    """Resolve the point cap: explicit argument, else env override, else default."""
    if budget is not None:
        return int(budget)
    env = os.environ.get("MDIMLAB_BUDGET")
    if env:
        return int(env)
    return DEFAULT_POINT_BUDGET


def _check_points(n, budget):
    cap = point_budget(budget)
    if n > cap:
        raise BudgetExceeded(f"system would have {n} points, budget is {cap}")


@dataclass(frozen=True)
class ShiftSpec:
    """Full shift on a uniform grid alphabet: grid_size values spanning [0, 1]."""
    grid_size: int
    depth: int

    def __post_init__(self):
        if self.grid_size < 1 or self.depth < 1:
            raise DomainError("grid_size and depth must be >= 1")


@dataclass(frozen=True)
class KAlphabetSpec:
    """Shift over the alphabet {0} | {1/n : n = 1..m_max}."""
    m_max: int
    depth: int

    def __post_init__(self):
        if self.m_max < 1 or self.depth < 1:
            raise DomainError("m_max and depth must be >= 1")

    @property
    def alphabet(self) -> tuple:
        vals = [0.0] + [1.0 / n for n in range(self.m_max, 0, -1)]
        return tuple(vals)


@dataclass(frozen=True)
class SelfSimilarSpec:
    """Iterated affine maps S_k(u) = c*u + a(k) driven by a finite dynamical alphabet.

    ``drivers`` maps each driving symbol to its translation sequence a(k)
    (materialized to ``depth`` coordinates); ``driving_map`` is Gamma on the
    driving alphabet, applied letterwise under the shift (the equivariance
    sigma(S_k(u)) = S_{Gamma k}(sigma(u)) makes the letterwise action exact).
    """
    contraction: float
    drivers: tuple          # tuple of per-symbol coordinate tuples
    driving_map: tuple      # Gamma on symbol indices
    iteration_depth: int
    depth: int

    def __post_init__(self):
        if not 0 < self.contraction < 1:
            raise DomainError("contraction must lie in (0, 1)")
        if len(self.driving_map) != len(self.drivers):
            raise DomainError("driving_map must act on the driver alphabet")


def _shift_hold_last(n_points, alpha_size, depth):
    """Dynamics table for the hold-last left shift on lexicographic word ids."""
    idx = np.arange(n_points, dtype=np.int64)
    last = idx % alpha_size
    return (idx % (alpha_size ** (depth - 1))) * alpha_size + last if depth > 1 else idx


def _word_system(name, alphabet, depth, budget=None) -> MetricSystem:
    alphabet = np.asarray(sorted(alphabet), dtype=float)
    g = alphabet.shape[0]
    n = g ** depth
    _check_points(n, budget)
    digits = np.array(list(itertools.product(range(g), repeat=depth)), dtype=np.int64)
    coords = alphabet[digits]
    weights = 0.5 ** np.arange(1, depth + 1)
    dyn = _shift_hold_last(n, g, depth)
    labels = [tuple(float(x) for x in row) for row in coords]
    out = MetricSystem(name, dyn, coords=coords, weights=weights,
                       labels=labels, validate=(n <= 200))
    # first-coordinate classes of word systems are contiguous id blocks;
    # exact solvers exploit this to decompose large instances
    out.word_info = {"alphabet": tuple(float(a) for a in alphabet),
                     "depth": depth}
    return out


def build_full_shift(spec: ShiftSpec, budget=None) -> MetricSystem:
    """All depth-D words over a uniform grid in [0, 1], hold-last shift."""
    if spec.grid_size == 1:
        alphabet = [0.0]
    else:
        alphabet = np.linspace(0.0, 1.0, spec.grid_size)
    return _word_system(f"full_shift(g{spec.grid_size},d{spec.depth})",
                        alphabet, spec.depth, budget)


def build_k_shift(spec: KAlphabetSpec, budget=None) -> MetricSystem:
    """All depth-D words over {0, 1/m_max, ..., 1/2, 1}, hold-last shift."""
    return _word_system(f"k_shift(m{spec.m_max},d{spec.depth})",
                        spec.alphabet, spec.depth, budget)


def build_alphabet_shift(alphabet, depth, budget=None, name=None) -> MetricSystem:
    """All depth-D words over an explicit alphabet, hold-last shift."""
    return _word_system(name or f"shift(a{len(alphabet)},d{depth})",
                        alphabet, depth, budget)


def build_self_similar(spec: SelfSimilarSpec, budget=None) -> MetricSystem:
    """Orbit model of the self-similar system: one point per driving word.

    The point of the word (k_1 .. k_j) is S_{k_1}(S_{k_2}(... S_{k_j}(0)))
    truncated to ``depth`` coordinates, and the shift acts by applying the
    driving map letterwise.  The metric weights are rescaled so the base
    diameter is at most 1.
    """
    K = len(spec.drivers)
    n = K ** spec.iteration_depth
    _check_points(n, budget)
    words = list(itertools.product(range(K), repeat=spec.iteration_depth))
    drivers = np.zeros((K, spec.depth))
    for k, seq in enumerate(spec.drivers):
        seq = np.asarray(seq, dtype=float)
        reps = int(np.ceil(spec.depth / seq.shape[0]))
        drivers[k] = np.tile(seq, reps)[:spec.depth]
    coords = np.zeros((n, spec.depth))
    for i, w in enumerate(words):
        acc = np.zeros(spec.depth)
        for k in reversed(w):
            acc = spec.contraction * acc + drivers[k]
        coords[i] = acc
    word_index = {w: i for i, w in enumerate(words)}
    gm = spec.driving_map
    dyn = np.array([word_index[tuple(gm[k] for k in w)] for w in words], dtype=np.int64)
    weights = 0.5 ** np.arange(1, spec.depth + 1)
    spread = coords.max(axis=0) - coords.min(axis=0)
    diam = float(spread @ weights)
    if diam > 1.0:
        weights = weights / diam
    sys = MetricSystem(f"self_similar(c{spec.contraction},K{K},j{spec.iteration_depth})",
                       dyn, coords=coords, weights=weights,
                       labels=["".join(map(str, w)) for w in words],
                       validate=(n <= 200))
    _check_equivariance(sys, spec, words, drivers)
    return sys


def _check_equivariance(sys, spec, words, drivers):
    # sigma(S_k(u)) = S_{Gamma k}(sigma(u)) materializes as: the coordinates of
    # the letterwise-mapped word equal the coordinate-shift of the original
    # word's coordinates wherever both are materialized.
    coords = sys.coords
    for i in range(min(len(words), 64)):
        shifted = coords[sys.dynamics[i]]
        expect = np.empty_like(shifted)
        expect[:-1] = coords[i][1:]
        expect[-1] = shifted[-1]  # deepest coordinate is below model resolution
        if not np.allclose(shifted[:-1], expect[:-1], atol=1e-9):
            raise DomainError("self-similar model violates shift equivariance")


@dataclass(frozen=True)
class ProductSpec:
    """Product of two systems with metric max or half-max of the factors."""
    mode: str  # "max" or "half_max"

    def __post_init__(self):
        if self.mode not in ("max", "half_max"):
            raise DomainError("product mode must be 'max' or 'half_max'")


def build_product(left: MetricSystem, right: MetricSystem, mode="max",
                  budget=None) -> MetricSystem:
    """Product system: pairs of points, componentwise dynamics.

    The base metric is max(d_left, d_right) or half of it; both make the
    product Bowen metric the same combination of the factor Bowen metrics.
    """
    ProductSpec(mode)
    n = left.n * right.n
    _check_points(n, budget)
    ia, ib = np.divmod(np.arange(n, dtype=np.int64), right.n)
    dyn = left.dynamics[ia] * right.n + right.dynamics[ib]
    if mode == "max":
        def combine(da, db):
            return np.maximum(da, db)
    else:
        def combine(da, db):
            return 0.5 * np.maximum(da, db)
    labels = [(left.labels[a], right.labels[b]) for a, b in zip(ia, ib)]
    return MetricSystem(f"product({left.name},{right.name},{mode})", dyn,
                        labels=labels, validate=(n <= 200),
                        _product=(combine, left, right, ia, ib))


def build_line(grid_size: int, budget=None) -> MetricSystem:
    """Evenly spaced points spanning [0, 1] with identity dynamics."""
    if grid_size < 1:
        raise DomainError("grid_size must be >= 1")
    _check_points(grid_size, budget)
    if grid_size == 1:
        vals = [0.0]
    else:
        vals = np.linspace(0.0, 1.0, grid_size)
    return system_from_points_1d(f"line({grid_size})", vals)


def depth_for_epsilon(epsilon: float, n_max: int) -> int:
    """Depth policy: smallest D with 2^-D < eps/4, plus N_max headroom."""
    if not 0 < epsilon:
        raise DomainError("epsilon must be positive")
    tail = 1
    while 0.5 ** tail >= epsilon / 4:
        tail += 1
    return n_max + tail


# -- dynamical uniform perfectness -------------------------------------

@dataclass(frozen=True)
class PerfectnessCert:
    """Certificate that annuli B(u, r) \\ B(u, C r) are nonempty on a grid.

    ``constant`` is the largest grid value of C that works for every sampled
    (center, radius, scale) cell; ``witnesses`` maps each cell to the witness
    distance realizing the annulus; ``failures`` lists cells with no point in
    (0, r] at all (those defeat every C).
    """
    constant: float
    witnesses: tuple
    failures: tuple

    @property
    def ok(self) -> bool:
        return self.constant > 0 and not self.failures


def uniformly_perfect_check(sys: MetricSystem, radii, scales=(1,),
                            centers=None, c_grid=None) -> PerfectnessCert:
    """Search for the largest C < 1 making the system dynamically uniformly perfect.

    For every sampled cell (u, r, N) the closed annulus
    ``{v : C r < d_N(u, v) <= r}`` must be nonempty.  The best admissible C of
    a cell is (max realized distance in (0, r]) / r; the certificate takes the
    minimum over cells, snapped down onto ``c_grid``.
    """
    if c_grid is None:
        c_grid = np.round(np.arange(0.02, 1.0, 0.02), 4)
    if centers is None:
        centers = range(sys.n) if sys.n <= 256 else range(0, sys.n, sys.n // 256)
    witnesses = []
    failures = []
    best_cap = np.inf
    for N in scales:
        for u in centers:
            row = sys.bowen_row(u, N)
            for r in radii:
                inside = row[(row > TOL) & leq(row, r)]
                if inside.size == 0:
                    failures.append((int(u), float(r), int(N)))
                    continue
                dstar = float(inside.max())
                witnesses.append((int(u), float(r), int(N), dstar))
                best_cap = min(best_cap, dstar / r)
    if failures or not witnesses:
        return PerfectnessCert(0.0, tuple(witnesses), tuple(failures))
    ok = [c for c in c_grid if c < best_cap - TOL]
    constant = float(max(ok)) if ok else 0.0
    return PerfectnessCert(constant, tuple(witnesses), tuple(failures))


# -- config loading -----------------------------------------------------

def system_from_config(cfg: dict, budget=None) -> MetricSystem:
    """Build a system from a JSON-style dict: {"kind": ..., ...}.

    Kinds: full_shift (grid_size, depth), k_shift (m_max, depth),
    alphabet_shift (alphabet, depth), line (grid_size), two_point (distance),
    self_similar (contraction, drivers, driving_map, iteration_depth, depth),
    product (left, right, mode).
    """
    try:
        kind = cfg["kind"]
    except (TypeError, KeyError):
        raise DomainError("system config needs a 'kind' field")
    if kind == "full_shift":
        return build_full_shift(ShiftSpec(int(cfg["grid_size"]), int(cfg["depth"])), budget)
    if kind == "k_shift":
        return build_k_shift(KAlphabetSpec(int(cfg["m_max"]), int(cfg["depth"])), budget)
    if kind == "alphabet_shift":
        return build_alphabet_shift([float(a) for a in cfg["alphabet"]],
                                    int(cfg["depth"]), budget)
    if kind == "line":
        return build_line(int(cfg["grid_size"]), budget)
    if kind == "two_point":
        d = float(cfg.get("distance", 1.0))
        return system_from_points_1d(f"two_point({d})", [0.0, d])
    if kind == "self_similar":
        spec = SelfSimilarSpec(
            contraction=float(cfg["contraction"]),
            drivers=tuple(tuple(float(x) for x in seq) for seq in cfg["drivers"]),
            driving_map=tuple(int(k) for k in cfg.get(
                "driving_map", range(len(cfg["drivers"])))),
            iteration_depth=int(cfg["iteration_depth"]),
            depth=int(cfg["depth"]))
        return build_self_similar(spec, budget)
    if kind == "product":
        left = system_from_config(cfg["left"], budget)
        right = system_from_config(cfg["right"], budget)
        return build_product(left, right, cfg.get("mode", "max"), budget)
    if kind == "explicit":
        matrix = np.asarray(cfg["dist_matrix"], dtype=float)
        dynamics = cfg.get("dynamics", range(matrix.shape[0]))
        return MetricSystem(cfg.get("name", "explicit"), dynamics,
                            dist_matrix=matrix)
    raise DomainError(f"unknown system kind {kind!r}")


def load_system(path, budget=None) -> MetricSystem:
    """Load a system spec from a JSON file."""
    with open(path) as fh:
        return system_from_config(json.load(fh), budget)
