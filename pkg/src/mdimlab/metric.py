"""Finite metric systems and the dynamical (Bowen) metrics they induce.

A *system* here is a finite metric space together with a self-map Gamma.
For a time horizon N >= 1 the Bowen metric is

    d_N(u, v) = max_{0 <= i <= N-1} d(Gamma^i u, Gamma^i v),

so d_1 is the base metric.  Everything downstream (separated and spanning
counts, cover costs, dimension statistics) is phrased in terms of closed
balls ``{v : d_N(u, v) <= r}`` and open balls with strict ``<``.

Floating point comparisons against radii and thresholds go through the
``leq``/``lt`` helpers with a fixed tolerance so that strictness conventions
live in exactly one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Comparison tolerance for <= / < tests against radii and thresholds.
TOL = 1e-12


def leq(a, b, tol: float = TOL):
    """Tolerant ``a <= b`` (scalar or elementwise)."""
    return a <= b + tol


def lt(a, b, tol: float = TOL):
    """Tolerant strict ``a < b`` (scalar or elementwise)."""
    return a < b - tol


class BudgetExceeded(RuntimeError):
    """Raised when a construction or solver would exceed its budget."""


class DomainError(ValueError):
    """Raised when an operation's precondition fails (bad window, empty family...)."""


def check_scale(N) -> int:
    """Validate a Bowen time horizon: an integer >= 1."""
    n = int(N)
    if n < 1 or n != N:
        raise DomainError(f"Bowen scale must be an integer >= 1, got {N!r}")
    return n


class MetricSystem:
    """A finite metric space with a self-map, point ids 0..n-1.

    Three storage backends are supported:

    * ``coords`` + ``weights``: points are real sequences and the base metric
      is the weighted L1 distance ``sum_k w_k |x_k - y_k|`` (the sequence-space
      metric used by the shift models);
    * ``dist_matrix``: an explicit symmetric distance matrix (small generic
      systems, e.g. finite grids on a line);
    * product of two existing systems via :func:`combine_rows` (see
      ``systems.build_product``).

    Parameters
    ----------
    name : str
        Identifier used in reports.
    dynamics : array-like of int
        ``dynamics[i]`` is the id of Gamma(point i).
    coords, weights : ndarray, optional
        Sequence backend: coords has shape (n, depth).
    dist_matrix : ndarray, optional
        Dense backend, shape (n, n).
    labels : sequence, optional
        Human-readable point labels for reports; defaults to ids.
    validate : bool
        Check metric axioms at construction (exhaustive up to 200 points,
        sampled above).
    """

    def __init__(self, name, dynamics, *, coords=None, weights=None,
                 dist_matrix=None, labels=None, validate=True,
                 _product=None):
        self.name = str(name)
        self.dynamics = np.asarray(dynamics, dtype=np.int64)
        self.n = int(self.dynamics.shape[0])
        if self.n == 0:
            raise DomainError("a system needs at least one point")
        if self.dynamics.min() < 0 or self.dynamics.max() >= self.n:
            raise DomainError("dynamics must map point ids into range")
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.dist_matrix = None if dist_matrix is None else np.asarray(dist_matrix, dtype=float)
        self._product = _product  # (combine, left_sys, right_sys, ia, ib)
        if self.coords is not None:
            if self.weights is None:
                raise DomainError("coords backend needs metric weights")
            if self.coords.shape != (self.n, self.weights.shape[0]):
                raise DomainError("coords / weights shape mismatch")
        elif self.dist_matrix is not None:
            if self.dist_matrix.shape != (self.n, self.n):
                raise DomainError("dist_matrix must be (n, n)")
        elif self._product is None:
            raise DomainError("one of coords, dist_matrix, or a product backend is required")
        self.labels = list(labels) if labels is not None else list(range(self.n))
        # iterate table: column k holds Gamma^k applied to every point
        self._iter = np.arange(self.n, dtype=np.int64)[:, None]
        if validate:
            self._validate_metric()

    # -- base metric ---------------------------------------------------

    def base_row(self, i: int) -> np.ndarray:
        """Distances from point ``i`` to every point (base metric)."""
        if self.coords is not None:
            return np.abs(self.coords - self.coords[i]) @ self.weights
        if self.dist_matrix is not None:
            return self.dist_matrix[i]
        combine, left, right, ia, ib = self._product
        return combine(left.base_row(ia[i])[ia], right.base_row(ib[i])[ib])

    def base_pairs(self, I, J) -> np.ndarray:
        """Base distances between index arrays, shape (len(I), len(J))."""
        I = np.asarray(I, dtype=np.int64)
        J = np.asarray(J, dtype=np.int64)
        if self.coords is not None:
            diff = np.abs(self.coords[I][:, None, :] - self.coords[J][None, :, :])
            return diff @ self.weights
        if self.dist_matrix is not None:
            return self.dist_matrix[np.ix_(I, J)]
        combine, left, right, ia, ib = self._product
        return combine(left.base_pairs(ia[I], ia[J]), right.base_pairs(ib[I], ib[J]))

    # -- dynamics ------------------------------------------------------

    def iterates(self, k_max: int) -> np.ndarray:
        """Table of Gamma^k for k = 0..k_max, shape (n, k_max+1), memoized."""
        while self._iter.shape[1] <= k_max:
            self._iter = np.concatenate(
                [self._iter, self.dynamics[self._iter[:, -1]][:, None]], axis=1)
        return self._iter[:, :k_max + 1]

    # -- Bowen metric ---------------------------------------------------

    def bowen_row(self, i: int, N) -> np.ndarray:
        """d_N distances from point ``i`` to every point."""
        N = check_scale(N)
        it = self.iterates(N - 1)
        row = self.base_row(i)
        for k in range(1, N):
            row = np.maximum(row, self.base_row(it[i, k])[it[:, k]])
        return row

    def bowen_pairs(self, I, J, N) -> np.ndarray:
        """d_N distances between index arrays, shape (len(I), len(J))."""
        N = check_scale(N)
        it = self.iterates(N - 1)
        I = np.asarray(I, dtype=np.int64)
        J = np.asarray(J, dtype=np.int64)
        out = self.base_pairs(I, J)
        for k in range(1, N):
            np.maximum(out, self.base_pairs(it[I, k], it[J, k]), out=out)
        return out

    def _validate_metric(self):
        n = self.n
        if n > 200:
            rng = np.random.default_rng(0)
            idx = np.sort(rng.choice(n, size=64, replace=False))
        else:
            idx = np.arange(n)
        D = self.base_pairs(idx, idx)
        if not np.allclose(D, D.T, atol=TOL):
            raise DomainError(f"{self.name}: base metric is not symmetric")
        if np.any(np.diag(D) > TOL):
            raise DomainError(f"{self.name}: d(u, u) != 0")
        if np.any(D < -TOL):
            raise DomainError(f"{self.name}: negative distances")
        for k in range(len(idx)):
            if np.any(D > D[:, k][:, None] + D[k, :][None, :] + 1e-9):
                raise DomainError(f"{self.name}: triangle inequality fails")

    def diameter(self, N=1) -> float:
        """Diameter of the whole system under d_N."""
        return set_diameter(self, np.arange(self.n), N)

    def __repr__(self):
        return f"MetricSystem({self.name!r}, n={self.n})"


def system_from_points_1d(name, values, dynamics=None) -> MetricSystem:
    """System from scalar points with |x - y| metric; identity dynamics by default."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if dynamics is None:
        dynamics = np.arange(n)
    mat = np.abs(values[:, None] - values[None, :])
    return MetricSystem(name, dynamics, dist_matrix=mat, labels=[float(v) for v in values])


@dataclass(frozen=True)
class Ball:
    """A closed Bowen ball: center id, nominal radius, horizon, member ids."""
    center: int
    radius: float
    scale: int
    members: tuple = field(default_factory=tuple)

    @property
    def diameter(self) -> float:
        """Nominal diameter 2r (the quantity cover costs are charged on)."""
        return 2.0 * self.radius


def bowen_distance(sys: MetricSystem, i: int, j: int, N) -> float:
    """d_N(i, j): max base distance along the first N iterates."""
    return float(sys.bowen_pairs([i], [j], N)[0, 0])


def ball_members(sys: MetricSystem, center: int, radius: float, N,
                 strict: bool = False, subset=None) -> np.ndarray:
    """Ids inside the Bowen ball around ``center``.

    Closed (``d <= r``) by default, open (``d < r``) with ``strict=True``;
    both comparisons use the shared tolerance.  ``subset`` restricts the
    candidate ids.
    """
    row = sys.bowen_row(center, N)
    if subset is not None:
        subset = np.asarray(subset, dtype=np.int64)
        keep = lt(row[subset], radius) if strict else leq(row[subset], radius)
        return subset[keep]
    keep = lt(row, radius) if strict else leq(row, radius)
    return np.flatnonzero(keep)


def make_ball(sys: MetricSystem, center: int, radius: float, N,
              subset=None) -> Ball:
    """Closed Bowen ball with materialized members."""
    members = ball_members(sys, center, radius, N, subset=subset)
    return Ball(int(center), float(radius), check_scale(N), tuple(int(m) for m in members))


def set_diameter(sys: MetricSystem, ids, N) -> float:
    """Max pairwise d_N over the given ids (0 for singletons)."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size <= 1:
        return 0.0
    # chunk rows to bound memory on large id sets
    best = 0.0
    step = max(1, int(2.0e6 // max(1, ids.size)))
    for a in range(0, ids.size, step):
        block = sys.bowen_pairs(ids[a:a + step], ids, N)
        best = max(best, float(block.max()))
    return best
