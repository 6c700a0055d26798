"""Packing/covering counts, windowed cover costs, and the cube hierarchy."""

import itertools

import numpy as np
import pytest

from mdimlab.metric import BudgetExceeded, DomainError
from mdimlab.covers import (
    CANDIDATE_GRID,
    EXACT,
    GREEDY,
    GREEDY_LOWER,
    GREEDY_UPPER,
    CoverInfeasible,
    _exact_cover,
    _exact_mis,
    build_cube_tree,
    candidate_diameters,
    hausdorff_content,
    max_separated,
    min_spanning,
    optimal_cover_cost,
    sandwich_check,
    separation_report,
)
from mdimlab.systems import (
    KAlphabetSpec,
    ShiftSpec,
    build_alphabet_shift,
    build_full_shift,
    build_k_shift,
    build_line,
    system_from_config,
)


# -- separated and spanning counts ---------------------------------------

def test_line3_counts_and_sandwich():
    line = build_line(3)
    reports = [separation_report(line, 1, eps) for eps in (0.4, 0.8)]
    assert [(r.sep_count, r.span_count) for r in reports] == [(3, 3), (2, 1)]
    result = sandwich_check(reports)
    assert result.ok
    assert result.checked == (
        "span(0.4)=3 <= sep(0.4)=3",
        "sep(0.8)=2 <= span(0.4)=3",
        "span(0.8)=1 <= sep(0.8)=2",
    )


def test_dyadic_shift_separation_counts():
    """On the binary shift, sep(N, 2^-k) doubles with each of N and k."""
    sys = build_full_shift(ShiftSpec(2, 6))
    for N in (1, 2):
        for k in (1, 2, 3):
            rep = max_separated(sys, N, 0.5 ** k)
            assert rep.sep_count == 2 ** (N + k - 1)


def test_k_shift_cells_frozen():
    ks = build_k_shift(KAlphabetSpec(3, 3))
    cells = {
        (1, 0.15): (7, 15),
        (2, 0.24): (8, 21),
        (3, 0.30): (5, 17),
        (1, 0.44): (1, 3),
    }
    for (N, eps), (span, sep) in cells.items():
        assert min_spanning(ks, N, eps).span_count == span
        assert max_separated(ks, N, eps).sep_count == sep


def test_restricted_alphabet_models():
    # depth-4 models behind the m=2 packing/covering bounds at eps = 1/8
    small = [1.0, 0.5]
    full = build_alphabet_shift([0.0] + small, 4, name="K(2,4)")
    restricted = build_alphabet_shift(small, 4, name="A(2,4)")
    assert min_spanning(full, 1, 0.125).span_count == 9
    assert max_separated(restricted, 1, 0.125).sep_count == 4


def test_greedy_counts_bound_exact_counts():
    for sys in (build_k_shift(KAlphabetSpec(2, 3)), build_line(9)):
        for eps in (0.1, 0.3, 0.6):
            g_sep = max_separated(sys, 2, eps, mode=GREEDY)
            x_sep = max_separated(sys, 2, eps, mode=EXACT)
            assert g_sep.method == GREEDY_LOWER
            assert g_sep.sep_count <= x_sep.sep_count
            g_span = min_spanning(sys, 2, eps, mode=GREEDY)
            x_span = min_spanning(sys, 2, eps, mode=EXACT)
            assert g_span.method == GREEDY_UPPER
            assert g_span.span_count >= x_span.span_count


def test_witnesses_back_the_counts():
    sys = build_k_shift(KAlphabetSpec(2, 2))
    rep = max_separated(sys, 1, 0.3)
    assert len(rep.witness) == rep.sep_count
    from mdimlab.metric import bowen_distance
    for i, j in itertools.combinations(rep.witness, 2):
        assert bowen_distance(sys, i, j, 1) >= 0.3 - 1e-12


def test_mode_and_epsilon_validation():
    line = build_line(3)
    with pytest.raises(DomainError):
        max_separated(line, 1, 0.0)
    with pytest.raises(DomainError):
        min_spanning(line, 1, -0.5)
    with pytest.raises(DomainError):
        max_separated(line, 1, 0.5, mode="annealed")
    with pytest.raises(DomainError):
        min_spanning(line, 1, 0.5, mode="annealed")


def test_sandwich_check_rejects_unusable_reports():
    line = build_line(3)
    with pytest.raises(DomainError):
        sandwich_check([])
    greedy = max_separated(line, 1, 0.4, mode=GREEDY)
    with pytest.raises(DomainError):
        sandwich_check([greedy])
    r1 = separation_report(line, 1, 0.4)
    r2 = separation_report(build_line(5), 1, 0.4)
    with pytest.raises(DomainError):
        sandwich_check([r1, r2])


def test_node_budget_aborts_search():
    with pytest.raises(BudgetExceeded):
        max_separated(build_line(30), 1, 0.034, node_budget=1)
    with pytest.raises(BudgetExceeded):
        min_spanning(build_k_shift(KAlphabetSpec(3, 3)), 1, 0.15,
                     node_budget=1)


# -- exact solvers against brute force -----------------------------------

def _brute_cover(n, fams):
    best = None
    for k in range(1, len(fams) + 1):
        for comb in itertools.combinations(range(len(fams)), k):
            union = frozenset().union(*[fams[j][2] for j in comb])
            if union >= frozenset(range(n)):
                c = sum(fams[j][1] for j in comb)
                if best is None or c < best - 1e-12:
                    best = c
    return best


def test_exact_cover_matches_brute_force():
    rng = np.random.default_rng(7)
    tried = 0
    while tried < 25:
        n = int(rng.integers(3, 9))
        F = int(rng.integers(3, 10))
        fams = []
        for j in range(F):
            size = int(rng.integers(1, n + 1))
            mem = frozenset(map(int, rng.choice(n, size=size, replace=False)))
            cost = round(float(rng.uniform(0.1, 2.0)), 3)
            fams.append(((j,), cost, mem))
        if not frozenset().union(*[m for _, _, m in fams]) >= frozenset(range(n)):
            continue
        tried += 1
        sel, cost, _ = _exact_cover(range(n), fams, 10_000_000)
        covered = frozenset().union(*[fams[j][2] for j in sel])
        assert covered >= frozenset(range(n))
        assert cost == pytest.approx(_brute_cover(n, fams), abs=1e-9)


def test_exact_mis_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(2, 10))
        neigh = [set() for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.35:
                    neigh[i].add(j)
                    neigh[j].add(i)
        sol, _ = _exact_mis(neigh, n, 10_000_000)
        assert all(j not in neigh[i] for i in sol for j in sol)
        best = 0
        for k in range(n, 0, -1):
            for comb in itertools.combinations(range(n), k):
                if all(b not in neigh[a]
                       for a, b in itertools.combinations(comb, 2)):
                    best = k
                    break
            if best:
                break
        assert len(sol) == best


def test_exact_cover_reports_uncoverable_point():
    with pytest.raises(CoverInfeasible):
        _exact_cover([0, 1, 2], [("a", 1.0, frozenset({0, 1}))], 1000)


# -- windowed cover costs -------------------------------------------------

def test_candidate_diameter_conventions():
    line = build_line(3)
    # window mode keeps doubled distances in (lo, hi] and appends hi
    assert candidate_diameters(line, 1, (0.0, 1.2)).tolist() == [1.0, 1.2]
    # content mode keeps (lo, hi) strictly and appends lo
    strict = candidate_diameters(line, 1, (0.25, 1.2), strict_hi=True)
    assert strict.tolist() == [0.25, 1.0]
    with pytest.raises(DomainError):
        candidate_diameters(line, 1, (0.5, 0.5))


def test_optimal_cover_cost_line3():
    line = build_line(3)
    cover = optimal_cover_cost(line, 1, (0.0, 1.2), 1.0)
    assert cover.cost == pytest.approx(1.0)
    assert cover.count == 1
    assert cover.balls[0].radius == pytest.approx(0.5)
    assert cover.check(line) == []
    greedy = optimal_cover_cost(line, 1, (0.0, 1.2), 1.0, mode=CANDIDATE_GRID)
    assert greedy.method == CANDIDATE_GRID
    assert greedy.cost >= cover.cost - 1e-12


def test_exact_cover_cost_never_above_greedy():
    ks = build_k_shift(KAlphabetSpec(2, 2))
    for s in (0.25, 0.5, 1.0):
        exact = optimal_cover_cost(ks, 2, (0.0, 0.5), s)
        greedy = optimal_cover_cost(ks, 2, (0.0, 0.5), s, mode=CANDIDATE_GRID)
        assert exact.cost <= greedy.cost + 1e-12
        assert exact.check(ks) == []
        assert greedy.check(ks) == []


def test_hausdorff_content_values():
    two = system_from_config({"kind": "two_point"})
    # at t = 0 every ball costs 1, and one epsilon-ball covers both points
    value, cover = hausdorff_content(two, 1, 0.0, 3.0)
    assert value == pytest.approx(1.0)
    assert cover.count == 1
    # the default zero floor admits vanishing balls: content 0 at positive t
    value, cover = hausdorff_content(two, 1, 0.5, 3.0)
    assert value == 0.0
    assert cover.count == 2
    assert all(b.radius == 0.0 for b in cover.balls)
    # a positive floor forces real balls back into the cover
    value, cover = hausdorff_content(two, 1, 0.5, 3.0, min_diameter=0.5)
    assert value > 0.0
    assert cover.check(two) == []
    with pytest.raises(DomainError):
        hausdorff_content(two, 1, 0.5, 0.0)


# -- cube hierarchy --------------------------------------------------------

def test_cube_tree_line():
    tree = build_cube_tree(build_line(17), 1, 1.0 / 12.0, 2)
    assert tree.depth == 2
    assert [len(level) for level in tree.levels] == [9, 17]
    assert tree.check() == []


def test_cube_tree_shift_invariants():
    sys = build_full_shift(ShiftSpec(2, 4))
    tree = build_cube_tree(sys, 2, 1.0 / 16.0, 2)
    assert tree.check() == []
    # every point lands in the cube that lists it as a member
    for k in (1, 2):
        for p in range(sys.n):
            assert p in tree.cube_of(p, k).members
    # children refine parents
    for cube in tree.level(2):
        parent = tree.level(1)[cube.parent]
        assert set(cube.members) <= set(parent.members)


def test_cube_tree_ratio_gate():
    with pytest.raises(DomainError):
        build_cube_tree(build_line(5), 1, 0.2, 1)
    with pytest.raises(DomainError):
        build_cube_tree(build_line(5), 1, 1.0 / 16.0, 0)
