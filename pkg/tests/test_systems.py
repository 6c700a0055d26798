"""System builders: word shifts, products, lines, configs, budgets."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdimlab.metric import (BudgetExceeded, DomainError, bowen_distance,
                            set_diameter)
from mdimlab.systems import (
    KAlphabetSpec,
    SelfSimilarSpec,
    ShiftSpec,
    build_full_shift,
    build_k_shift,
    build_line,
    build_product,
    build_self_similar,
    depth_for_epsilon,
    load_system,
    system_from_config,
    uniformly_perfect_check,
)


def test_k_shift_alphabet_and_size():
    spec = KAlphabetSpec(3, 3)
    assert spec.alphabet == (0.0, 1.0 / 3.0, 0.5, 1.0)
    sys = build_k_shift(spec)
    assert sys.n == 4 ** 3
    assert sys.word_info["depth"] == 3


def test_full_shift_hold_last_dynamics():
    sys = build_full_shift(ShiftSpec(2, 3))
    # word (1,0,1) shifts to (0,1,1): drop the head, repeat the tail
    assert sys.labels[5] == (1.0, 0.0, 1.0)
    assert sys.labels[sys.dynamics[5]] == (0.0, 1.0, 1.0)
    # constant words are the fixed points
    fixed = [i for i in range(sys.n) if sys.dynamics[i] == i]
    assert sorted(fixed) == [0, 7]


@settings(max_examples=40, deadline=None)
@given(grid=st.integers(1, 3), depth=st.integers(1, 4))
def test_hold_last_shift_stabilizes(grid, depth):
    """After depth-1 steps every orbit has reached a constant word."""
    sys = build_full_shift(ShiftSpec(grid, depth))
    state = np.arange(sys.n)
    for _ in range(depth - 1):
        state = sys.dynamics[state]
    assert np.array_equal(sys.dynamics[state], state)


def test_line_spacing_and_identity():
    line = build_line(5)
    assert line.n == 5
    assert bowen_distance(line, 0, 4, 3) == pytest.approx(1.0)
    assert bowen_distance(line, 1, 2, 1) == pytest.approx(0.25)
    assert build_line(1).n == 1
    with pytest.raises(DomainError):
        build_line(0)


def test_product_metric_modes():
    two = system_from_config({"kind": "two_point", "distance": 0.8})
    line = build_line(3)
    pmax = build_product(two, line, "max")
    phalf = build_product(two, line, "half_max")
    assert pmax.n == 6
    # ids enumerate (left, right) pairs row-major; 5 = (0.8, 1.0)
    assert pmax.labels[5] == (0.8, 1.0)
    assert bowen_distance(pmax, 0, 5, 1) == pytest.approx(1.0)
    assert bowen_distance(pmax, 0, 3, 1) == pytest.approx(0.8)  # left dominates
    assert bowen_distance(phalf, 0, 5, 1) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        build_product(two, line, "sum")


def test_self_similar_orbit_model():
    sys = build_self_similar(SelfSimilarSpec(
        contraction=0.5, drivers=((0.0, 0.0), (1.0, 1.0)),
        driving_map=(0, 1), iteration_depth=3, depth=2))
    assert sys.n == 8
    # weights are rescaled so the base diameter is exactly 1
    assert set_diameter(sys, range(sys.n), 1) == pytest.approx(1.0)


def test_self_similar_spec_validation():
    with pytest.raises(DomainError):
        SelfSimilarSpec(contraction=1.5, drivers=((0.0,),),
                        driving_map=(0,), iteration_depth=1, depth=1)
    with pytest.raises(DomainError):
        SelfSimilarSpec(contraction=0.5, drivers=((0.0,), (1.0,)),
                        driving_map=(0,), iteration_depth=1, depth=1)


def test_depth_for_epsilon_policy():
    # smallest tail with 2^-tail < eps/4, plus the scale headroom
    assert depth_for_epsilon(0.5, 2) == 6
    assert depth_for_epsilon(0.1, 3) == 9
    with pytest.raises(DomainError):
        depth_for_epsilon(0.0, 1)


def test_point_budget_argument_and_env(monkeypatch):
    with pytest.raises(BudgetExceeded):
        build_full_shift(ShiftSpec(2, 12), budget=1000)
    monkeypatch.setenv("MDIMLAB_BUDGET", "10")
    with pytest.raises(BudgetExceeded):
        build_line(11)
    # an explicit budget wins over the environment
    assert build_line(11, budget=100).n == 11


def test_uniformly_perfect_check_line():
    cert = uniformly_perfect_check(build_line(5), radii=[0.5, 0.25], scales=(1,))
    assert cert.ok
    # every annulus has a witness at the full radius, so C can sit just under 1
    assert cert.constant == pytest.approx(0.98)
    assert len(cert.witnesses) == 10
    assert cert.failures == ()


def test_uniformly_perfect_check_gap_defeats_every_constant():
    two = system_from_config({"kind": "two_point", "distance": 0.8})
    cert = uniformly_perfect_check(two, radii=[0.5], scales=(1,))
    assert not cert.ok
    assert cert.constant == 0.0
    assert len(cert.failures) == 2


def test_system_from_config_kinds():
    assert system_from_config({"kind": "line", "grid_size": 4}).n == 4
    assert system_from_config(
        {"kind": "full_shift", "grid_size": 2, "depth": 2}).n == 4
    assert system_from_config(
        {"kind": "alphabet_shift", "alphabet": [0.0, 0.25, 1.0], "depth": 2}).n == 9
    prod = system_from_config({
        "kind": "product", "mode": "half_max",
        "left": {"kind": "two_point"}, "right": {"kind": "line", "grid_size": 3}})
    assert prod.n == 6
    explicit = system_from_config({
        "kind": "explicit", "name": "tri",
        "dist_matrix": [[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]})
    assert explicit.name == "tri"
    assert bowen_distance(explicit, 0, 2, 1) == pytest.approx(1.0)


def test_system_from_config_rejects_bad_input():
    with pytest.raises(DomainError):
        system_from_config({"grid_size": 3})
    with pytest.raises(DomainError):
        system_from_config({"kind": "moebius_flow"})
    with pytest.raises(DomainError):
        system_from_config(None)


def test_load_system_round_trip(tmp_path):
    path = tmp_path / "sys.json"
    path.write_text(json.dumps({"kind": "k_shift", "m_max": 2, "depth": 2}))
    sys = load_system(path)
    assert sys.n == 9
    assert sys.word_info["alphabet"] == (0.0, 0.5, 1.0)
