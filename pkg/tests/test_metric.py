import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdimlab.metric import (Ball, DomainError, TOL, ball_members,
                            bowen_distance, check_scale, leq, lt, make_ball,
                            set_diameter, system_from_points_1d)
from mdimlab.systems import ShiftSpec, build_full_shift, build_line


def test_tolerant_comparisons():
    assert leq(1.0, 1.0 + TOL / 2)
    assert leq(1.0, 1.0)
    assert not lt(1.0, 1.0 + TOL / 2)
    assert lt(1.0, 1.0 + 2e-12 + 1e-13)


def test_check_scale_rejects_bad_values():
    assert check_scale(3) == 3
    assert check_scale(np.int64(2)) == 2
    for bad in (0, -1, 1.5, "2"):
        with pytest.raises(DomainError):
            check_scale(bad)


def test_points_1d_distances_and_identity():
    sys_ = system_from_points_1d("trio", [0.0, 0.5, 1.0])
    assert sys_.n == 3
    assert bowen_distance(sys_, 0, 2, 1) == 1.0
    assert bowen_distance(sys_, 0, 1, 1) == 0.5
    assert bowen_distance(sys_, 1, 1, 4) == 0.0
    # identity dynamics: deeper scales change nothing
    assert bowen_distance(sys_, 0, 2, 3) == 1.0


def test_bowen_maximizes_over_iterates():
    # the left-shift moves disagreement toward the leading (heaviest) slot
    fs = build_full_shift(ShiftSpec(2, 3))
    # ids 0 and 1 differ only in the last letter: base distance 2^-3
    assert bowen_distance(fs, 0, 1, 1) == pytest.approx(0.125)
    # two shifts promote that disagreement to weight 2^-1
    assert bowen_distance(fs, 0, 1, 3) == pytest.approx(0.875)
    assert bowen_distance(fs, 0, 7, 1) == pytest.approx(0.875)


def test_bowen_rows_match_pairwise_calls():
    fs = build_full_shift(ShiftSpec(2, 3))
    row = fs.bowen_row(3, 2)
    for j in range(fs.n):
        assert row[j] == pytest.approx(bowen_distance(fs, 3, j, 2))
    block = fs.bowen_pairs([1, 4], [0, 5, 7], 2)
    assert block.shape == (2, 3)
    assert block[1, 2] == pytest.approx(bowen_distance(fs, 4, 7, 2))


def test_full_shift_diameter_is_weight_sum():
    # sum of 2^-p over the three carried coordinates
    fs = build_full_shift(ShiftSpec(2, 3))
    assert set_diameter(fs, range(fs.n), 2) == pytest.approx(0.875)
    assert set_diameter(fs, [0], 2) == 0.0


def test_ball_membership_boundary_conventions():
    line = build_line(3)  # {0, 0.5, 1}
    # default balls are closed up to the shared tolerance
    assert list(ball_members(line, 0, 0.5, 1)) == [0, 1]
    assert list(ball_members(line, 0, 0.5 - 1e-9, 1)) == [0]
    # strict balls are open: the boundary point stays out
    assert list(ball_members(line, 0, 0.5, 1, strict=True)) == [0]
    assert list(ball_members(line, 0, 0.5 + 1e-9, 1, strict=True)) == [0, 1]


def test_make_ball_records_center_and_members():
    line = build_line(5)
    b = make_ball(line, 2, 0.3, 1)
    assert isinstance(b, Ball)
    assert b.center == 2
    assert set(b.members) == {1, 2, 3}


def test_subset_restriction():
    line = build_line(5)
    members = ball_members(line, 2, 0.3, 1, subset=[0, 2, 4])
    assert list(members) == [2]


def test_points_1d_rejects_bad_dynamics():
    with pytest.raises(DomainError):
        system_from_points_1d("bad", [0.0, 1.0], dynamics=[0, 5])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
                min_size=2, max_size=8, unique=True),
       st.integers(min_value=1, max_value=3))
def test_bowen_distance_is_a_metric(values, N):
    sys_ = system_from_points_1d("fuzz", sorted(values))
    n = sys_.n
    d = np.array([[bowen_distance(sys_, i, j, N) for j in range(n)]
                  for i in range(n)])
    assert np.allclose(d, d.T)
    assert np.all(np.diag(d) == 0.0)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                assert d[i, j] <= d[i, k] + d[k, j] + 1e-12
