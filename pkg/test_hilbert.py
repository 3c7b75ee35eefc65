"""
Tests for Hilbert Curves
------------------------
Planar and k-dimensional curves, their inverses and Hilbert point ordering.
"""

import numpy as np
import pytest

from viseme.hilbert import (
    PATTERNS,
    hilbert_d2xy,
    hilbert_kd,
    hilbert_kd_index,
    hilbert_path,
    hilbert_xy2d,
    order_points,
    random_tour_lengths,
    tour_length,
)


def steps_are_unit(cells) -> bool:
    return all(sum(abs(p - q) for p, q in zip(a, b)) == 1 for a, b in zip(cells, cells[1:]))


def test_base_pattern():
    assert hilbert_path(1) == list(PATTERNS["A"])


@pytest.mark.parametrize("r", range(1, 7))
def test_planar_curve_is_a_unit_step_bijection(r):
    cells = hilbert_path(r)
    assert len(set(cells)) == 4 ** r
    assert steps_are_unit(cells)
    assert cells[0] == (0, 0)


@pytest.mark.parametrize("r", range(1, 6))
def test_planar_inverse(r):
    for d in range(4 ** r):
        assert hilbert_xy2d(r, *hilbert_d2xy(r, d)) == d


def test_planar_range_checks():
    with pytest.raises(ValueError):
        hilbert_d2xy(2, 16)
    with pytest.raises(ValueError):
        hilbert_xy2d(2, 4, 0)


@pytest.mark.parametrize("k,r", [(3, 1), (3, 3), (4, 2), (2, 5), (5, 2)])
def test_kd_curve_is_a_unit_step_bijection(k, r):
    cells = [hilbert_kd(k, r, d) for d in range(1 << (k * r))]
    assert len(set(cells)) == 1 << (k * r)
    assert steps_are_unit(cells)
    assert all(hilbert_kd_index(k, r, cell) == d for d, cell in enumerate(cells))


@pytest.mark.parametrize("r", [1, 2])
def test_kd_reduces_to_planar(r):
    assert [hilbert_kd(2, r, d) for d in range(4 ** r)] == hilbert_path(r)


def test_kd_range_checks():
    with pytest.raises(ValueError):
        hilbert_kd(3, 2, 64)
    with pytest.raises(ValueError):
        hilbert_kd_index(3, 2, (0, 4, 0))


def test_order_of_quadrant_centers():
    points = [(0.75, 0.25), (0.25, 0.75), (0.25, 0.25), (0.75, 0.75)]
    assert order_points(points, 1, (0.0, 0.0, 1.0, 1.0)) == [2, 1, 3, 0]


def test_order_keeps_ties_and_trivial_sets():
    assert order_points([], 4) == []
    assert order_points([(3.0, 3.0)], 4) == [0]
    assert order_points([(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)], 4) == [0, 1, 2]


def test_hilbert_tour_beats_random_order():
    rng = np.random.default_rng(0)
    points = [tuple(p) for p in rng.uniform(0.0, 100.0, size=(100, 2))]
    length = tour_length(points, order_points(points, 8))
    assert length < random_tour_lengths(points, 100, seed=0).mean()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
