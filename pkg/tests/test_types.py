"""Container validation: simplex vectors, constraints, count laws."""

import math

import pytest

from urnrates import (CountDistribution, DomainError, EndpointConstraint,
                      OccupancyPathGrid, SimplexVector, default_truncation,
                      poisson_pmf, poisson_tail_mass, simplex)


def test_simplex_accessors():
    v = SimplexVector((0.5, 0.3, 0.2), 1)
    assert v.head == (0.5, 0.3)
    assert v.overflow == 0.2
    assert v.psi() == (0.5, 0.8)
    assert v.head_mean() == pytest.approx(0.3)
    assert len(v) == 3 and v[1] == 0.3 and list(v) == [0.5, 0.3, 0.2]


def test_simplex_capacity_inference():
    v = simplex(0.1, 0.2, 0.3, 0.4)
    assert v.capacity_index == 2


def test_simplex_rejects_bad_sum():
    with pytest.raises(DomainError, match="refusing to renormalize"):
        SimplexVector((0.5, 0.6), 0)
    # wider tolerance admits the same vector
    SimplexVector((0.5, 0.5 + 5e-7), 0, tolerance=1e-6)


def test_simplex_rejects_negative_entry():
    with pytest.raises(DomainError):
        SimplexVector((1.1, -0.1), 0)
    # dust-sized negatives clamp to zero
    v = SimplexVector((1.0, -1e-15), 0)
    assert v.overflow == 0.0


def test_simplex_capacity_shape_mismatch():
    with pytest.raises(DomainError):
        SimplexVector((0.5, 0.5), 1)


def test_constraint_validation():
    a = SimplexVector((1.0, 0.0, 0.0), 1)
    w = SimplexVector((0.2, 0.5, 0.3), 1)
    c = EndpointConstraint(a, w, 2.0)
    assert c.capacity_index == 1 and not c.is_trivial()
    with pytest.raises(DomainError):
        EndpointConstraint(a, SimplexVector((0.5, 0.5), 0), 2.0)
    with pytest.raises(DomainError):
        EndpointConstraint(a, w, -1.0)
    with pytest.raises(DomainError):
        EndpointConstraint(a, w, math.inf)


def test_constraint_trivial_needs_matching_endpoints():
    a = SimplexVector((0.7, 0.3, 0.0), 1)
    assert EndpointConstraint(a, a, 0.0).is_trivial()
    with pytest.raises(DomainError):
        EndpointConstraint(a, SimplexVector((0.6, 0.4, 0.0), 1), 0.0)


def test_standardized_shifts_shared_empty_levels():
    a = SimplexVector((0.0, 0.0, 1.0, 0.0, 0.0), 3)
    w = SimplexVector((0.0, 0.0, 0.3, 0.5, 0.2), 3)
    c = EndpointConstraint(a, w, 1.0)
    shifted, s = c.standardized()
    assert s == 2
    assert shifted.capacity_index == 1
    assert shifted.alpha.entries == (1.0, 0.0, 0.0)
    assert shifted.omega.entries == (0.3, 0.5, 0.2)


def test_standardized_rejects_target_mass_below_start():
    a = SimplexVector((0.0, 1.0, 0.0), 1)
    w = SimplexVector((0.4, 0.6, 0.0), 1)
    with pytest.raises(DomainError, match="cannot lose balls"):
        EndpointConstraint(a, w, 1.0).standardized()


def test_count_distribution_poisson():
    d = CountDistribution.poisson(2.5)
    assert d.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert d.mean() == pytest.approx(2.5, abs=1e-12)
    assert d.pmf(3) == pytest.approx(poisson_pmf(3, 2.5), abs=1e-15)


def test_count_distribution_head_tail_split():
    rate = 1.7
    head = tuple(0.9 * poisson_pmf(i, rate) for i in range(4))
    # scaled head plus a matching scaled tail keeps total mass at one
    tail_scale = (1.0 - sum(head)) / poisson_tail_mass(3, rate)
    d = CountDistribution(head, tail_scale, rate)
    assert d.truncation == 3
    assert d.pmf(2) == head[2]
    assert d.pmf(7) == pytest.approx(tail_scale * poisson_pmf(7, rate))
    ext = d.materialized_head(10)
    assert len(ext) == 11 and ext[:4] == head
    assert d.total_mass() == pytest.approx(1.0, abs=1e-12)


def test_count_distribution_rejects_bad_mass():
    with pytest.raises(DomainError, match="mass"):
        CountDistribution((0.5, 0.1), 0.0, 1.0)
    with pytest.raises(DomainError):
        CountDistribution((), -1.0, 1.0)
    with pytest.raises(DomainError):
        CountDistribution((1.0,), 0.0, 1.0, truncation=3)


def test_default_truncation_tail_negligible():
    for rate in (0.1, 1.0, 3.0, 4.0, 10.0):
        bound = default_truncation(rate)
        assert poisson_tail_mass(bound, rate) < 1e-12


def test_path_grid_shape_checks():
    s = SimplexVector((1.0, 0.0), 0)
    t = SimplexVector((0.4, 0.6), 0)
    grid = OccupancyPathGrid((0.0, 1.0), (s, t))
    assert grid.capacity_index == 0
    assert grid.psi_grid() == [(1.0,), (0.4,)]
    with pytest.raises(DomainError):
        OccupancyPathGrid((0.0,), (s,))
    with pytest.raises(DomainError):
        OccupancyPathGrid((0.0, 0.0), (s, t))
    with pytest.raises(DomainError):
        OccupancyPathGrid((0.0, 1.0), (s, t, t))
    with pytest.raises(DomainError):
        OccupancyPathGrid((0.0, 1.0), (s, t), rates=(s, t))
