"""Path objects: zero-cost flow, straight lines, grids, cost quadrature."""

import math
import random

import pytest

from urnrates import (ComboPath, DomainError, EndpointConstraint,
                      InfeasibleInput, LinearPath, PiecewisePath,
                      SimplexVector, build_empty_extremal, closed_form_cost,
                      path_cost, poisson_pmf, rate_to_velocity,
                      terminal_rate_general, validity_check, zero_cost_path)


def empty(cap):
    return SimplexVector((1.0,) + (0.0,) * (cap + 1), cap)


def test_zero_cost_path_is_poisson_flow():
    alpha = SimplexVector((0.5, 0.3, 0.2, 0.0, 0.0), 3)
    path = zero_cost_path(alpha, 2.0)
    for x in (0.0, 0.7, 2.0):
        gam = path.gamma(x)
        for j in range(4):
            want = sum(alpha.head[k] * poisson_pmf(j - k, x)
                       for k in range(j + 1))
            assert gam.entries[j] == pytest.approx(want, abs=1e-14)
        assert sum(gam.entries) == pytest.approx(1.0, abs=1e-12)
    assert path.theta(1.3).entries == path.gamma(1.3).entries


def test_zero_cost_path_costs_nothing():
    alpha = SimplexVector((0.5, 0.3, 0.2, 0.0, 0.0), 3)
    path = zero_cost_path(alpha, 2.0)
    assert path_cost(path, points=801) == pytest.approx(0.0, abs=1e-10)
    assert validity_check(path.sample(301)).ok


def test_zero_cost_cumulative_reference_value():
    # started from (0.5, 0.3, 0.2), by time 2.0 the fraction of urns
    # at or below level 3 is exp(-2) * 79/15
    alpha = SimplexVector((0.5, 0.3, 0.2, 0.0, 0.0), 3)
    value = zero_cost_path(alpha, 2.0).psi(2.0)[3]
    assert value == pytest.approx(math.exp(-2.0) * 79.0 / 15.0, abs=1e-15)
    assert value == pytest.approx(0.7127658250461602, abs=1e-15)


def test_linear_path_endpoints_and_constant_rate():
    c = EndpointConstraint(SimplexVector((0.6, 0.4, 0.0, 0.0), 2),
                           SimplexVector((0.25, 0.3, 0.25, 0.2), 2), 1.5)
    path = LinearPath(c)
    assert path.gamma(0.0).entries == pytest.approx(c.alpha.entries)
    assert path.gamma(1.5).entries == pytest.approx(c.omega.entries)
    assert path.theta(0.1).entries == path.theta(1.4).entries
    assert sum(path.theta(0.5).entries) == pytest.approx(1.0, abs=1e-12)
    assert validity_check(path.sample(301)).ok


def test_linear_path_rejects_infeasible():
    a = SimplexVector((0.2, 0.8, 0.0), 1)
    w = SimplexVector((0.5, 0.3, 0.2), 1)
    with pytest.raises(InfeasibleInput, match="monotonicity"):
        LinearPath(EndpointConstraint(a, w, 1.0))
    w2 = SimplexVector((0.0, 0.2, 0.8), 1)
    with pytest.raises(InfeasibleInput, match="conservation"):
        LinearPath(EndpointConstraint(empty(1), w2, 0.4))


def test_linear_path_cost_dominates_rate():
    # any valid path costs at least the terminal rate; the straight
    # line is not the minimizer here so the gap is strict
    w = SimplexVector((0.15, 0.85), 0)
    c = EndpointConstraint(empty(0), w, 3.0)
    rate = terminal_rate_general(c)
    cost = path_cost(LinearPath(c), points=2001)
    assert cost > rate + 1e-3


def test_rate_to_velocity_balance():
    # throws at the top tracked level feed the overflow slot
    theta = (0.5, 0.3, 0.2)
    vel = rate_to_velocity(theta)
    assert vel == pytest.approx((-0.5, 0.2, 0.3))
    assert sum(vel) == pytest.approx(0.0, abs=1e-15)


def test_validity_check_flags_each_condition():
    ok = ((0.0, 1.0), [(1.0, 1.0), (0.5, 0.8)])
    assert validity_check(ok).ok
    # cumulative rows must be nondecreasing in the level
    bad_order = ((0.0, 1.0), [(1.0, 0.9), (0.5, 0.8)])
    report = validity_check(bad_order)
    assert not report.ok and report.condition == "ordering"
    # cumulative occupancies cannot rise over time
    bad_mono = ((0.0, 1.0), [(0.5, 0.8), (0.6, 0.8)])
    assert validity_check(bad_mono).condition == "monotonicity"
    # and cannot fall faster than one ball per urn per unit time
    bad_cons = ((0.0, 0.5), [(1.0, 1.0), (0.2, 0.9)])
    report = validity_check(bad_cons)
    assert report.condition == "conservation"
    assert "conservation" in report.describe()


def sample_psi(path, n_points):
    times = [path.beta * i / (n_points - 1) for i in range(n_points)]
    return tuple(times), [path.gamma(t).psi() for t in times]


def test_piecewise_path_hits_waypoints():
    a = empty(1)
    mid = SimplexVector((0.6, 0.3, 0.1), 1)
    end = SimplexVector((0.3, 0.3, 0.4), 1)
    path = PiecewisePath((0.0, 0.8, 2.0), (a, mid, end))
    assert path.gamma(0.8).entries == pytest.approx(mid.entries)
    assert path.gamma(2.0).entries == pytest.approx(end.entries)
    assert validity_check(sample_psi(path, 201)).ok


def test_combo_path_cost_convexity():
    # pointwise mixtures of valid paths are valid, and the cost is
    # convex under the mixing
    w = SimplexVector((0.15, 0.85), 0)
    c = EndpointConstraint(empty(0), w, 3.0)
    straight = LinearPath(c)
    bent = build_empty_extremal(w, 3.0)
    lam = 0.3
    combo = ComboPath((straight, bent), (lam, 1.0 - lam))
    assert validity_check(sample_psi(combo, 301)).ok
    mixed = path_cost(combo, points=1201)
    upper = (lam * path_cost(straight, points=1201)
             + (1.0 - lam) * path_cost(bent, points=1201))
    assert mixed <= upper + 1e-9
    assert mixed >= closed_form_cost(bent) - 1e-9


def test_combo_path_rejects_mismatched():
    w = SimplexVector((0.15, 0.85), 0)
    c = EndpointConstraint(empty(0), w, 3.0)
    with pytest.raises(DomainError):
        ComboPath((LinearPath(c),), (0.5,))
    short = EndpointConstraint(empty(0), w, 1.0)
    with pytest.raises(DomainError):
        ComboPath((LinearPath(c), LinearPath(short)), (0.5, 0.5))


def test_linear_path_validity_random(feasible_factory):
    # straight-line interpolants of feasible constraints are always
    # valid paths, whatever the draw
    rng = random.Random(99)
    from conftest import draw_feasible
    for _ in range(25):
        c = draw_feasible(rng)
        path = LinearPath(c)
        assert validity_check(path.sample(101)).ok
