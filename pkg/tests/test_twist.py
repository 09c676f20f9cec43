"""Tilted-distribution solvers: tilt equations, scales, rate values."""

import math
import random

import pytest

from urnrates import (CountDistribution, EndpointConstraint, InfeasibleInput,
                      SimplexVector, TwistCase, compute_C_empty,
                      minimizer_empty, minimizer_general, poisson_tail_mass,
                      poisson_tail_mean, relative_entropy, solve_empty_twist,
                      solve_general, solve_rho_empty, terminal_rate_empty,
                      terminal_rate_general)
from conftest import draw_feasible

# reference constants computed at 50-digit precision
RHO_15_3 = 1.1377213911576848104
J_15_3 = 0.091651542177681840745
RHO_08_3 = 1.0387842186059925146
J_08_3 = 0.010043363291513374233
J_SPLIT = 0.7827668758354633


def empty(cap):
    return SimplexVector((1.0,) + (0.0,) * (cap + 1), cap)


def test_rho_reference_values():
    w15 = SimplexVector((0.15, 0.85), 0)
    w08 = SimplexVector((0.08, 0.92), 0)
    assert solve_rho_empty(w15, 3.0) == pytest.approx(RHO_15_3, abs=1e-13)
    assert solve_rho_empty(w08, 3.0) == pytest.approx(RHO_08_3, abs=1e-13)


def test_rho_satisfies_its_equation():
    # at capacity 0 the tilt equation reduces to
    # rho (1 - w_0) = 1 - exp(-beta rho)
    w = SimplexVector((0.15, 0.85), 0)
    rho = solve_rho_empty(w, 3.0)
    assert rho * 0.85 == pytest.approx(1.0 - math.exp(-3.0 * rho), abs=1e-14)


def test_rho_unique_by_sign_change():
    w = SimplexVector((0.15, 0.85), 0)
    rho = solve_rho_empty(w, 3.0)

    def f(r):
        return r * 0.85 - 1.0 + math.exp(-3.0 * r)

    assert f(rho - 1e-6) < 0 < f(rho + 1e-6)


def test_scale_equals_inverse_tilt_at_capacity_zero():
    # ball conservation forces C = 1/rho when only level 0 is pinned
    w = SimplexVector((0.15, 0.85), 0)
    rho = solve_rho_empty(w, 3.0)
    assert compute_C_empty(w, 3.0, rho) == pytest.approx(1.0 / rho,
                                                         rel=1e-12)


def test_scale_two_defining_forms():
    w = SimplexVector((0.1, 0.2, 0.3, 0.4), 2)
    beta = 2.5
    rho = solve_rho_empty(w, beta)
    C = compute_C_empty(w, beta, rho)
    rate = rho * beta
    mass_form = (1.0 - 0.6) / poisson_tail_mass(2, rate)
    mean_form = (beta - 0.8) / poisson_tail_mean(2, rate)
    assert C == pytest.approx(mass_form, rel=1e-12)
    assert C == pytest.approx(mean_form, rel=1e-9)


def test_empty_twist_cases():
    exp_twist = solve_empty_twist(SimplexVector((0.15, 0.85), 0), 3.0)
    assert exp_twist.case is TwistCase.Exponential
    assert exp_twist.rho == pytest.approx(RHO_15_3, abs=1e-13)
    poly = solve_empty_twist(SimplexVector((0.15, 0.85), 0), 0.85)
    assert poly.case is TwistCase.Polynomial
    assert poly.C == 0.0
    with pytest.raises(InfeasibleInput):
        solve_empty_twist(SimplexVector((0.15, 0.85), 0), 0.5)


def test_rate_reference_values():
    assert terminal_rate_empty(SimplexVector((0.15, 0.85), 0), 3.0) \
        == pytest.approx(J_15_3, abs=1e-14)
    assert terminal_rate_empty(SimplexVector((0.08, 0.92), 0), 3.0) \
        == pytest.approx(J_08_3, abs=1e-14)


def test_rate_zero_at_the_typical_point():
    # pinning the head at its unconstrained Poisson values costs nothing
    beta = 2.0
    w = SimplexVector((math.exp(-beta), beta * math.exp(-beta),
                       1.0 - (1.0 + beta) * math.exp(-beta)), 1)
    assert terminal_rate_empty(w, beta) == pytest.approx(0.0, abs=1e-12)


def test_rate_infeasible_and_infinite_cases_return_inf():
    assert terminal_rate_empty(SimplexVector((0.5, 0.5), 0), 0.3) == math.inf
    assert terminal_rate_empty(SimplexVector((0.5, 0.5, 0.0), 1), 1.0) \
        == math.inf


def test_minimizer_matches_rate_and_constraints():
    w = SimplexVector((0.1, 0.2, 0.3, 0.4), 2)
    beta = 2.5
    d = minimizer_empty(w, beta)
    assert d.pmf(0) == pytest.approx(0.1, abs=1e-12)
    assert d.pmf(1) == pytest.approx(0.2, abs=1e-12)
    assert d.pmf(2) == pytest.approx(0.3, abs=1e-12)
    assert d.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert d.mean() == pytest.approx(beta, abs=1e-11)
    via_entropy = relative_entropy(d, CountDistribution.poisson(beta))
    assert via_entropy == pytest.approx(terminal_rate_empty(w, beta),
                                        abs=1e-11)


def test_polynomial_minimizer_has_bounded_support():
    w = SimplexVector((0.15, 0.85), 0)
    d = minimizer_empty(w, 0.85)
    assert d.tail_scale == 0.0
    assert d.mean() == pytest.approx(0.85, abs=1e-12)


def test_general_solver_agrees_with_empty_solver():
    w = SimplexVector((0.1, 0.2, 0.3, 0.4), 2)
    beta = 2.5
    c = EndpointConstraint(empty(2), w, beta)
    assert terminal_rate_general(c) == pytest.approx(
        terminal_rate_empty(w, beta), abs=1e-11)
    twist = solve_general(c)
    assert twist.rho == pytest.approx(solve_rho_empty(w, beta), abs=1e-9)


def test_general_minimizer_constraints_random():
    rng = random.Random(5150)
    for _ in range(12):
        c = draw_feasible(rng)
        dists = minimizer_general(c)
        cap = c.capacity_index
        for i in range(cap + 1):
            got = sum(c.alpha.head[k] * dists[k].pmf(i - k)
                      for k in dists if k <= i)
            assert got == pytest.approx(c.omega.entries[i], abs=1e-9)
        mean = sum(c.alpha.head[k] * dists[k].mean() for k in dists)
        assert mean == pytest.approx(c.beta, abs=1e-9)
        via_entropy = sum(
            c.alpha.head[k] * relative_entropy(
                dists[k], CountDistribution.poisson(c.beta))
            for k in dists)
        assert via_entropy == pytest.approx(terminal_rate_general(c),
                                            abs=1e-9)


def test_reducible_rate_reference_value():
    a = SimplexVector((0.5, 0.5, 0.0), 1)
    w = SimplexVector((0.5, 0.0, 0.5), 1)
    value = terminal_rate_general(EndpointConstraint(a, w, 1.0))
    assert value == pytest.approx(J_SPLIT, abs=1e-12)


def test_rate_convex_in_the_target():
    rng = random.Random(31)
    beta, cap = 2.0, 1
    for _ in range(10):
        def draw():
            v = [0.05 + rng.random() for _ in range(cap + 2)]
            v = [x / sum(x for x in v) for x in v]
            return SimplexVector(v, cap, tolerance=1e-9)

        w1, w2 = draw(), draw()
        need = max(w.head_mean() + (cap + 1) * w.overflow for w in (w1, w2))
        if need > beta:
            continue
        lam = rng.random()
        mix = SimplexVector(
            tuple(lam * a + (1 - lam) * b
                  for a, b in zip(w1.entries, w2.entries)), cap,
            tolerance=1e-9)
        j_mix = terminal_rate_empty(mix, beta)
        j_split = (lam * terminal_rate_empty(w1, beta)
                   + (1 - lam) * terminal_rate_empty(w2, beta))
        assert j_mix <= j_split + 1e-10


def test_infinite_rate_minimizer_rejected():
    c = EndpointConstraint(empty(1), SimplexVector((0.5, 0.5, 0.0), 1), 1.0)
    with pytest.raises(InfeasibleInput):
        minimizer_general(c)
