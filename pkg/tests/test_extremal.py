"""Minimizing-path construction and its variational certificates."""

import dataclasses
import math
import random

import numpy as np
import pytest

from urnrates import (DomainError, EndpointConstraint, LinearPath,
                      SimplexVector, build_empty_extremal,
                      build_general_extremal, closed_form_cost,
                      complete_monotone_check, el_residual, path_cost,
                      poisson_pmf, rate_to_velocity, solve_rho_empty,
                      terminal_rate_empty, terminal_rate_general,
                      validity_check)
from conftest import draw_feasible

RHO_15_3 = 1.1377213911576848104


def empty(cap):
    return SimplexVector((1.0,) + (0.0,) * (cap + 1), cap)


def poisson_head(beta, cap):
    head = [poisson_pmf(i, beta) for i in range(cap + 1)]
    return SimplexVector((*head, 1.0 - sum(head)), cap, tolerance=1e-12)


def test_unconstrained_target_gives_poisson_path():
    # pinning the head at its typical values must reproduce the
    # uncontrolled Poisson flow
    beta, cap = 2.0, 2
    path = build_empty_extremal(poisson_head(beta, cap), beta)
    assert path.twist.rho == pytest.approx(1.0, abs=1e-10)
    assert path.twist.C == pytest.approx(1.0, abs=1e-9)
    for x in (0.3, 1.0, 1.7):
        for i in range(cap + 1):
            assert path.gamma(x).entries[i] == pytest.approx(
                poisson_pmf(i, x), abs=1e-9)
    assert closed_form_cost(path) == pytest.approx(0.0, abs=1e-11)


def test_conditioned_empty_fraction_closed_form():
    # with only level 0 pinned, the conditioned empty-urn curve is
    # (1/rho) exp(-rho x) + 1 - 1/rho and the occupied levels follow
    # scaled Poisson masses
    beta = 3.0
    omega = SimplexVector((0.15, 0.85), 0)
    path = build_empty_extremal(omega, beta)
    rho = path.twist.rho
    assert rho == pytest.approx(RHO_15_3, abs=1e-12)
    for x in (0.2, 1.0, 2.4, 3.0):
        want0 = math.exp(-rho * x) / rho + 1.0 - 1.0 / rho
        assert path.gamma(x).entries[0] == pytest.approx(want0, abs=1e-12)
        for i in (1, 2, 5):
            assert path.level_value(i, x) == pytest.approx(
                poisson_pmf(i, rho * x) / rho, abs=1e-12)


def test_endpoints_and_validity(feasible_factory):
    rng = random.Random(404)
    for _ in range(8):
        c = draw_feasible(rng, empty_start=True)
        path = build_empty_extremal(c.omega, c.beta)
        assert path.gamma(0.0).entries[0] == pytest.approx(1.0, abs=1e-9)
        got = path.gamma(c.beta).entries
        for g, w in zip(got, c.omega.entries):
            assert g == pytest.approx(w, abs=1e-8)
        assert validity_check(path.sample(201)).ok


def test_state_velocity_matches_rate_field():
    # d/dx gamma must equal the fixed linear image of theta all along
    # the path (the dynamics constraint)
    omega = SimplexVector((0.1, 0.2, 0.3, 0.4), 2)
    path = build_empty_extremal(omega, 2.5)
    h = 1e-6
    for x in (0.3, 1.1, 2.0):
        fd = [(a - b) / (2 * h) for a, b in
              zip(path.gamma(x + h).entries, path.gamma(x - h).entries)]
        vel = rate_to_velocity(path.theta(x))
        for f, v in zip(fd, vel):
            assert f == pytest.approx(v, abs=5e-7)


def test_overflow_throw_share_is_tilted():
    # throws into the overflow bucket run at rho times its mass: the
    # tail of the tilted distribution is exactly Poisson-shaped
    omega = SimplexVector((0.1, 0.2, 0.3, 0.4), 2)
    path = build_empty_extremal(omega, 2.5)
    rho = path.twist.rho
    for x in np.linspace(0.05, 2.45, 50):
        gam_over = path.gamma(float(x)).overflow
        tht_over = path.theta(float(x)).overflow
        assert tht_over / gam_over == pytest.approx(rho, rel=1e-8)


def test_deep_tail_level_values():
    omega = SimplexVector((0.1, 0.2, 0.3, 0.4), 2)
    path = build_empty_extremal(omega, 2.5)
    rho, C = path.twist.rho, path.twist.C
    for i in (7, 12):
        assert path.level_value(i, 1.3) == pytest.approx(
            C * poisson_pmf(i, rho * 1.3), rel=1e-10)


def test_polynomial_case_touches_zero_tail():
    # tight ball budget: the path ends with every overflow urn at
    # exactly capacity + 1 balls and the tail scale vanishes
    omega = SimplexVector((0.15, 0.85), 0)
    path = build_empty_extremal(omega, 0.85)
    assert path.twist.C == 0.0
    assert path.gamma(0.85).entries[0] == pytest.approx(0.15, abs=1e-10)
    assert path.level_value(5, 0.85) == 0.0
    assert closed_form_cost(path) == pytest.approx(
        terminal_rate_empty(omega, 0.85), abs=1e-10)


def test_cost_triangle_single_instance():
    omega = SimplexVector((0.15, 0.85), 0)
    path = build_empty_extremal(omega, 3.0)
    closed = closed_form_cost(path)
    assert closed == pytest.approx(terminal_rate_empty(omega, 3.0),
                                   abs=1e-10)
    assert closed == pytest.approx(path_cost(path, points=2001), abs=1e-8)


def test_variational_residual_small_on_extremal():
    omega = SimplexVector((0.1, 0.2, 0.3, 0.4), 2)
    path = build_empty_extremal(omega, 2.5)
    xs = np.linspace(0.05, 2.45, 30)
    assert float(np.max(el_residual(path, xs))) < 1e-7


def test_variational_residual_large_on_straight_line():
    c = EndpointConstraint(empty(0), SimplexVector((0.15, 0.85), 0), 3.0)
    xs = np.linspace(0.2, 2.8, 30)
    assert float(np.max(el_residual(LinearPath(c), xs))) > 1e-2


def test_complete_monotonicity_certificate():
    omega = SimplexVector((0.1, 0.2, 0.3, 0.4), 2)
    path = build_empty_extremal(omega, 2.5)
    grid = np.linspace(0.0, 2.5, 101)
    assert complete_monotone_check(path, grid)
    # flipping the sign of the top polynomial coefficient breaks the
    # certificate without touching anything else
    broken = dataclasses.replace(
        path, poly_coeffs=path.poly_coeffs[:-1]
        + (-path.poly_coeffs[-1],))
    assert not complete_monotone_check(broken, grid)


def test_general_start_endpoints_and_residual():
    c = EndpointConstraint(SimplexVector((0.6, 0.4, 0.0, 0.0), 2),
                           SimplexVector((0.25, 0.3, 0.25, 0.2), 2), 1.5)
    path = build_general_extremal(c)
    assert path.gamma(0.0).entries == pytest.approx(c.alpha.entries,
                                                    abs=1e-9)
    assert path.gamma(1.5).entries == pytest.approx(c.omega.entries,
                                                    abs=1e-8)
    xs = np.linspace(0.1, 1.4, 20)
    assert float(np.max(el_residual(path, xs))) < 1e-7
    assert closed_form_cost(path) == pytest.approx(
        terminal_rate_general(c), abs=1e-9)


def test_general_extremal_rejects_reducible_and_trivial():
    a = SimplexVector((0.5, 0.5, 0.0), 1)
    w = SimplexVector((0.5, 0.0, 0.5), 1)
    with pytest.raises(DomainError, match="decompose"):
        build_general_extremal(EndpointConstraint(a, w, 1.0))
    t = SimplexVector((0.7, 0.3, 0.0), 1)
    with pytest.raises(DomainError):
        build_general_extremal(EndpointConstraint(t, t, 0.0))


def test_cost_dominates_any_perturbation():
    # mixing the extremal with the straight line can only cost more
    omega = SimplexVector((0.1, 0.2, 0.3, 0.4), 2)
    beta = 2.5
    path = build_empty_extremal(omega, beta)
    best = closed_form_cost(path)
    c = EndpointConstraint(empty(2), omega, beta)
    straight = LinearPath(c)
    from urnrates import ComboPath
    for lam in (0.05, 0.2, 0.5):
        mixed = ComboPath((straight, path), (lam, 1.0 - lam))
        assert path_cost(mixed, points=801) >= best - 1e-9
