"""Reachability classification and irreducible decomposition."""

import math
import random

import pytest

from urnrates import (EndpointConstraint, Feasibility, InfeasibleInput,
                      SimplexVector, feasibility_check,
                      feasibility_violation, irreducible_decompose,
                      recombine_rates, terminal_rate_general)
from conftest import draw_feasible


def empty(cap):
    return SimplexVector((1.0,) + (0.0,) * (cap + 1), cap)


def test_violation_names_monotonicity():
    a = SimplexVector((0.2, 0.8, 0.0), 1)
    w = SimplexVector((0.5, 0.3, 0.2), 1)
    msg = feasibility_violation(EndpointConstraint(a, w, 1.0))
    assert msg is not None and msg.startswith("monotonicity")


def test_violation_names_conservation():
    w = SimplexVector((0.5, 0.4, 0.1), 1)
    msg = feasibility_violation(EndpointConstraint(empty(1), w, 0.2))
    assert msg is not None and msg.startswith("conservation")


def test_violation_none_when_reachable():
    w = SimplexVector((0.15, 0.85), 0)
    assert feasibility_violation(EndpointConstraint(empty(0), w, 3.0)) is None


def test_verdicts_three_budgets_one_target():
    # same target, budget strictly above / exactly at / below the
    # minimum ball content
    w = SimplexVector((0.15, 0.85), 0)
    c = lambda b: EndpointConstraint(empty(0), w, b)
    assert feasibility_check(c(3.0)) is Feasibility.FeasibleExponential
    assert feasibility_check(c(0.85)) is Feasibility.FeasiblePolynomial
    assert feasibility_check(c(0.5)) is Feasibility.Infeasible


def test_verdict_infinite_rate():
    # slack budget but nowhere to put the surplus balls
    w = SimplexVector((0.5, 0.5, 0.0), 1)
    c = EndpointConstraint(empty(1), w, 1.0)
    assert feasibility_check(c) is Feasibility.FeasibleInfiniteRate
    assert terminal_rate_general(c) == math.inf


def test_trivial_constraint_is_polynomial():
    a = SimplexVector((0.7, 0.3, 0.0), 1)
    assert feasibility_check(EndpointConstraint(a, a, 0.0)) \
        is Feasibility.FeasiblePolynomial


def test_decompose_requires_feasible():
    w = SimplexVector((0.5, 0.4, 0.1), 1)
    with pytest.raises(InfeasibleInput, match="conservation"):
        irreducible_decompose(EndpointConstraint(empty(1), w, 0.2))


def test_decompose_irreducible_passthrough():
    c = EndpointConstraint(empty(1), SimplexVector((0.2, 0.5, 0.3), 1), 2.0)
    pieces = irreducible_decompose(c)
    assert len(pieces) == 1
    assert pieces[0].urn_mass == pytest.approx(1.0)
    assert pieces[0].constraint.beta == pytest.approx(2.0)


def test_decompose_two_bands():
    # cumulative start and target agree at level 0, so the empty urns
    # and the loaded urns never mix
    a = SimplexVector((0.5, 0.5, 0.0), 1)
    w = SimplexVector((0.5, 0.0, 0.5), 1)
    pieces = irreducible_decompose(EndpointConstraint(a, w, 1.0))
    assert len(pieces) == 2
    masses = [p.urn_mass for p in pieces]
    assert masses == pytest.approx([0.5, 0.5])
    # bottom band: urns stuck at relative level 0, zero budget
    assert pieces[0].constraint.is_trivial()
    assert pieces[0].level_offset == 0
    # top band: relative empty start, everything into the overflow slot
    top = pieces[1].constraint
    assert pieces[1].level_offset == 1
    assert top.alpha.entries == (1.0, 0.0)
    assert top.omega.entries[-1] == pytest.approx(1.0)
    assert top.beta == pytest.approx(2.0)


def test_decompose_bookkeeping_random(feasible_factory):
    rng = random.Random(77)
    for _ in range(20):
        c = draw_feasible(rng)
        pieces = irreducible_decompose(c)
        mass = sum(p.urn_mass for p in pieces)
        assert mass == pytest.approx(1.0, abs=1e-12)
        budget = sum(p.urn_mass * p.constraint.beta for p in pieces)
        assert budget == pytest.approx(c.beta, abs=1e-9)
        # re-offsetting the piece vectors reproduces the inputs
        alpha_back = [0.0] * (c.capacity_index + 2)
        for p in pieces:
            for lvl, v in enumerate(p.constraint.alpha.head):
                alpha_back[p.level_offset + lvl] += p.urn_mass * v
            alpha_back[-1] += p.urn_mass * p.constraint.alpha.overflow
        for got, want in zip(alpha_back, c.alpha.entries):
            assert got == pytest.approx(want, abs=1e-12)


def test_recombine_rates_identity_on_split_instance():
    a = SimplexVector((0.5, 0.5, 0.0), 1)
    w = SimplexVector((0.5, 0.0, 0.5), 1)
    c = EndpointConstraint(a, w, 1.0)
    pieces = irreducible_decompose(c)
    rates = [terminal_rate_general(p.constraint) for p in pieces]
    combined = recombine_rates(pieces, rates, c.beta)
    assert combined == pytest.approx(terminal_rate_general(c), abs=1e-12)
    # the frozen value for this instance
    assert combined == pytest.approx(0.7827668758354633, abs=1e-12)
