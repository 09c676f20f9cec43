"""Poisson mass helpers and the relative-entropy functional."""

import math
import random

import pytest

from urnrates import (CountDistribution, DomainError, SimplexVector,
                      poisson_head_mass, poisson_log_pmf, poisson_pmf,
                      poisson_tail_mass, poisson_tail_mean,
                      relative_entropy)


@pytest.mark.parametrize("rate", [0.3, 1.0, 2.7, 9.5])
def test_pmf_matches_direct_formula(rate):
    for i in range(0, 25, 3):
        direct = math.exp(-rate) * rate ** i / math.factorial(i)
        assert poisson_pmf(i, rate) == pytest.approx(direct, rel=1e-13)
        assert poisson_log_pmf(i, rate) == pytest.approx(
            math.log(direct), rel=1e-13)


def test_pmf_extreme_arguments_stay_finite():
    # far tail: the plain formula overflows long before i = 400
    assert poisson_log_pmf(400, 2.0) < -1000
    assert poisson_pmf(400, 2.0) == pytest.approx(
        math.exp(poisson_log_pmf(400, 2.0)))
    assert poisson_pmf(0, 0.0) == 1.0
    assert poisson_pmf(3, 0.0) == 0.0


@pytest.mark.parametrize("rate", [0.5, 2.0, 4.0])
def test_head_tail_masses_are_complementary(rate):
    for n in (0, 1, 5, 17):
        head = poisson_head_mass(n, rate)
        tail = poisson_tail_mass(n, rate)
        assert head + tail == pytest.approx(1.0, abs=1e-13)
        assert head == pytest.approx(
            sum(poisson_pmf(i, rate) for i in range(n + 1)), rel=1e-12)


@pytest.mark.parametrize("rate", [0.5, 2.0, 4.0])
def test_tail_mean_recursion(rate):
    # sum_{i>n} i P_i(rate) = rate * P(Y >= n), Y ~ Poisson(rate)
    for n in (0, 2, 6):
        lhs = poisson_tail_mean(n, rate)
        rhs = rate * poisson_tail_mass(n - 1, rate)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_relative_entropy_basics():
    p = (0.2, 0.3, 0.5)
    q = (0.5, 0.25, 0.25)
    value = relative_entropy(p, q)
    direct = sum(a * math.log(a / b) for a, b in zip(p, q))
    assert value == pytest.approx(direct, rel=1e-14)
    assert relative_entropy(p, p) == 0.0
    assert relative_entropy(SimplexVector(p, 1), SimplexVector(q, 1)) \
        == pytest.approx(direct, rel=1e-14)


def test_relative_entropy_zero_handling():
    # 0 log 0 = 0 on the left; a zero under positive mass is +inf
    assert relative_entropy((0.0, 1.0), (0.5, 0.5)) == math.log(2.0)
    assert relative_entropy((0.5, 0.5), (0.0, 1.0)) == math.inf


def test_relative_entropy_nonnegative_random():
    rng = random.Random(20)
    for _ in range(200):
        k = rng.randint(2, 6)
        p = [rng.random() for _ in range(k)]
        q = [rng.random() for _ in range(k)]
        p = [x / sum(p) for x in p]
        q = [x / sum(q) for x in q]
        assert relative_entropy(p, q) >= -1e-14


def test_relative_entropy_joint_convexity():
    rng = random.Random(21)
    for _ in range(100):
        k = rng.randint(2, 5)

        def draw():
            v = [0.05 + rng.random() for _ in range(k)]
            return [x / sum(v) for x in v]

        p1, p2, q1, q2 = draw(), draw(), draw(), draw()
        lam = rng.random()
        mix_p = [lam * a + (1 - lam) * b for a, b in zip(p1, p2)]
        mix_q = [lam * a + (1 - lam) * b for a, b in zip(q1, q2)]
        mixed = relative_entropy(mix_p, mix_q)
        upper = (lam * relative_entropy(p1, q1)
                 + (1 - lam) * relative_entropy(p2, q2))
        assert mixed <= upper + 1e-12


def test_relative_entropy_between_poissons_closed_form():
    for a, b in [(1.0, 2.0), (3.5, 0.7), (2.0, 2.0)]:
        value = relative_entropy(CountDistribution.poisson(a),
                                 CountDistribution.poisson(b))
        closed = a * math.log(a / b) + b - a
        assert value == pytest.approx(closed, abs=1e-12)


def test_relative_entropy_count_vs_vector_mix_rejected():
    with pytest.raises(DomainError):
        relative_entropy(CountDistribution.poisson(1.0), (0.5, 0.5))
