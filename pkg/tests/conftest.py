"""Shared random-instance generation for the test suite."""

import random

import pytest

from urnrates import EndpointConstraint, SimplexVector

# acceptance tests append one line per criterion; the terminal-summary
# hook replays them after the run, outside pytest's output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _stick_break(rng, k):
    cuts = sorted(rng.random() for _ in range(k - 1))
    out, prev = [], 0.0
    for c in cuts + [1.0]:
        out.append(c - prev)
        prev = c
    return out


def draw_feasible(rng, *, kind="exponential", empty_start=None,
                  max_cap=5, max_beta=4.0):
    """One random feasible, irreducible endpoint constraint.

    kind "exponential": slack ball budget and an overflow-absorbing
    target. kind "polynomial": budget exactly exhausted by the
    target. empty_start True/False/None (None = coin flip).
    Rejection sampling keeps a 0.02 cumulative margin below the top
    level so instances stay away from the reducibility boundary.
    """
    for _ in range(100000):
        empty = rng.random() < 0.5 if empty_start is None else empty_start
        cap = rng.randint(0 if empty else 1, max_cap)
        slots = cap + 2
        if empty:
            alpha = SimplexVector((1.0,) + (0.0,) * (slots - 1), cap)
        else:
            top = rng.randint(1, cap)
            head = [0.0] * (cap + 1)
            for lvl, v in enumerate(_stick_break(rng, top + 1)):
                head[lvl] = v
            if head[0] < 0.2:
                head[0] += 0.2
                total = sum(head)
                head = [h / total for h in head]
            alpha = SimplexVector((*head, 0.0), cap)

        omega_raw = _stick_break(rng, slots)
        if kind == "exponential":
            if omega_raw[-1] < 0.03:
                continue
        elif rng.random() < 0.5:
            # polynomial targets with an empty overflow bucket
            omega_raw[-2] += omega_raw[-1]
            omega_raw[-1] = 0.0
        omega = SimplexVector(omega_raw, cap, tolerance=1e-9)

        psi_a, psi_w = alpha.psi(), omega.psi()
        if any(pw > pa - 0.02 for pa, pw in zip(psi_a[:cap], psi_w[:cap])):
            continue
        if psi_w and psi_w[-1] > psi_a[-1]:
            continue

        need = omega.head_mean() + (cap + 1) * omega.overflow
        content = alpha.head_mean()
        if kind == "polynomial":
            beta = need - content
            if not 0.05 <= beta <= max_beta:
                continue
        else:
            beta = need - content + 0.1 + 1.1 * rng.random()
            if not 0.05 <= beta <= max_beta:
                continue
        return EndpointConstraint(alpha, omega, beta)
    raise RuntimeError("rejection sampling exhausted")


@pytest.fixture
def feasible_factory():
    def make(seed, **kw):
        return draw_feasible(random.Random(seed), **kw)
    return make
