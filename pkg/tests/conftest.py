import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def enumerate_trajectories(mdp, policy):
    """Yield ``(probability, [(s_0, a_0), ..., (s_H, a_H)])`` for every trajectory."""
    S, A, H = mdp.num_states, mdp.num_actions, mdp.horizon
    dense = [mdp.dense_transitions(t) for t in range(H)]
    for states in itertools.product(range(S), repeat=H + 1):
        for actions in itertools.product(range(A), repeat=H + 1):
            p = mdp.initial_dist[states[0]]
            for t in range(H + 1):
                p *= policy[t, states[t], actions[t]]
                if t < H:
                    p *= dense[t][states[t], actions[t], states[t + 1]]
                if p == 0:
                    break
            if p > 0:
                yield p, list(zip(states, actions))


def brute_force_value(mdp, policy, gamma=1.0):
    total = 0.0
    for p, path in enumerate_trajectories(mdp, policy):
        total += p * sum(gamma ** t * mdp.rewards[s] for t, (s, _) in enumerate(path))
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def _simplex_objective(k, b, p):
    """``sum K log p + sum p B`` on rows of ``p``; ``-inf`` where a counted action has zero mass."""
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(k > 0, k * np.log(p), 0.0)
    return logs.sum(axis=-1) + p @ b


def simplex_grid_max(k, b, steps=10_000):
    """Exact maximum of the per-state objective over the simplex grid with spacing ``1/steps``.

    Handles up to three actions. For three actions the objective is concave along
    each grid line ``p_1 = i / steps``, so the line maximum is found by binary
    search on the sign of successive differences.
    """
    k = np.asarray(k, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(k)
    if n == 1:
        return float(_simplex_objective(k, b, np.ones((1, 1)))[0])
    if n == 2:
        x = np.arange(steps + 1) / steps
        return float(_simplex_objective(k, b, np.stack([x, 1 - x], axis=1)).max())
    if n != 3:
        raise ValueError("grid oracle supports at most three actions")
    i = np.arange(steps + 1)
    width = steps - i

    def f(j):
        p1 = i / steps
        p2 = j / steps
        p = np.stack([p1, p2, np.maximum(1.0 - p1 - p2, 0.0)], axis=1)
        p[:, 2] = np.where(j == width, 0.0, p[:, 2])
        return _simplex_objective(k, b, p)

    lo = np.zeros_like(i)
    hi = width.copy()
    while (lo < hi).any():
        mid = (lo + hi) // 2
        active = lo < hi
        rising = f(np.minimum(mid + 1, width)) > f(mid)
        lo = np.where(active & rising, mid + 1, lo)
        hi = np.where(active & ~rising, mid, hi)
    return float(np.max(f(lo)))


def simplex_objective(k, b, p):
    return float(_simplex_objective(np.asarray(k, float), np.asarray(b, float),
                                    np.asarray(p, float)[None])[0])


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion (printed in the summary)."""

    def record(key, passed, detail):
        tag = "INFO" if passed is None else ("PASS" if passed else "FAIL")
        ACCEPTANCE_LINES[key] = f"[{tag}] {key}: {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k[1:].split()[0].rstrip("abcdef")), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
