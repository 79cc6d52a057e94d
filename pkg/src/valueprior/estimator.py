"""MAP policy estimation under the value-based prior ``P(pi) = exp(alpha * V(pi))``.

The penalized likelihood ``L(pi) = sum K log pi + alpha * V(pi)`` is maximized
by cycling over the time slices ``pi^0 .. pi^H``. Holding every other slice
fixed, ``L`` is concave and separable over states in ``pi^tau``; each state's
subproblem is solved in closed form up to a one-dimensional bisection.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from valueprior import kernels
from valueprior.mdp import _as_policy, occupancy_probabilities, policy_value

log = logging.getLogger(__name__)

INIT_MODES = ("uniform", "seeded-random", "smoothed-mle")
SUPPORT_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class CountTensor:
    """``counts[t, s, a]``: how often action ``a`` was taken in state ``s`` at time ``t``."""

    counts: np.ndarray
    num_trajectories: int

    @property
    def horizon(self):
        return self.counts.shape[0] - 1


@dataclass(frozen=True)
class EstimatorConfig:
    alpha: float = 0.0
    gamma: float = 1.0
    objective_tol: float = 1e-8
    max_cycles: int = 200
    bisection_tol: float = 1e-10
    init_mode: str = "seeded-random"
    seed: int = 0
    # spread mass evenly over exactly tied best actions instead of the lowest index
    split_ties: bool = True

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not (self.objective_tol > 0 and self.bisection_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be positive")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")


@dataclass
class SolverScratch:
    """Multipliers and coefficients of one time-slice solve.

    ``lambda_v`` covers ``t <= tau``; ``b_coeff``, ``lambda_pi_*`` and the count
    masks refer to slice ``tau``. ``cases`` records which closed-form branch each
    state took (0: no counts, 1: interior root, 2: topped-up zero-count action).
    """

    tau: int
    lambda_v: np.ndarray
    b_coeff: np.ndarray
    lambda_pi_state: np.ndarray
    lambda_pi_action: np.ndarray
    positive_count: np.ndarray
    cases: np.ndarray
    roots: np.ndarray
    values: np.ndarray = None

    @property
    def zero_count(self):
        return ~self.positive_count


@dataclass
class EstimationResult:
    policy: np.ndarray
    objective_trace: np.ndarray
    cycles_run: int
    converged: bool
    max_kkt_residual: float
    inner_solves: int = 0
    kkt: dict = field(default_factory=dict)

    @property
    def objective(self):
        return float(self.objective_trace[-1]) if len(self.objective_trace) else float("nan")


def count_tensor(dataset, num_states, num_actions, horizon):
    """Tally ``K[t, s, a]`` from trajectories shaped ``[m, H + 1, 2]``."""
    data = np.asarray(dataset)
    if data.size == 0:
        data = data.reshape(0, horizon + 1, 2)
    if data.dtype.kind not in "iu":
        if not np.array_equal(data, np.round(data)):
            raise ValueError("trajectory ids must be integers")
        data = data.astype(np.int64)
    if data.ndim != 3 or data.shape[1:] != (horizon + 1, 2):
        raise ValueError(f"trajectories must have shape [m, {horizon + 1}, 2]; got {data.shape}")
    states, actions = data[:, :, 0], data[:, :, 1]
    bad = (states < 0) | (states >= num_states) | (actions < 0) | (actions >= num_actions)
    if bad.any():
        i, t = np.argwhere(bad)[0]
        raise ValueError(
            f"trajectory {i} has out-of-range pair {tuple(data[i, t])} at t={t}"
        )
    counts = np.zeros((horizon + 1, num_states, num_actions), dtype=np.int64)
    times = np.broadcast_to(np.arange(horizon + 1), states.shape)
    np.add.at(counts, (times, states, actions), 1)
    return CountTensor(counts, data.shape[0])


def _as_counts(counts, mdp):
    if isinstance(counts, CountTensor):
        tensor = counts
    else:
        arr = np.asarray(counts)
        tensor = CountTensor(arr, int(arr[0].sum()) if arr.size else 0)
    expected = (mdp.horizon + 1, mdp.num_states, mdp.num_actions)
    if tensor.counts.shape != expected:
        raise ValueError(f"count tensor shape {tensor.counts.shape} does not match MDP {expected}")
    return tensor


def log_likelihood(policy, counts):
    """``sum K log pi`` with ``0 log 0 = 0``; ``-inf`` when a counted action has zero mass."""
    k = np.asarray(counts.counts if isinstance(counts, CountTensor) else counts, dtype=float)
    pos = k > 0
    if not pos.any():
        return 0.0
    p = policy[pos]
    if (p <= 0).any():
        return -math.inf
    return float(np.dot(k[pos], np.log(p)))


def log_posterior(mdp, policy, counts, alpha, gamma=1.0):
    """The penalized likelihood ``sum K log pi + alpha * V(pi)``."""
    policy = _as_policy(mdp, policy)
    counts = _as_counts(counts, mdp)
    ll = log_likelihood(policy, counts)
    if alpha == 0:
        return ll
    value, _ = policy_value(mdp, policy, gamma)
    return ll + alpha * value


def forward_multipliers(mdp, policy, alpha, gamma, tau):
    """Bellman-constraint multipliers ``lambda_v[t, s]`` for ``t <= tau``.

    Equal to ``alpha * gamma**t`` times the occupancy of ``s`` at ``t``.
    """
    if not 0 <= tau <= mdp.horizon:
        raise ValueError(f"tau={tau} outside 0..{mdp.horizon}")
    policy = _as_policy(mdp, policy)
    lam = np.empty((tau + 1, mdp.num_states))
    lam[0] = alpha * mdp.initial_dist
    for t in range(1, tau + 1):
        nxt, prob = mdp.transition_arrays(t - 1)
        lam[t] = gamma * kernels.propagate(lam[t - 1], policy[t - 1], nxt, prob)
    return lam


def backward_values(mdp, policy, gamma, tau, values=None):
    """Recompute ``V^0 .. V^tau`` anchored at ``values[tau + 1]``.

    Without ``values`` the anchor is built from ``policy`` itself. Returns a full
    ``[H + 1, S]`` table (rows above ``tau`` copied from the anchor).
    """
    if not 0 <= tau <= mdp.horizon:
        raise ValueError(f"tau={tau} outside 0..{mdp.horizon}")
    policy = _as_policy(mdp, policy)
    if values is None:
        _, values = policy_value(mdp, policy, gamma)
        return values
    out = np.array(values, dtype=float, copy=True)
    out[mdp.horizon] = mdp.rewards
    for t in range(min(tau, mdp.horizon - 1), -1, -1):
        nxt, prob = mdp.transition_arrays(t)
        out[t] = kernels.backup(mdp.rewards, policy[t], out[t + 1], nxt, prob, gamma)
    return out


def state_simplex_solve(k_row, b_row, bisection_tol=1e-10, lambda_v=None, split_ties=True):
    """Maximize ``sum_a K_a log pi_a + sum_a pi_a B_a`` over the probability simplex.

    Returns ``(pi, lambda_state, lambda_action)``. ``lambda_v`` only matters for
    rows without counts: zero means the objective is constant and the row is
    uniform. It defaults to "nonzero unless every ``B_a`` is zero".
    """
    k = np.ascontiguousarray(k_row, dtype=float).reshape(1, -1)
    b = np.ascontiguousarray(b_row, dtype=float).reshape(1, -1)
    if k.shape != b.shape:
        raise ValueError("k_row and b_row must have the same length")
    if (k < 0).any():
        raise ValueError("counts must be non-negative")
    if lambda_v is None:
        lambda_v = 0.0 if not b.any() else 1.0
    pi, lam_s, lam_sa, _, _ = kernels.simplex_solve(
        k, b, np.array([float(lambda_v)]), bisection_tol, split_ties
    )
    return pi[0], float(lam_s[0]), lam_sa[0]


def mle_rows(k_slice):
    """Empirical frequencies per row, uniform where a row has no counts."""
    k = np.asarray(k_slice, dtype=float)
    totals = k.sum(axis=-1, keepdims=True)
    uniform = np.full_like(k, 1.0 / k.shape[-1])
    return np.where(totals > 0, k / np.where(totals > 0, totals, 1.0), uniform)


def _slice_solve(mdp, k_tau, lam_tau, values_next, gamma, tau, tol, split_ties):
    nxt, prob = mdp.transition_arrays(tau)
    q = kernels.expected_next(values_next, nxt, prob)
    b = np.ascontiguousarray(gamma * lam_tau[:, None] * q)
    k = np.ascontiguousarray(k_tau, dtype=float)
    pi, lam_s, lam_sa, cases, roots = kernels.simplex_solve(
        k, b, np.ascontiguousarray(lam_tau), tol, split_ties
    )
    return pi, b, lam_s, lam_sa, cases, roots


def solve_timestep(mdp, counts, alpha, gamma, policy, tau, config=None, values=None):
    """Maximize ``L`` over ``pi^tau`` with every other slice held fixed.

    Runs the three closed-form steps: forward multipliers up to ``tau``, the
    per-state simplex solve, and the backward value update for ``t <= tau``.
    ``values`` may carry a table whose rows above ``tau`` are current for
    ``policy``; otherwise it is recomputed.

    Returns ``(row, scratch)`` where ``row`` is the new ``[S, A]`` slice and
    ``scratch.values`` the value table of the updated policy.
    """
    config = config or EstimatorConfig(alpha=alpha, gamma=gamma)
    policy = _as_policy(mdp, policy)
    counts = _as_counts(counts, mdp)
    H = mdp.horizon
    if not 0 <= tau <= H:
        raise ValueError(f"tau={tau} outside 0..{H}")
    k_tau = counts.counts[tau]
    if values is None:
        _, values = policy_value(mdp, policy, gamma)
    lam = forward_multipliers(mdp, policy, alpha, gamma, tau)

    if tau == H:
        row = mle_rows(k_tau)
        zeros = np.zeros(mdp.num_states)
        scratch = SolverScratch(tau, lam, np.zeros_like(row), k_tau.sum(axis=1).astype(float),
                                np.zeros_like(row), k_tau > 0,
                                np.where(k_tau.any(axis=1), 1, 0).astype(np.int8), zeros + np.nan,
                                np.array(values, dtype=float, copy=True))
        return row, scratch

    row, b, lam_s, lam_sa, cases, roots = _slice_solve(
        mdp, k_tau, lam[tau], values[tau + 1], gamma, tau, config.bisection_tol, config.split_ties
    )
    updated = policy.copy()
    updated[tau] = row
    new_values = backward_values(mdp, updated, gamma, tau, values)
    scratch = SolverScratch(tau, lam, b, lam_s, lam_sa, k_tau > 0, cases, roots, new_values)
    return row, scratch


def initial_policy(mdp, counts, mode, seed):
    shape = (mdp.horizon + 1, mdp.num_states, mdp.num_actions)
    if mode == "uniform":
        return np.full(shape, 1.0 / mdp.num_actions)
    if mode == "seeded-random":
        rng = np.random.default_rng(seed)
        return rng.dirichlet(np.ones(mdp.num_actions), size=shape[:2])
    if mode == "smoothed-mle":
        return mle_rows(counts.counts + 1.0)
    raise ValueError(f"unknown init_mode {mode!r}")


class _Cycler:
    """Incremental bookkeeping for one pass ``tau = 0..H``.

    Occupancies are pushed forward as slices are updated, and the value table
    from the start of the pass stays valid for ``t > tau``, so each slice costs
    one sparse sweep instead of two full passes.
    """

    def __init__(self, mdp, counts, config, policy):
        self.mdp = mdp
        self.k = np.ascontiguousarray(counts.counts, dtype=float)
        self.config = config
        self.policy = policy
        H, S = mdp.horizon, mdp.num_states
        self.occ = np.empty((H + 1, S))
        self.discounts = config.gamma ** np.arange(H + 2)
        self.ll = np.array([log_likelihood(policy[t], self.k[t]) for t in range(H + 1)])

    def run(self, trace):
        mdp, cfg, pi = self.mdp, self.config, self.policy
        H, alpha, gamma = mdp.horizon, cfg.alpha, cfg.gamma
        _, values = policy_value(mdp, pi, gamma)
        occ = self.occ
        occ[0] = mdp.initial_dist
        reward_part = 0.0
        for tau in range(H + 1):
            if tau < H:
                lam = alpha * self.discounts[tau] * occ[tau]
                row, *_ = _slice_solve(mdp, self.k[tau], lam, values[tau + 1], gamma, tau,
                                       cfg.bisection_tol, cfg.split_ties)
                pi[tau] = row
                nxt, prob = mdp.transition_arrays(tau)
                occ[tau + 1] = kernels.propagate(occ[tau], row, nxt, prob)
                reward_part += self.discounts[tau] * float(occ[tau] @ mdp.rewards)
                value = reward_part + self.discounts[tau + 1] * float(occ[tau + 1] @ values[tau + 1])
            else:
                pi[H] = mle_rows(self.k[H])
                value = reward_part + self.discounts[H] * float(occ[H] @ mdp.rewards)
            self.ll[tau] = log_likelihood(pi[tau], self.k[tau])
            trace.append(float(self.ll.sum()) + alpha * value)


def kkt_residuals(mdp, policy, counts, alpha, gamma=1.0):
    """First-order optimality diagnostics of ``policy`` for ``L``.

    For every slice the linear coefficients ``B`` are rebuilt from ``policy``
    itself. Reports the spread of ``K/pi + B`` over supported actions
    (stationarity), the largest ``B_a`` above the state multiplier on
    unsupported actions (dual infeasibility) and the largest
    ``|lambda_sa * pi_sa|`` (complementary slackness).
    """
    policy = _as_policy(mdp, policy)
    counts = _as_counts(counts, mdp)
    H = mdp.horizon
    _, values = policy_value(mdp, policy, gamma)
    occ = occupancy_probabilities(mdp, policy)
    stationarity = dual = slack = 0.0
    for tau in range(H + 1):
        k = counts.counts[tau].astype(float)
        p = policy[tau]
        if tau < H:
            nxt, prob = mdp.transition_arrays(tau)
            lam = alpha * gamma ** tau * occ[tau]
            b = gamma * lam[:, None] * kernels.expected_next(values[tau + 1], nxt, prob)
        else:
            b = np.zeros_like(p)
        support = p > SUPPORT_EPS
        grad = np.where(support, k / np.where(support, p, 1.0) + b, np.nan)
        if (k > 0).any() and (p[k > 0] <= 0).any():
            return {"stationarity": math.inf, "dual_feasibility": math.inf,
                    "complementary_slackness": math.inf}
        hi = np.nanmax(grad, axis=1)
        lo = np.nanmin(grad, axis=1)
        stationarity = max(stationarity, float(np.max(hi - lo)))
        lam_s = hi
        lam_sa = lam_s[:, None] - np.where(k > 0, k / np.where(p > 0, p, 1.0), 0.0) - b
        off = ~support
        if off.any():
            dual = max(dual, float(np.max(np.where(off, -lam_sa, -np.inf))))
        slack = max(slack, float(np.max(np.abs(np.where(p > 0, lam_sa * p, 0.0)))))
    return {"stationarity": stationarity, "dual_feasibility": max(dual, 0.0),
            "complementary_slackness": slack}


def alternating_maximize(mdp, data, config=None, init_policy=None):
    """Find a stationary point of ``L`` by cycling exact slice maximizations.

    ``data`` is a :class:`CountTensor` or trajectories shaped ``[m, H + 1, 2]``.
    ``objective_trace`` holds ``L`` after every slice solve (``H + 1`` entries per cycle), preceded by ``L`` at the initial point.
    Non-convergence within ``max_cycles`` is reported through ``converged``.
    """
    config = config or EstimatorConfig()
    if isinstance(data, CountTensor):
        counts = _as_counts(data, mdp)
    else:
        counts = count_tensor(data, mdp.num_states, mdp.num_actions, mdp.horizon)

    if init_policy is None:
        policy = initial_policy(mdp, counts, config.init_mode, config.seed)
    else:
        policy = np.array(_as_policy(mdp, init_policy), copy=True)
    policy = np.ascontiguousarray(policy)

    trace = [log_posterior(mdp, policy, counts, config.alpha, config.gamma)]
    cycler = _Cycler(mdp, counts, config, policy)
    converged = False
    cycles = 0
    for cycles in range(1, config.max_cycles + 1):
        before = trace[-1]
        cycler.run(trace)
        # with alpha = 0 the slices decouple and one pass is exact
        if config.alpha == 0 or abs(trace[-1] - before) < config.objective_tol:
            converged = True
            break
    if not converged:
        log.info("no convergence after %d cycles (last change %.3g)",
                 cycles, trace[-1] - trace[-1 - (mdp.horizon + 1)])

    kkt = kkt_residuals(mdp, policy, counts, config.alpha, config.gamma)
    return EstimationResult(
        policy=policy,
        objective_trace=np.array(trace),
        cycles_run=cycles,
        converged=converged,
        max_kkt_residual=max(kkt.values()),
        inner_solves=cycles * (mdp.horizon + 1),
        kkt=kkt,
    )
