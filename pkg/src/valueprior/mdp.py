"""Finite-horizon tabular MDPs and their dynamic-programming primitives.

Arrays follow one layout throughout the package:

* a policy is a float array ``[H + 1, S, A]`` of per-(t, s) action distributions,
* a value or occupancy table is a float array ``[H + 1, S]``,
* transitions are padded sparse rows ``next_states[T, S, A, K]`` /
  ``next_probs[T, S, A, K]`` where ``T`` is either ``H`` or 1 (stationary).
"""

from dataclasses import dataclass

import numpy as np

from valueprior import kernels

SUM_TOL = 1e-12
POLICY_SUM_TOL = 1e-9


class MdpValidationError(ValueError):
    """An MDP or policy invariant does not hold."""


@dataclass(frozen=True, eq=False)
class FiniteHorizonMdp:
    """States ``0..S-1``, actions ``0..A-1`` and decision epochs ``t = 0..H``.

    ``next_states`` / ``next_probs`` hold the rows for ``t = 0..H-1``. A leading
    dimension of 1 means the same table is used at every ``t``.
    """

    num_states: int
    num_actions: int
    horizon: int
    rewards: np.ndarray
    initial_dist: np.ndarray
    next_states: np.ndarray
    next_probs: np.ndarray

    def __post_init__(self):
        rewards = np.ascontiguousarray(self.rewards, dtype=float)
        p0 = np.ascontiguousarray(self.initial_dist, dtype=float)
        nxt = np.ascontiguousarray(self.next_states, dtype=np.intp)
        prob = np.ascontiguousarray(self.next_probs, dtype=float)
        S, A, H = self.num_states, self.num_actions, self.horizon
        if S < 1 or A < 1 or H < 0:
            raise ValueError(f"need S >= 1, A >= 1, H >= 0; got S={S}, A={A}, H={H}")
        if rewards.shape != (S,) or p0.shape != (S,):
            raise ValueError(
                f"rewards/initial_dist must have shape ({S},); got {rewards.shape}, {p0.shape}"
            )
        if nxt.ndim != 4 or nxt.shape != prob.shape or nxt.shape[1:3] != (S, A):
            raise ValueError(
                f"transition arrays must be [T, {S}, {A}, K]; got {nxt.shape} and {prob.shape}"
            )
        if nxt.shape[0] not in (1, max(H, 1)):
            raise ValueError(f"transition time dimension must be 1 or H={H}; got {nxt.shape[0]}")
        for name, arr in (("rewards", rewards), ("initial_dist", p0),
                          ("next_states", nxt), ("next_probs", prob)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def stationary(self):
        return self.next_states.shape[0] == 1

    @property
    def support(self):
        return self.next_states.shape[3]

    def transition_arrays(self, t):
        """Sparse rows ``(next_states[S, A, K], next_probs[S, A, K])`` at time ``t``."""
        if not 0 <= t < self.horizon:
            raise IndexError(f"transition time {t} outside 0..{self.horizon - 1}")
        i = 0 if self.stationary else t
        return self.next_states[i], self.next_probs[i]

    def dense_transitions(self, t):
        """Dense ``[S, A, S]`` matrix of the rows at time ``t``."""
        nxt, prob = self.transition_arrays(t)
        dense = np.zeros((self.num_states, self.num_actions, self.num_states))
        s_idx, a_idx = np.indices(nxt.shape[:2])
        for k in range(nxt.shape[2]):
            np.add.at(dense, (s_idx, a_idx, nxt[:, :, k]), prob[:, :, k])
        return dense

    def with_rewards(self, rewards):
        return FiniteHorizonMdp(self.num_states, self.num_actions, self.horizon, rewards,
                                self.initial_dist, self.next_states, self.next_probs)

    def with_horizon(self, horizon):
        """Same dynamics over a different horizon; only valid for stationary MDPs."""
        if not self.stationary:
            raise ValueError("with_horizon needs a stationary MDP")
        return FiniteHorizonMdp(self.num_states, self.num_actions, horizon, self.rewards,
                                self.initial_dist, self.next_states, self.next_probs)

    @classmethod
    def from_dense(cls, rewards, initial_dist, transitions, horizon):
        """Build from a dense ``[T, S, A, S]`` (or ``[S, A, S]``) transition array."""
        dense = np.asarray(transitions, dtype=float)
        if dense.ndim == 3:
            dense = dense[None]
        T, S, A, _ = dense.shape
        support = max(1, int((dense != 0).sum(axis=3).max()))
        nxt = np.zeros((T, S, A, support), dtype=np.intp)
        prob = np.zeros((T, S, A, support))
        for t in range(T):
            for s in range(S):
                for a in range(A):
                    (ids,) = np.nonzero(dense[t, s, a])
                    nxt[t, s, a, : len(ids)] = ids
                    prob[t, s, a, : len(ids)] = dense[t, s, a, ids]
        return cls(S, A, horizon, rewards, initial_dist, nxt, prob)


def validate_mdp(mdp):
    """Raise :class:`MdpValidationError` naming the first violated invariant."""
    p0 = mdp.initial_dist
    if not np.all(np.isfinite(p0)) or (p0 < 0).any():
        s = int(np.argmax(~np.isfinite(p0) | (p0 < 0)))
        raise MdpValidationError(f"initial_dist has a negative or non-finite entry at s={s}")
    if abs(p0.sum() - 1.0) > SUM_TOL:
        raise MdpValidationError(f"initial_dist sums to {p0.sum()!r}, not 1")
    if not np.all(np.isfinite(mdp.rewards)):
        raise MdpValidationError("rewards contain non-finite entries")
    for t in range(mdp.horizon):
        nxt, prob = mdp.transition_arrays(t)
        bad = (prob < 0) | ~np.isfinite(prob) | (nxt < 0) | (nxt >= mdp.num_states)
        if bad.any():
            s, a, _ = np.argwhere(bad)[0]
            raise MdpValidationError(
                f"transition row (t={t}, s={s}, a={a}) has a negative probability or bad state id"
            )
        sums = prob.sum(axis=2)
        off = np.abs(sums - 1.0) > SUM_TOL
        if off.any():
            s, a = np.argwhere(off)[0]
            raise MdpValidationError(
                f"transition row (t={t}, s={s}, a={a}) sums to {sums[s, a]!r}, not 1"
            )
        if mdp.stationary:
            break


def check_policy(mdp, policy, tol=POLICY_SUM_TOL):
    policy = np.asarray(policy, dtype=float)
    expected = (mdp.horizon + 1, mdp.num_states, mdp.num_actions)
    if policy.shape != expected:
        raise ValueError(f"policy shape {policy.shape} does not match MDP {expected}")
    if (policy < 0).any():
        t, s, a = np.argwhere(policy < 0)[0]
        raise MdpValidationError(f"policy has a negative entry at (t={t}, s={s}, a={a})")
    sums = policy.sum(axis=2)
    off = np.abs(sums - 1.0) > tol
    if off.any():
        t, s = np.argwhere(off)[0]
        raise MdpValidationError(f"policy row (t={t}, s={s}) sums to {sums[t, s]!r}")
    return policy


def uniform_policy(mdp):
    return np.full((mdp.horizon + 1, mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions)


def _as_policy(mdp, policy):
    policy = np.ascontiguousarray(policy, dtype=float)
    expected = (mdp.horizon + 1, mdp.num_states, mdp.num_actions)
    if policy.shape != expected:
        raise ValueError(f"policy shape {policy.shape} does not match MDP {expected}")
    return policy


def policy_value(mdp, policy, gamma=1.0):
    """Return ``(V(pi), values)`` where ``values[t, s]`` solves the Bellman recursion.

    With ``gamma = 1`` the scalar is the expected undiscounted reward sum over
    ``t = 0..H`` from ``s_0 ~ p0``.
    """
    policy = _as_policy(mdp, policy)
    values = np.empty((mdp.horizon + 1, mdp.num_states))
    values[mdp.horizon] = mdp.rewards
    for t in range(mdp.horizon - 1, -1, -1):
        nxt, prob = mdp.transition_arrays(t)
        values[t] = kernels.backup(mdp.rewards, policy[t], values[t + 1], nxt, prob, gamma)
    return float(mdp.initial_dist @ values[0]), values


def occupancy_probabilities(mdp, policy):
    """``occ[t, s] = Pr[s_t = s | pi]``."""
    policy = _as_policy(mdp, policy)
    occ = np.empty((mdp.horizon + 1, mdp.num_states))
    occ[0] = mdp.initial_dist
    for t in range(mdp.horizon):
        nxt, prob = mdp.transition_arrays(t)
        occ[t + 1] = kernels.propagate(occ[t], policy[t], nxt, prob)
    return occ


def action_values(mdp, values, t, gamma=1.0):
    """``q[s, a] = R(s) + gamma * E[values[t + 1, s']]`` for ``t < H``."""
    nxt, prob = mdp.transition_arrays(t)
    return mdp.rewards[:, None] + gamma * kernels.expected_next(values[t + 1], nxt, prob)


def optimal_policy(mdp, gamma=1.0, tie_break="lowest", seed=None, tie_tol=1e-9):
    """Backward induction. Returns a deterministic policy and its value table.

    ``tie_break="lowest"`` keeps the lowest-index maximizer; ``"random"`` picks
    uniformly among actions within ``tie_tol`` of the best, using ``seed``.
    At ``t = H`` every action is optimal, so ties cover the whole row there.
    """
    if tie_break not in ("lowest", "random"):
        raise ValueError(f"unknown tie_break {tie_break!r}")
    rng = np.random.default_rng(seed)
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    policy = np.zeros((H + 1, S, A))
    values = np.empty((H + 1, S))
    values[H] = mdp.rewards
    q_last = np.zeros((S, A))
    for t in range(H, -1, -1):
        q = q_last if t == H else action_values(mdp, values, t, gamma)
        best = q.max(axis=1)
        if t < H:
            values[t] = best
        if tie_break == "lowest":
            choice = np.argmax(q >= best[:, None] - tie_tol, axis=1)
        else:
            tied = q >= best[:, None] - tie_tol
            # uniform rank among tied actions
            u = rng.random(S)
            counts = tied.sum(axis=1)
            pick = np.floor(u * counts).astype(int)
            order = np.cumsum(tied, axis=1) - 1
            choice = np.argmax(tied & (order == pick[:, None]), axis=1)
        policy[t, np.arange(S), choice] = 1.0
    return policy, values


def sample_trajectories(mdp, policy, count, seed):
    """Draw ``count`` trajectories as an int array ``[count, H + 1, 2]`` of (s, a)."""
    policy = _as_policy(mdp, policy)
    H = mdp.horizon
    rng = np.random.default_rng(seed)
    out = np.zeros((count, H + 1, 2), dtype=np.int64)
    if count == 0:
        return out
    cdf0 = np.cumsum(mdp.initial_dist)
    u = rng.random(count)
    states = np.minimum(np.searchsorted(cdf0, u * cdf0[-1], side="right"), mdp.num_states - 1)
    for t in range(H + 1):
        cdf = np.cumsum(policy[t, states], axis=1)
        u = rng.random(count)
        actions = np.minimum((u[:, None] * cdf[:, -1:] >= cdf).sum(axis=1), mdp.num_actions - 1)
        out[:, t, 0] = states
        out[:, t, 1] = actions
        if t == H:
            break
        nxt, prob = mdp.transition_arrays(t)
        cdf = np.cumsum(prob[states, actions], axis=1)
        u = rng.random(count)
        k = np.minimum((u[:, None] * cdf[:, -1:] >= cdf).sum(axis=1), prob.shape[2] - 1)
        # padding entries carry zero mass and are never selected
        states = nxt[states, actions, k]
    return out


def random_mdp(num_states, num_actions, horizon, seed, support=None, stationary=False,
               reward_scale=1.0):
    """Random MDP for tests and benchmarks (Dirichlet rows over ``support`` states)."""
    rng = np.random.default_rng(seed)
    support = num_states if support is None else min(support, num_states)
    T = 1 if stationary else max(horizon, 1)
    nxt = np.zeros((T, num_states, num_actions, support), dtype=np.intp)
    prob = np.zeros((T, num_states, num_actions, support))
    for t in range(T):
        for s in range(num_states):
            for a in range(num_actions):
                nxt[t, s, a] = np.sort(rng.choice(num_states, size=support, replace=False))
                prob[t, s, a] = rng.dirichlet(np.ones(support))
    rewards = reward_scale * rng.uniform(-1.0, 1.0, num_states)
    p0 = rng.dirichlet(np.ones(num_states))
    return FiniteHorizonMdp(num_states, num_actions, horizon, rewards, p0, nxt, prob)


def random_policy(mdp, seed):
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(mdp.num_actions), size=(mdp.horizon + 1, mdp.num_states))
