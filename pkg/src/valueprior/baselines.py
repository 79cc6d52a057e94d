"""Comparison estimators and the unknown-transitions reduction.

The reduction folds ``theta`` into the policy of a deterministic augmented MDP
whose states are ``S | S x A | {sink}`` and whose actions are ``A | S``. An
original trajectory of ``H + 1`` pairs becomes ``2H + 1`` augmented pairs, with
original states on even steps and (state, action) composites on odd steps.
"""

import logging
from dataclasses import dataclass

import numpy as np

from valueprior.estimator import CountTensor, mle_rows
from valueprior.mdp import FiniteHorizonMdp, action_values, optimal_policy

log = logging.getLogger(__name__)

OPTIMAL_TOL = 1e-9


@dataclass(frozen=True)
class AugmentedMaps:
    num_states: int
    num_actions: int
    horizon: int

    @property
    def sink(self):
        return self.num_states + self.num_states * self.num_actions

    @property
    def num_aug_states(self):
        return self.sink + 1

    @property
    def num_aug_actions(self):
        return self.num_actions + self.num_states

    def pair_id(self, s, a):
        return self.num_states + np.asarray(s) * self.num_actions + np.asarray(a)

    def state_action(self, s_next):
        """Augmented action that selects original next state ``s_next``."""
        return self.num_actions + np.asarray(s_next)


@dataclass(frozen=True, eq=False)
class AugmentedMdp:
    base: FiniteHorizonMdp
    maps: AugmentedMaps
    sink_penalty: float


def default_sink_penalty(rewards):
    return 1e6 * max(1.0, float(np.max(np.abs(rewards))) if len(rewards) else 1.0)


def build_augmented_mdp(num_states, num_actions, rewards, horizon, sink_penalty=None,
                        initial_dist=None):
    """Deterministic augmented MDP over horizon ``2H``.

    ``initial_dist`` (over original states) defaults to uniform.
    """
    rewards = np.asarray(rewards, dtype=float)
    if sink_penalty is None:
        sink_penalty = default_sink_penalty(rewards)
    if not sink_penalty > 0:
        raise ValueError("sink_penalty must be positive")
    S, A = num_states, num_actions
    maps = AugmentedMaps(S, A, horizon)
    n_aug, a_aug = maps.num_aug_states, maps.num_aug_actions

    nxt = np.full((1, n_aug, a_aug, 1), maps.sink, dtype=np.intp)
    prob = np.ones((1, n_aug, a_aug, 1))
    s_idx = np.arange(S)
    # original state, original action -> composite (s, a)
    nxt[0, :S, :A, 0] = maps.pair_id(s_idx[:, None], np.arange(A)[None, :])
    # composite (s, a), state-valued action s' -> s'
    nxt[0, S:maps.sink, A:, 0] = s_idx[None, :]

    aug_rewards = np.concatenate([rewards, np.zeros(S * A), [-float(sink_penalty)]])
    p0 = np.zeros(n_aug)
    p0[:S] = np.full(S, 1.0 / S) if initial_dist is None else np.asarray(initial_dist, float)
    base = FiniteHorizonMdp(n_aug, a_aug, 2 * horizon, aug_rewards, p0, nxt, prob)
    return AugmentedMdp(base, maps, float(sink_penalty))


def lift_dataset(dataset, maps):
    """Unroll each ``(s_t, a_t)`` trajectory into ``2H + 1`` augmented pairs."""
    data = np.asarray(dataset, dtype=np.int64)
    H = maps.horizon
    if data.size == 0:
        return np.zeros((0, 2 * H + 1, 2), dtype=np.int64)
    if data.ndim != 3 or data.shape[1:] != (H + 1, 2):
        raise ValueError(f"trajectories must have shape [m, {H + 1}, 2]; got {data.shape}")
    s, a = data[:, :, 0], data[:, :, 1]
    if (s < 0).any() or (s >= maps.num_states).any() or (a < 0).any() or (a >= maps.num_actions).any():
        i = int(np.argwhere((s < 0) | (s >= maps.num_states) | (a < 0) | (a >= maps.num_actions))[0, 0])
        raise ValueError(f"trajectory {i} has ids outside the original state/action space")
    out = np.empty((data.shape[0], 2 * H + 1, 2), dtype=np.int64)
    out[:, 0::2, 0] = s
    out[:, 0::2, 1] = a
    out[:, 1::2, 0] = maps.pair_id(s[:, :-1], a[:, :-1])
    out[:, 1::2, 1] = maps.state_action(s[:, 1:])
    return out


def extract_policy_and_transitions(aug_policy, maps, return_sink_mass=False):
    """Read ``pi`` off even augmented steps and ``theta_hat`` off odd ones.

    Mass on sink-leading actions is dropped and rows renormalized; rows that
    carried no compatible mass become uniform. Returns ``(pi, theta_hat)`` with
    shapes ``[H + 1, S, A]`` and ``[H, S, A, S]``, plus the largest dropped mass
    per block when ``return_sink_mass`` is set.
    """
    aug = np.asarray(aug_policy, dtype=float)
    S, A, H = maps.num_states, maps.num_actions, maps.horizon
    pi_raw = aug[0::2, :S, :A]
    theta_raw = aug[1::2, S:maps.sink, A:].reshape(H, S, A, S)
    sink_pi = 1.0 - pi_raw.sum(axis=2)
    sink_theta = 1.0 - theta_raw.sum(axis=3)

    pi = _renormalize(pi_raw)
    theta = _renormalize(theta_raw)
    if return_sink_mass:
        dropped = {"policy": float(sink_pi.max(initial=0.0)),
                   "transitions": float(sink_theta.max(initial=0.0))}
        return pi, theta, dropped
    return pi, theta


def _renormalize(block):
    totals = block.sum(axis=-1, keepdims=True)
    uniform = np.full_like(block, 1.0 / block.shape[-1])
    return np.where(totals > 0, block / np.where(totals > 0, totals, 1.0), uniform)


def empirical_transitions(dataset, num_states, num_actions, horizon):
    """Observed next-state frequencies ``[H, S, A, S]`` (NaN on unobserved rows)."""
    data = np.asarray(dataset, dtype=np.int64).reshape(-1, horizon + 1, 2)
    tally = np.zeros((horizon, num_states, num_actions, num_states))
    if horizon and len(data):
        t = np.broadcast_to(np.arange(horizon), data[:, :-1, 0].shape)
        np.add.at(tally, (t, data[:, :-1, 0], data[:, :-1, 1], data[:, 1:, 0]), 1)
    totals = tally.sum(axis=3, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(totals > 0, tally / totals, np.nan)


def mle_estimate(counts):
    """Empirical action frequencies; uniform rows where nothing was observed."""
    k = counts.counts if isinstance(counts, CountTensor) else np.asarray(counts)
    return mle_rows(k)


def optimal_action_sets(mdp, gamma=1.0, tol=OPTIMAL_TOL):
    """Boolean ``[H + 1, S, A]``: actions within ``tol`` of the best action value."""
    _, values = optimal_policy(mdp, gamma)
    sets = np.ones((mdp.horizon + 1, mdp.num_states, mdp.num_actions), dtype=bool)
    for t in range(mdp.horizon):
        q = action_values(mdp, values, t, gamma)
        sets[t] = q >= q.max(axis=1, keepdims=True) - tol
    return sets


def dirichlet_estimate(counts, mdp, alpha, gamma=1.0):
    """Posterior-mean policy under a Dirichlet prior centred on the optimal actions.

    Each optimal action at ``(t, s)`` gets pseudo-count ``alpha / |A_opt|``; all
    other actions get zero.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    k = np.asarray(counts.counts if isinstance(counts, CountTensor) else counts, dtype=float)
    if alpha == 0:
        return mle_rows(k)
    sets = optimal_action_sets(mdp, gamma)
    beta = np.where(sets, alpha / sets.sum(axis=2, keepdims=True), 0.0)
    post = k + beta
    return post / post.sum(axis=2, keepdims=True)
