"""Gridworld mazes with slippery moves, reward obstacles and twin actions.

Cells are numbered row-major (``id = row * side + col``). The start is the
top-left corner, the goal the bottom-right. Actions 0..3 move N, E, S, W;
with twins enabled, action ``a + 4`` is an exact copy of action ``a``.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from valueprior.mdp import FiniteHorizonMdp, optimal_policy

log = logging.getLogger(__name__)

MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


@dataclass(frozen=True)
class MazeSpec:
    grid_side: int = 30
    slip_prob: float = 0.30
    obstacle_density: float = 0.15
    goal_reward: float = 100.0
    obstacle_magnitude_range: tuple = None
    horizon: int = 90
    twin_actions: bool = True
    seed: int = 0
    # 1 = plain maze; 2 = twin actions; larger values add more copies
    action_copies: int = None

    def __post_init__(self):
        if self.grid_side < 2:
            raise ValueError("grid_side must be at least 2")
        if not 0 <= self.slip_prob < 1:
            raise ValueError("slip_prob must lie in [0, 1)")
        if not 0 <= self.obstacle_density < 1:
            raise ValueError("obstacle_density must lie in [0, 1)")
        if not self.goal_reward > 0:
            raise ValueError("goal_reward must be positive")
        lo, hi = self.magnitude_range
        if not 0 <= lo <= hi:
            raise ValueError("obstacle_magnitude_range must satisfy 0 <= lo <= hi")
        if self.copies < 1:
            raise ValueError("action_copies must be positive")

    @property
    def magnitude_range(self):
        if self.obstacle_magnitude_range is None:
            return (self.goal_reward / 3.0, self.goal_reward)
        return tuple(self.obstacle_magnitude_range)

    @property
    def copies(self):
        if self.action_copies is None:
            return 2 if self.twin_actions else 1
        return self.action_copies

    @property
    def num_states(self):
        return self.grid_side ** 2

    @property
    def start(self):
        return 0

    @property
    def goal(self):
        return self.num_states - 1


@dataclass(frozen=True)
class PerturbSpec:
    delta: float = 0.0
    sigma2: float = 0.0
    noise_mean: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1]")
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be non-negative")


def _neighbors(r, c, n):
    return [(r + dr, c + dc) for dr, dc in MOVES if 0 <= r + dr < n and 0 <= c + dc < n]


def _move_rows(n, slip):
    """Sparse rows ``[S, 4, 5]`` for the four compass moves."""
    S = n * n
    nxt = np.zeros((S, 4, 5), dtype=np.intp)
    prob = np.zeros((S, 4, 5))
    for r in range(n):
        for c in range(n):
            s = r * n + c
            adjacent = [rr * n + cc for rr, cc in _neighbors(r, c, n)]
            for a, (dr, dc) in enumerate(MOVES):
                rr, cc = r + dr, c + dc
                target = rr * n + cc if 0 <= rr < n and 0 <= cc < n else s
                mass = {target: 1.0 - slip}
                for nb in adjacent:
                    mass[nb] = mass.get(nb, 0.0) + slip / len(adjacent)
                ids = sorted(i for i, p in mass.items() if p > 0)
                nxt[s, a, : len(ids)] = ids
                prob[s, a, : len(ids)] = [mass[i] for i in ids]
    return nxt, prob


def obstacle_layout(spec):
    """``(cells, magnitudes)`` of the obstacles drawn for ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    candidates = np.arange(1, spec.num_states - 1)
    count = int(round(spec.obstacle_density * len(candidates)))
    cells = np.sort(rng.choice(candidates, size=count, replace=False))
    lo, hi = spec.magnitude_range
    magnitudes = rng.uniform(lo, hi, size=count)
    return cells, magnitudes


def generate_maze(spec):
    """Stationary maze MDP with ``4 * action_copies`` actions."""
    n = spec.grid_side
    S = spec.num_states
    nxt4, prob4 = _move_rows(n, spec.slip_prob)
    goal = spec.goal
    nxt4[goal] = 0
    prob4[goal] = 0.0
    nxt4[goal, :, 0] = goal
    prob4[goal, :, 0] = 1.0
    copies = spec.copies
    nxt = np.tile(nxt4, (1, copies, 1))[None]
    prob = np.tile(prob4, (1, copies, 1))[None]

    rewards = np.zeros(S)
    cells, magnitudes = obstacle_layout(spec)
    rewards[cells] = -magnitudes
    rewards[goal] = spec.goal_reward
    p0 = np.zeros(S)
    p0[spec.start] = 1.0
    return FiniteHorizonMdp(S, 4 * copies, spec.horizon, rewards, p0, nxt, prob)


def blind_maze(mdp):
    """The same maze with every negative (obstacle) reward replaced by zero."""
    return mdp.with_rewards(np.maximum(mdp.rewards, 0.0))


def maze_map(mdp, grid_side):
    """ASCII map: ``S`` start, ``G`` goal, ``#`` obstacle, ``.`` free."""
    chars = np.full(grid_side * grid_side, ".")
    chars[mdp.rewards < 0] = "#"
    chars[mdp.rewards > 0] = "G"
    chars[np.argmax(mdp.initial_dist)] = "S"
    return "\n".join("".join(row) for row in chars.reshape(grid_side, grid_side)) + "\n"


def mentor_policy(mdp, gamma=1.0, twin_seed=0):
    """Deterministic optimal policy with value ties broken uniformly at random."""
    policy, _ = optimal_policy(mdp, gamma, tie_break="random", seed=twin_seed)
    return policy


def perturb_policy(policy, mdp, gamma, spec):
    """Degrade ``policy`` by action swaps in a random subset of states plus Gaussian noise.

    In ``floor(delta * S)`` randomly chosen states the modal action's mass is
    swapped, at every ``t``, with that of a random other action. Then
    ``N(noise_mean, sigma2)`` noise is added to every probability, negatives
    are clipped and rows renormalized. ``mdp`` and ``gamma`` are accepted for
    interface symmetry; the perturbation itself only needs the policy.
    """
    del mdp, gamma
    out = np.array(policy, dtype=float, copy=True)
    H1, S, A = out.shape
    rng = np.random.default_rng(spec.seed)
    chosen = rng.choice(S, size=int(np.floor(spec.delta * S)), replace=False)
    if A > 1 and len(chosen):
        modal = np.argmax(out[:, chosen], axis=2)
        other = rng.integers(0, A - 1, size=modal.shape)
        other = other + (other >= modal)
        t_idx = np.arange(H1)[:, None]
        a_mass = out[t_idx, chosen[None, :], modal].copy()
        out[t_idx, chosen[None, :], modal] = out[t_idx, chosen[None, :], other]
        out[t_idx, chosen[None, :], other] = a_mass
    if spec.sigma2 > 0 or spec.noise_mean != 0:
        noise = rng.normal(spec.noise_mean, np.sqrt(spec.sigma2), size=out.shape)
        out = np.maximum(out + noise, 0.0)
        totals = out.sum(axis=2, keepdims=True)
        dead = totals[..., 0] <= 0
        if dead.any():
            log.warning("%d policy rows clipped to zero; reset to uniform", int(dead.sum()))
            out[dead] = 1.0
            totals = out.sum(axis=2, keepdims=True)
        out /= totals
    return out


def rms_error(estimate, truth):
    """Root-mean-square difference over every ``(t, s, a)`` entry."""
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(truth, dtype=float)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {ref.shape}")
    return float(np.sqrt(np.mean((est - ref) ** 2)))


def desk_spec(**overrides):
    """Reduced-scale maze: 10 x 10 grid, horizon 30."""
    return replace(MazeSpec(grid_side=10, horizon=30), **overrides)
