import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from valueprior.experiments import DEFAULT_PERTURB_GRID
from valueprior.maze import (
    MazeSpec,
    PerturbSpec,
    blind_maze,
    desk_spec,
    generate_maze,
    maze_map,
    mentor_policy,
    obstacle_layout,
    perturb_policy,
    rms_error,
)
from valueprior.mdp import action_values, optimal_policy, policy_value, uniform_policy, validate_mdp


class TestGenerate:
    def test_full_scale(self):
        spec = MazeSpec()
        mdp = generate_maze(spec)
        assert (mdp.num_states, mdp.num_actions, mdp.horizon) == (900, 8, 90)
        assert len(obstacle_layout(spec)[0]) == 135
        assert mdp.stationary and mdp.support <= 5
        validate_mdp(mdp)

    def test_start_goal_and_rewards(self):
        spec = desk_spec(seed=4)
        mdp = generate_maze(spec)
        assert mdp.initial_dist[0] == 1.0
        assert mdp.rewards[spec.goal] == spec.goal_reward
        assert mdp.rewards[0] == 0.0
        obstacles = mdp.rewards < 0
        lo, hi = spec.magnitude_range
        assert ((-mdp.rewards[obstacles] >= lo) & (-mdp.rewards[obstacles] <= hi)).all()

    def test_goal_absorbs(self):
        spec = desk_spec()
        nxt, prob = generate_maze(spec).transition_arrays(0)
        assert (nxt[spec.goal, :, 0] == spec.goal).all() and (prob[spec.goal, :, 0] == 1).all()

    def test_no_slip_is_deterministic(self):
        mdp = generate_maze(desk_spec(slip_prob=0.0))
        _, prob = mdp.transition_arrays(0)
        assert set(np.unique(prob)) == {0.0, 1.0}
        # east from the start lands on cell 1
        assert mdp.dense_transitions(0)[0, 1, 1] == 1.0

    def test_walls_bounce(self):
        mdp = generate_maze(desk_spec(slip_prob=0.0))
        assert mdp.dense_transitions(0)[0, 0, 0] == 1.0

    def test_twins_identical(self):
        mdp = generate_maze(desk_spec())
        np.testing.assert_array_equal(mdp.next_states[..., :4, :], mdp.next_states[..., 4:, :])
        np.testing.assert_array_equal(mdp.next_probs[..., :4, :], mdp.next_probs[..., 4:, :])

    def test_action_copies(self):
        assert generate_maze(desk_spec(action_copies=4)).num_actions == 16
        assert generate_maze(desk_spec(twin_actions=False)).num_actions == 4

    def test_seeded(self):
        a, b = generate_maze(desk_spec(seed=9)), generate_maze(desk_spec(seed=9))
        np.testing.assert_array_equal(a.rewards, b.rewards)

    @pytest.mark.parametrize("kwargs", [dict(grid_side=1), dict(slip_prob=1.0),
                                        dict(obstacle_density=-0.1), dict(goal_reward=0.0),
                                        dict(obstacle_magnitude_range=(5, 1)), dict(action_copies=0)])
    def test_invalid_specs(self, kwargs):
        with pytest.raises(ValueError):
            MazeSpec(**kwargs)

    def test_map(self):
        spec = desk_spec(seed=2)
        text = maze_map(generate_maze(spec), spec.grid_side)
        rows = text.splitlines()
        assert len(rows) == 10 and rows[0][0] == "S" and rows[-1][-1] == "G"
        assert text.count("#") == len(obstacle_layout(spec)[0])


class TestBlind:
    def test_only_obstacles_change(self):
        mdp = generate_maze(desk_spec(seed=3))
        blind = blind_maze(mdp)
        changed = mdp.rewards != blind.rewards
        np.testing.assert_array_equal(changed, mdp.rewards < 0)
        assert blind.next_states is mdp.next_states

    def test_obstacle_free_unchanged(self):
        mdp = generate_maze(desk_spec(obstacle_density=0.0))
        np.testing.assert_array_equal(blind_maze(mdp).rewards, mdp.rewards)

    def test_blind_optimum_is_no_better_in_true_maze(self):
        for seed in range(5):
            mdp = generate_maze(desk_spec(seed=seed))
            naive, _ = optimal_policy(blind_maze(mdp))
            best, _ = optimal_policy(mdp)
            assert policy_value(mdp, naive)[0] <= policy_value(mdp, best)[0] + 1e-9


class TestMentor:
    def test_deterministic_given_seed(self):
        mdp = generate_maze(desk_spec())
        np.testing.assert_array_equal(mentor_policy(mdp, twin_seed=3), mentor_policy(mdp, twin_seed=3))

    def test_uses_both_twins(self):
        pi = mentor_policy(generate_maze(desk_spec()), twin_seed=0)
        chosen = pi.argmax(axis=2)
        assert (chosen < 4).any() and (chosen >= 4).any()

    def test_no_twins_matches_lowest(self):
        mdp = generate_maze(desk_spec(twin_actions=False, obstacle_magnitude_range=(10.0, 90.0)))
        lowest, values = optimal_policy(mdp)
        pi = mentor_policy(mdp, twin_seed=5)
        # both are optimal; where the maximizer is unique they agree
        for t in range(mdp.horizon):
            q = action_values(mdp, values, t)
            unique = (q >= q.max(axis=1, keepdims=True) - 1e-9).sum(axis=1) == 1
            np.testing.assert_array_equal(pi[t, unique], lowest[t, unique])

    def test_attains_max(self):
        mdp = generate_maze(desk_spec(seed=1))
        pi = mentor_policy(mdp, twin_seed=1)
        _, values = optimal_policy(mdp)
        for t in range(mdp.horizon):
            q = action_values(mdp, values, t)
            assert (q[np.arange(mdp.num_states), pi[t].argmax(axis=1)] >= q.max(axis=1) - 1e-9).all()


class TestPerturb:
    def test_identity(self):
        mdp = generate_maze(desk_spec())
        pi = mentor_policy(mdp)
        np.testing.assert_array_equal(perturb_policy(pi, mdp, 1.0, PerturbSpec(0, 0, 0)), pi)

    def test_full_swap_moves_mode(self):
        mdp = generate_maze(desk_spec())
        pi = mentor_policy(mdp)
        out = perturb_policy(pi, mdp, 1.0, PerturbSpec(1.0, 0.0, 0.0, seed=2))
        assert (out.argmax(axis=2) != pi.argmax(axis=2)).all()
        assert set(np.unique(out)) == {0.0, 1.0}

    @given(st.floats(0, 1), st.floats(0, 0.01), st.floats(-0.1, 0.6), st.integers(0, 100))
    def test_rows_stay_distributions(self, delta, sigma2, mean, seed):
        mdp = generate_maze(desk_spec(grid_side=4, horizon=5))
        out = perturb_policy(mentor_policy(mdp), mdp, 1.0, PerturbSpec(delta, sigma2, mean, seed))
        assert (out >= 0).all()
        np.testing.assert_allclose(out.sum(axis=2), 1.0, atol=1e-12)

    def test_literal_noise_flattens(self):
        mdp = generate_maze(desk_spec())
        out = perturb_policy(mentor_policy(mdp), mdp, 1.0, PerturbSpec(0.0, 1e-4, 0.5, seed=1))
        assert out.max() < 0.35

    def test_invalid(self):
        with pytest.raises(ValueError):
            PerturbSpec(delta=1.5)
        with pytest.raises(ValueError):
            PerturbSpec(sigma2=-1.0)

    def test_default_grid_spans_value_range(self):
        fractions = []
        for i in range(3):
            mdp = generate_maze(desk_spec(seed=100 + i))
            opt = mentor_policy(mdp, twin_seed=i)
            v_opt = policy_value(mdp, opt)[0]
            for j, spec in enumerate(DEFAULT_PERTURB_GRID):
                for k in range(4):
                    pert = perturb_policy(opt, mdp, 1.0, PerturbSpec(spec.delta, spec.sigma2,
                                                                     spec.noise_mean, seed=k))
                    fractions.append(policy_value(mdp, pert)[0] / v_opt)
        fractions = np.array(fractions)
        assert fractions.max() == pytest.approx(1.0) and fractions.min() < 0.73
        assert ((fractions > 0.75) & (fractions < 0.87)).any()


class TestRms:
    def test_zero(self):
        pi = uniform_policy(generate_maze(desk_spec(grid_side=3, horizon=2)))
        assert rms_error(pi, pi) == 0.0

    def test_opposite(self):
        assert rms_error(np.array([[[0.0, 1.0]]]), np.array([[[1.0, 0.0]]])) == 1.0

    def test_uniform_vs_deterministic(self):
        assert rms_error(np.full((2, 3, 2), 0.5), np.tile([1.0, 0.0], (2, 3, 1))) == 0.5

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rms_error(np.zeros((1, 2, 2)), np.zeros((1, 2, 3)))
