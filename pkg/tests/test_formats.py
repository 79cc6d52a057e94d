import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from valueprior.formats import (
    FormatError,
    read_mdp,
    read_policy,
    read_trajectories,
    write_mdp,
    write_policy,
    write_trajectories,
)
from valueprior.maze import desk_spec, generate_maze
from valueprior.mdp import MdpValidationError, random_mdp, random_policy, sample_trajectories


def assert_same_mdp(a, b):
    assert (a.num_states, a.num_actions, a.horizon) == (b.num_states, b.num_actions, b.horizon)
    np.testing.assert_array_equal(a.rewards, b.rewards)
    np.testing.assert_array_equal(a.initial_dist, b.initial_dist)
    for t in range(a.horizon):
        np.testing.assert_array_equal(a.dense_transitions(t), b.dense_transitions(t))


class TestMdpFile:
    @given(st.integers(0, 1000), st.booleans(), st.integers(0, 3))
    def test_round_trip(self, seed, stationary, horizon):
        mdp = random_mdp(3, 2, horizon, seed=seed, stationary=stationary, support=2)
        import tempfile, os
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "m.txt")
            write_mdp(mdp, path)
            assert_same_mdp(read_mdp(path), mdp)

    def test_maze_round_trip(self, tmp_path):
        mdp = generate_maze(desk_spec())
        write_mdp(mdp, tmp_path / "maze.txt")
        again = read_mdp(tmp_path / "maze.txt")
        assert again.stationary
        assert_same_mdp(again, mdp)

    def test_layout(self, tmp_path):
        mdp = random_mdp(2, 1, 1, seed=0, support=1)
        write_mdp(mdp, tmp_path / "m.txt")
        lines = (tmp_path / "m.txt").read_text().splitlines()
        assert lines[0] == "MDP 2 1 1"
        assert lines[1].startswith("P0 ") and lines[2].startswith("R ")
        assert all(line.startswith("T 0 ") for line in lines[3:]) and len(lines) == 5
        # 17 significant digits survive a float round trip
        assert float(lines[2].split()[1]) == mdp.rewards[0]

    def test_hand_written(self, tmp_path):
        (tmp_path / "m.txt").write_text(
            "# two states\nMDP 2 2 1\nP0 1 0\nR 0 5\n"
            "T 0 0 0 1 1\nT 0 0 1 0 0.5\nT 0 0 1 1 0.5\nT 0 1 0 1 1\nT 0 1 1 1 1\n")
        mdp = read_mdp(tmp_path / "m.txt")
        assert mdp.dense_transitions(0)[0, 1].tolist() == [0.5, 0.5]

    @pytest.mark.parametrize("text, match", [
        ("", "empty"),
        ("MDP 2 1\n", "MDP"),
        ("MDP 1 1 1\nP0 1\n", "P0 and R"),
        ("MDP 1 1 1\nP0 1\nR 0\nT 0 0 0 3 1\n", "line 4"),
        ("MDP 1 1 1\nP0 1\nR x\n", "line 3"),
        ("MDP 1 1 1\nP0 1\nR 0\nQ 1\n", "unknown record"),
        ("MDP 1 1 1\nP0 1\nR 0\nT 5 0 0 0 1\n", "step 5"),
    ])
    def test_malformed(self, tmp_path, text, match):
        (tmp_path / "m.txt").write_text(text)
        with pytest.raises(FormatError, match=match):
            read_mdp(tmp_path / "m.txt")

    def test_invalid_probabilities(self, tmp_path):
        (tmp_path / "m.txt").write_text("MDP 1 1 1\nP0 1\nR 0\nT 0 0 0 0 0.9\n")
        with pytest.raises(MdpValidationError, match="t=0, s=0, a=0"):
            read_mdp(tmp_path / "m.txt")


class TestTrajectoryFile:
    def test_round_trip(self, tmp_path):
        mdp = random_mdp(4, 3, 3, seed=1)
        data = sample_trajectories(mdp, random_policy(mdp, 1), 9, seed=2)
        write_trajectories(data, tmp_path / "d.txt")
        np.testing.assert_array_equal(read_trajectories(tmp_path / "d.txt", 3), data)
        first = (tmp_path / "d.txt").read_text().splitlines()[0].split()
        assert len(first) == 8

    def test_empty(self, tmp_path):
        (tmp_path / "d.txt").write_text("")
        assert read_trajectories(tmp_path / "d.txt", 2).shape == (0, 3, 2)

    def test_ragged(self, tmp_path):
        (tmp_path / "d.txt").write_text("0 1 1 0\n0 1\n")
        with pytest.raises(FormatError, match="line 2"):
            read_trajectories(tmp_path / "d.txt")

    def test_wrong_horizon(self, tmp_path):
        (tmp_path / "d.txt").write_text("0 1 1 0\n")
        with pytest.raises(FormatError, match="horizon"):
            read_trajectories(tmp_path / "d.txt", 3)


class TestPolicyFile:
    def test_round_trip(self, tmp_path):
        pi = random_policy(random_mdp(3, 2, 2, seed=0), 1)
        pi[1, 0] = [1.0, 0.0]
        write_policy(pi, tmp_path / "p.txt", header_comments=["alpha 1"])
        np.testing.assert_array_equal(read_policy(tmp_path / "p.txt"), pi)
        assert (tmp_path / "p.txt").read_text().startswith("# alpha 1\nPOLICY 2 3 2\n")

    def test_bad_index(self, tmp_path):
        (tmp_path / "p.txt").write_text("POLICY 0 1 1\nPI 0 0 3 1\n")
        with pytest.raises(FormatError, match="line 2"):
            read_policy(tmp_path / "p.txt")
