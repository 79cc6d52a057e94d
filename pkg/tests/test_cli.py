import subprocess
import sys

import numpy as np
import pytest

from valueprior.baselines import mle_estimate
from valueprior.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, cli_main
from valueprior.estimator import count_tensor
from valueprior.experiments import COLUMNS
from valueprior.formats import read_mdp, read_policy, read_trajectories


@pytest.fixture
def workspace(tmp_path):
    config = tmp_path / "c.ini"
    config.write_text("[experiment]\nnum_mazes = 1\nalphas = 0 1\ndataset_sizes = 2\n"
                      "[maze]\ngrid_side = 4\nhorizon = 6\n")
    assert cli_main(["gen-maze", "--config", str(config), "--seed", "3",
                     "--out", str(tmp_path / "m.txt")]) == EXIT_OK
    assert cli_main(["gen-maze", "--config", str(config), "--seed", "3", "--blind",
                     "--out", str(tmp_path / "b.txt")]) == EXIT_OK
    assert cli_main(["sample", "--mdp", str(tmp_path / "m.txt"), "--trajectories", "6",
                     "--seed", "1", "--out", str(tmp_path / "d.txt")]) == EXIT_OK
    return tmp_path


class TestCommands:
    def test_gen_maze_outputs(self, workspace):
        mdp = read_mdp(workspace / "m.txt")
        assert mdp.num_states == 16 and mdp.horizon == 6
        grid = (workspace / "m.txt.map.txt").read_text().splitlines()
        assert len(grid) == 4 and grid[0][0] == "S"
        assert (read_mdp(workspace / "b.txt").rewards >= 0).all()

    def test_sample(self, workspace):
        assert read_trajectories(workspace / "d.txt", 6).shape == (6, 7, 2)

    def test_estimate_alpha_zero_prints_mle(self, workspace, capsys):
        code = cli_main(["estimate", "--mdp", str(workspace / "b.txt"),
                         "--data", str(workspace / "d.txt"), "--alpha", "0"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        (workspace / "p.txt").write_text(out)
        pi = read_policy(workspace / "p.txt")
        mdp = read_mdp(workspace / "b.txt")
        data = read_trajectories(workspace / "d.txt", 6)
        np.testing.assert_array_equal(pi, mle_estimate(count_tensor(data, 16, 8, 6)))

    @pytest.mark.parametrize("estimator", ["value-prior", "dirichlet", "reduction", "mle"])
    def test_estimate_to_file(self, workspace, estimator):
        out = workspace / f"{estimator}.txt"
        assert cli_main(["estimate", "--mdp", str(workspace / "b.txt"), "--data",
                         str(workspace / "d.txt"), "--alpha", "1", "--estimator", estimator,
                         "--out", str(out)]) == EXIT_OK
        np.testing.assert_allclose(read_policy(out).sum(axis=2), 1.0, atol=1e-9)

    def test_sweep(self, workspace):
        args = ["sweep", "--config", str(workspace / "c.ini"), "--out", str(workspace / "r.csv")]
        assert cli_main(args + ["--threads", "2"]) == EXIT_OK
        lines = (workspace / "r.csv").read_text().splitlines()
        assert lines[0] == ",".join(COLUMNS) and len(lines) == 3
        first = (workspace / "r.csv").read_bytes()
        assert cli_main(args) == EXIT_OK
        assert (workspace / "r.csv").read_bytes() == first

    def test_sweep_overrides(self, workspace):
        out = workspace / "r.csv"
        assert cli_main(["sweep", "--config", str(workspace / "c.ini"), "--out", str(out),
                         "--scenario", "fig1-dirichlet", "--alpha", "2", "--trajectories", "1",
                         "--seed", "4"]) == EXIT_OK
        rows = out.read_text().splitlines()[1:]
        assert len(rows) == 1 and rows[0].startswith("fig1-dirichlet,") and ",dirichlet,2,1," in rows[0]


class TestExitCodes:
    def test_sweep_needs_config(self, tmp_path, capsys):
        assert cli_main(["sweep", "--out", str(tmp_path / "r.csv")]) == EXIT_INVALID
        assert "config" in capsys.readouterr().err

    def test_unknown_command(self):
        assert cli_main(["bogus"]) == EXIT_INVALID

    def test_bad_flag_value(self):
        assert cli_main(["sweep", "--config", "x", "--threads", "many"]) == EXIT_INVALID

    def test_missing_input_file(self, tmp_path):
        assert cli_main(["estimate", "--mdp", str(tmp_path / "none.txt"), "--data",
                         str(tmp_path / "none"), "--alpha", "1"]) == EXIT_IO

    def test_unwritable_output(self, workspace):
        assert cli_main(["gen-maze", "--out", str(workspace / "no" / "dir" / "m.txt")]) == EXIT_IO

    def test_malformed_input(self, workspace):
        (workspace / "bad.txt").write_text("MDP 2\n")
        assert cli_main(["sample", "--mdp", str(workspace / "bad.txt"),
                         "--out", str(workspace / "x.txt")]) == EXIT_INVALID

    def test_negative_alpha(self, workspace):
        assert cli_main(["estimate", "--mdp", str(workspace / "b.txt"), "--data",
                         str(workspace / "d.txt"), "--alpha", "-1"]) == EXIT_INVALID

    def test_missing_alpha(self, workspace):
        assert cli_main(["estimate", "--mdp", str(workspace / "b.txt"), "--data",
                         str(workspace / "d.txt")]) == EXIT_INVALID

    def test_mismatched_data(self, workspace):
        (workspace / "short.txt").write_text("0 0 1 0\n")
        assert cli_main(["estimate", "--mdp", str(workspace / "b.txt"), "--data",
                         str(workspace / "short.txt"), "--alpha", "1"]) == EXIT_INVALID

    def test_bad_config(self, tmp_path):
        (tmp_path / "c.ini").write_text("[experiment]\nscenario = fig9\n")
        assert cli_main(["sweep", "--config", str(tmp_path / "c.ini"),
                         "--out", str(tmp_path / "r.csv")]) == EXIT_INVALID

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "valueprior", "sweep"], capture_output=True,
                             text=True)
        assert out.returncode == EXIT_INVALID and "error" in out.stderr
