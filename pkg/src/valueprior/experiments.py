"""Seeded sweep harness for the maze experiments.

A sweep is split into groups, one per ``(maze, perturbation, policy)``. Each
group builds its maze, mentor and dataset once. It then estimates every
``(alpha, m)`` cell, using the first ``m`` trajectories of the group's
dataset. All randomness comes from ``SeedSequence(master_seed)`` children
keyed by group indices, so the results do not depend on thread count or
scheduling.
"""

import configparser
import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from valueprior.baselines import (
    build_augmented_mdp,
    dirichlet_estimate,
    extract_policy_and_transitions,
    lift_dataset,
    mle_estimate,
)
from valueprior.estimator import (
    EstimatorConfig,
    alternating_maximize,
    count_tensor,
    log_posterior,
)
from valueprior.maze import (
    MazeSpec,
    PerturbSpec,
    blind_maze,
    generate_maze,
    mentor_policy,
    perturb_policy,
    rms_error,
)
from valueprior.mdp import policy_value, sample_trajectories

log = logging.getLogger(__name__)

SCENARIOS = ("fig1-value-prior", "fig1-dirichlet", "fig2-reduction", "fig3-sensitivity", "custom")
ESTIMATORS = ("value-prior", "dirichlet", "mle", "reduction")
SCENARIO_ESTIMATOR = {
    "fig1-value-prior": "value-prior",
    "fig1-dirichlet": "dirichlet",
    "fig2-reduction": "reduction",
    "fig3-sensitivity": "value-prior",
}
COLUMNS = (
    "scenario", "maze_seed", "policy_seed", "data_seed", "estimator", "alpha",
    "num_trajectories", "mentor_value_fraction", "rms", "final_objective", "cycles",
    "wall_millis",
)
DEFAULT_ALPHAS = (0.0, 0.1, 1.0, 10.0, 100.0)
DEFAULT_SIZES = (1, 2, 5, 10, 20, 50)
# swap-driven grid; at desk scale the mentor values spread over roughly 60-100 % of optimal
DEFAULT_PERTURB_GRID = (PerturbSpec(0.0, 0.0, 0.0),) + tuple(
    PerturbSpec(d, 1e-5, 0.0) for d in (0.01, 0.02, 0.03, 0.04))
VALUE_BUCKETS = (0.73, 0.81, 0.90, 1.0)

# spawn-key tags for the independent streams of a group
_MAZE, _POLICY, _DATA, _PERTURB, _INIT = range(5)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "fig1-value-prior"
    maze_spec: MazeSpec = field(default_factory=lambda: MazeSpec(grid_side=10, horizon=30))
    alphas: tuple = DEFAULT_ALPHAS
    dataset_sizes: tuple = DEFAULT_SIZES
    num_mazes: int = 10
    perturb_grid: tuple = ()
    estimator_config: EstimatorConfig = field(default_factory=EstimatorConfig)
    master_seed: int = 0
    threads: int = 1
    policies_per_maze: int = 1
    # custom scenario only
    estimator: str = "value-prior"
    record_timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "dataset_sizes", tuple(int(m) for m in self.dataset_sizes))
        object.__setattr__(self, "perturb_grid", tuple(self.perturb_grid))
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if not self.alphas or not self.dataset_sizes:
            raise ConfigError("alphas and dataset_sizes must be non-empty")
        if any(not a >= 0 or math.isinf(a) for a in self.alphas):
            raise ConfigError("alphas must be finite and non-negative")
        if any(m < 0 for m in self.dataset_sizes):
            raise ConfigError("dataset_sizes must be non-negative")
        if self.num_mazes < 1 or self.threads < 1 or self.policies_per_maze < 1:
            raise ConfigError("num_mazes, threads and policies_per_maze must be positive")
        if self.scenario == "fig3-sensitivity" and not self.perturb_grid:
            raise ConfigError("fig3-sensitivity needs a non-empty perturb grid")
        if self.perturb_grid and self.scenario not in ("fig3-sensitivity", "custom"):
            raise ConfigError(f"scenario {self.scenario} uses the unperturbed optimal mentor; "
                              "drop the perturb grid")

    @property
    def estimator_name(self):
        return SCENARIO_ESTIMATOR.get(self.scenario, self.estimator)


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    maze_seed: int
    policy_seed: int
    data_seed: int
    estimator: str
    alpha: float
    num_trajectories: int
    mentor_value_fraction: float
    rms: float
    final_objective: float
    cycles: int
    wall_millis: int

    def sort_key(self):
        return (self.scenario, self.maze_seed, self.alpha, self.num_trajectories,
                self.policy_seed, self.data_seed, self.estimator)


def default_config(scenario="fig1-value-prior", full=False, **overrides):
    """Desk profile (10 x 10, H = 30, 10 mazes) or, with ``full``, 30 x 30, H = 90, 50 mazes."""
    maze = MazeSpec() if full else MazeSpec(grid_side=10, horizon=30)
    base = dict(scenario=scenario, maze_spec=maze, num_mazes=50 if full else 10)
    if scenario == "fig3-sensitivity":
        base.update(num_mazes=5, policies_per_maze=10, dataset_sizes=(10,),
                    perturb_grid=DEFAULT_PERTURB_GRID)
    base.update(overrides)
    return ExperimentConfig(**base)


def _split(text, cast, name):
    items = [tok for tok in text.replace(",", " ").split() if tok]
    try:
        return tuple(cast(tok) for tok in items)
    except ValueError:
        raise ConfigError(f"cannot parse {name} = {text!r}") from None


def _perturb_grid(text):
    grid = []
    for chunk in text.replace("\n", ";").split(";"):
        parts = chunk.replace(",", " ").split()
        if not parts:
            continue
        if len(parts) != 3:
            raise ConfigError(f"perturb entries need 'delta sigma2 noise_mean'; got {chunk.strip()!r}")
        try:
            grid.append(PerturbSpec(*(float(p) for p in parts)))
        except ValueError as exc:
            raise ConfigError(f"bad perturb entry {chunk.strip()!r}: {exc}") from None
    return tuple(grid)


def _typed_section(parser, section, cls, reserved=()):
    """Read ``section`` into kwargs for dataclass ``cls``, typed after its defaults."""
    if not parser.has_section(section):
        return {}
    known = {f.name for f in fields(cls)} - set(reserved)
    defaults = cls()
    out = {}
    for key, raw in parser.items(section):
        if key not in known:
            raise ConfigError(f"unknown key [{section}] {key}")
        current = getattr(defaults, key)
        try:
            if raw.strip().lower() == "none" and current is None:
                out[key] = None
            elif key == "obstacle_magnitude_range":
                out[key] = _split(raw, float, key)
            elif key == "action_copies":
                out[key] = int(raw)
            elif isinstance(current, bool):
                out[key] = parser.getboolean(section, key)
            elif isinstance(current, int):
                out[key] = int(raw)
            elif isinstance(current, float):
                out[key] = float(raw)
            else:
                out[key] = raw.strip()
        except ValueError:
            raise ConfigError(f"cannot parse [{section}] {key} = {raw!r}") from None
    return out


def load_config(path, full=False, **overrides):
    """Read an INI-style config; keyword overrides (e.g. from the command line) win."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    unknown = set(parser.sections()) - {"experiment", "maze", "estimator", "perturb"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    exp = dict(parser.items("experiment")) if parser.has_section("experiment") else {}
    scenario = overrides.pop("scenario", None) or exp.get("scenario", "fig1-value-prior").strip()
    base = default_config(scenario, full=full)
    kwargs = {}
    for key, raw in exp.items():
        if key == "scenario":
            continue
        if key == "alphas":
            kwargs[key] = _split(raw, float, key)
        elif key == "dataset_sizes":
            kwargs[key] = _split(raw, int, key)
        elif key in ("num_mazes", "master_seed", "threads", "policies_per_maze"):
            try:
                kwargs[key] = int(raw)
            except ValueError:
                raise ConfigError(f"cannot parse [experiment] {key} = {raw!r}") from None
        elif key == "record_timing":
            kwargs[key] = parser.getboolean("experiment", key)
        elif key == "estimator":
            kwargs[key] = raw.strip()
        else:
            raise ConfigError(f"unknown key [experiment] {key}")

    maze_kw = _typed_section(parser, "maze", MazeSpec, reserved=("seed",))
    est_kw = _typed_section(parser, "estimator", EstimatorConfig, reserved=("alpha", "seed"))
    try:
        maze = replace(base.maze_spec, **maze_kw)
        est = replace(base.estimator_config, **est_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if parser.has_section("perturb"):
        extra = set(parser.options("perturb")) - {"grid"}
        if extra:
            raise ConfigError(f"unknown key [perturb] {sorted(extra)[0]}")
        kwargs["perturb_grid"] = _perturb_grid(parser.get("perturb", "grid", fallback=""))
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return replace(base, maze_spec=maze, estimator_config=est, **kwargs)


def _seed(master, *key):
    return int(np.random.SeedSequence(master, spawn_key=tuple(key)).generate_state(1)[0])


@dataclass(frozen=True)
class _Group:
    maze_index: int
    perturb_index: int
    policy_index: int


def _groups(config):
    perturbs = len(config.perturb_grid) if config.perturb_grid else 1
    return [
        _Group(i, p, j)
        for i in range(config.num_mazes)
        for p in range(perturbs)
        for j in range(config.policies_per_maze)
    ]


def _estimate(name, true_mdp, blind, data, alpha, est_config):
    """Return ``(policy, final_objective, cycles)`` for one cell."""
    gamma = est_config.gamma
    counts = count_tensor(data, blind.num_states, blind.num_actions, blind.horizon)
    if name == "reduction":
        aug = build_augmented_mdp(blind.num_states, blind.num_actions, blind.rewards,
                                  blind.horizon)
        lifted = lift_dataset(data, aug.maps)
        res = alternating_maximize(aug.base, lifted, replace(est_config, alpha=alpha))
        policy, _ = extract_policy_and_transitions(res.policy, aug.maps)
        return policy, res.objective, res.cycles_run
    if name == "value-prior":
        res = alternating_maximize(blind, counts, replace(est_config, alpha=alpha))
        return res.policy, res.objective, res.cycles_run
    if name == "dirichlet":
        policy = dirichlet_estimate(counts, blind, alpha, gamma)
    else:
        policy = mle_estimate(counts)
    return policy, log_posterior(blind, policy, counts, alpha, gamma), 0


def _run_group(config, group):
    seed = config.master_seed
    i, p, j = group.maze_index, group.perturb_index, group.policy_index
    maze_seed = _seed(seed, _MAZE, i)
    policy_seed = _seed(seed, _POLICY, i, p, j)
    data_seed = _seed(seed, _DATA, i, p, j)
    gamma = config.estimator_config.gamma
    name = config.estimator_name

    spec = replace(config.maze_spec, seed=maze_seed)
    true_mdp = generate_maze(spec)
    blind = blind_maze(true_mdp)
    optimum = mentor_policy(true_mdp, gamma, twin_seed=policy_seed)
    mentor = optimum
    if config.perturb_grid:
        pert = replace(config.perturb_grid[p], seed=_seed(seed, _PERTURB, i, p, j))
        mentor = perturb_policy(optimum, true_mdp, gamma, pert)
    v_opt = policy_value(true_mdp, optimum, gamma)[0]
    v_mentor = policy_value(true_mdp, mentor, gamma)[0]
    fraction = v_mentor / v_opt if v_opt != 0 else float("nan")
    dataset = sample_trajectories(true_mdp, mentor, max(config.dataset_sizes), data_seed)

    rows = []
    for ai, alpha in enumerate(config.alphas):
        for mi, m in enumerate(config.dataset_sizes):
            est_config = replace(config.estimator_config,
                                 seed=_seed(seed, _INIT, i, p, j, ai, mi))
            start = time.perf_counter()
            try:
                policy, objective, cycles = _estimate(name, true_mdp, blind, dataset[:m],
                                                      alpha, est_config)
                rms = rms_error(policy, mentor)
            except (ValueError, ArithmeticError, FloatingPointError) as exc:
                log.warning("cell maze=%d alpha=%g m=%d failed: %s", i, alpha, m, exc)
                rms, objective, cycles = float("nan"), float("nan"), 0
            millis = int(round(1000 * (time.perf_counter() - start))) if config.record_timing else 0
            rows.append(ResultRow(config.scenario, maze_seed, policy_seed, data_seed, name,
                                  alpha, m, fraction, rms, float(objective), int(cycles), millis))
    return rows


def run_sweep(config):
    """Every ``(maze, perturbation, policy, alpha, m)`` cell, sorted for output."""
    groups = _groups(config)
    if config.threads == 1:
        chunks = [_run_group(config, g) for g in groups]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            chunks = list(pool.map(lambda g: _run_group(config, g), groups))
    rows = [row for chunk in chunks for row in chunk]
    return sorted(rows, key=ResultRow.sort_key)


def _cell(value):
    if isinstance(value, float):
        return "%.10g" % value
    return str(value)


def write_results(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in sorted(rows, key=ResultRow.sort_key):
            record = asdict(row)
            writer.writerow([_cell(record[c]) for c in COLUMNS])


def read_results(path):
    """Parse a results CSV back into ``ResultRow`` objects."""
    casts = {f.name: f.type for f in fields(ResultRow)}
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for rec in reader:
            rows.append(ResultRow(**{k: _cast(casts[k], v) for k, v in rec.items()}))
    return rows


def _cast(kind, text):
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    return text


def value_bucket(fraction, buckets=VALUE_BUCKETS):
    """Nearest bucket centre to a mentor value fraction."""
    return float(min(buckets, key=lambda b: abs(b - fraction)))


def summarize(rows, by=("estimator", "alpha", "num_trajectories")):
    """Mean rms per group, ignoring NaN-sentinel cells."""
    table = {}
    for row in rows:
        key = tuple(getattr(row, k) for k in by)
        table.setdefault(key, []).append(row.rms)
    return {k: float(np.nanmean(v)) if np.isfinite(v).any() else float("nan")
            for k, v in sorted(table.items())}
