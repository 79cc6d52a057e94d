"""Command-line entry point: ``valueprior {gen-maze,sample,estimate,sweep}``.

Exit status is 0 on success, 1 for invalid arguments or input contents and 2
when a file cannot be read or written.
"""

import argparse
import logging
import sys
from dataclasses import replace

from valueprior import experiments
from valueprior.baselines import (
    build_augmented_mdp,
    dirichlet_estimate,
    extract_policy_and_transitions,
    lift_dataset,
    mle_estimate,
)
from valueprior.estimator import EstimatorConfig, alternating_maximize, count_tensor
from valueprior.formats import (
    policy_lines,
    read_mdp,
    read_policy,
    read_trajectories,
    write_mdp,
    write_policy,
    write_trajectories,
)
from valueprior.maze import MazeSpec, blind_maze, generate_maze, maze_map, mentor_policy
from valueprior.mdp import check_policy, policy_value, sample_trajectories

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

log = logging.getLogger("valueprior")


class UsageError(ValueError):
    """Bad command-line usage; reported with exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _maze_spec(args):
    if args.config:
        cfg = experiments.load_config(args.config, full=args.full)
        return cfg.maze_spec
    return MazeSpec() if args.full else MazeSpec(grid_side=10, horizon=30)


def cmd_gen_maze(args):
    spec = replace(_maze_spec(args), seed=args.seed)
    mdp = generate_maze(spec)
    if args.blind:
        mdp = blind_maze(mdp)
    write_mdp(mdp, args.out)
    with open(args.out + ".map.txt", "w", encoding="utf-8") as fh:
        fh.write(maze_map(generate_maze(spec), spec.grid_side))
    log.info("wrote %s (%d states, %d actions, H=%d)", args.out, mdp.num_states,
             mdp.num_actions, mdp.horizon)
    return EXIT_OK


def cmd_sample(args):
    mdp = read_mdp(args.mdp)
    if args.policy:
        policy = check_policy(mdp, read_policy(args.policy))
    else:
        policy = mentor_policy(mdp, args.gamma, twin_seed=args.seed)
    if args.trajectories < 0:
        raise UsageError("--trajectories must be non-negative")
    data = sample_trajectories(mdp, policy, args.trajectories, args.seed)
    write_trajectories(data, args.out)
    log.info("wrote %d trajectories to %s", len(data), args.out)
    return EXIT_OK


def _estimate(mdp, data, args):
    counts = count_tensor(data, mdp.num_states, mdp.num_actions, mdp.horizon)
    if args.estimator == "mle":
        return mle_estimate(counts), None
    if args.estimator == "dirichlet":
        return dirichlet_estimate(counts, mdp, args.alpha, args.gamma), None
    config = EstimatorConfig(alpha=args.alpha, gamma=args.gamma, seed=args.seed)
    if args.estimator == "reduction":
        aug = build_augmented_mdp(mdp.num_states, mdp.num_actions, mdp.rewards, mdp.horizon)
        result = alternating_maximize(aug.base, lift_dataset(data, aug.maps), config)
        policy, _ = extract_policy_and_transitions(result.policy, aug.maps)
        return policy, result
    result = alternating_maximize(mdp, counts, config)
    return result.policy, result


def cmd_estimate(args):
    if args.alpha is None:
        raise UsageError("estimate needs --alpha")
    if not args.alpha >= 0:
        raise UsageError("--alpha must be non-negative")
    mdp = read_mdp(args.mdp)
    data = read_trajectories(args.data, mdp.horizon)
    policy, result = _estimate(mdp, data, args)
    value = policy_value(mdp, policy, args.gamma)[0]
    summary = [
        f"estimator {args.estimator}",
        f"alpha {args.alpha!r}",
        f"trajectories {len(data)}",
        f"value {value!r}",
    ]
    if result is not None:
        summary += [
            f"objective {result.objective!r}",
            f"cycles {result.cycles_run}",
            f"converged {result.converged}",
            f"max_kkt_residual {result.max_kkt_residual!r}",
        ]
    if args.out:
        write_policy(policy, args.out, header_comments=summary)
    else:
        for line in policy_lines(policy, summary):
            print(line)
    return EXIT_OK


def cmd_sweep(args):
    if not args.config:
        raise UsageError("sweep needs --config")
    if not args.out:
        raise UsageError("sweep needs --out")
    overrides = dict(scenario=args.scenario, master_seed=args.seed, threads=args.threads)
    if args.alpha is not None:
        overrides["alphas"] = (args.alpha,)
    if args.trajectories is not None:
        overrides["dataset_sizes"] = (args.trajectories,)
    if args.timing:
        overrides["record_timing"] = True
    config = experiments.load_config(args.config, full=args.full, **overrides)
    rows = experiments.run_sweep(config)
    experiments.write_results(rows, args.out)
    failed = sum(1 for r in rows if r.rms != r.rms)
    log.info("wrote %d rows to %s (%d failed cells)", len(rows), args.out, failed)
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="valueprior", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed_default=0):
        p.add_argument("--config", help="experiment config file (INI)")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--full", action="store_true", help="full-scale profile (30x30, H=90)")
        p.add_argument("--gamma", type=float, default=1.0)

    p = sub.add_parser("gen-maze", help="write a maze MDP file and its map")
    common(p)
    p.add_argument("--blind", action="store_true", help="zero the obstacle penalties")
    p.set_defaults(func=cmd_gen_maze, needs_out=True)

    p = sub.add_parser("sample", help="sample mentor trajectories from an MDP file")
    common(p)
    p.add_argument("--mdp", required=True)
    p.add_argument("--policy", help="policy file; default is a seeded optimal policy")
    p.add_argument("--trajectories", type=int, default=10)
    p.set_defaults(func=cmd_sample, needs_out=True)

    p = sub.add_parser("estimate", help="estimate the mentor policy from trajectories")
    common(p)
    p.add_argument("--mdp", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--estimator", choices=experiments.ESTIMATORS, default="value-prior")
    p.set_defaults(func=cmd_estimate, needs_out=False)

    p = sub.add_parser("sweep", help="run an experiment sweep and write a CSV")
    common(p, seed_default=None)
    p.add_argument("--scenario", choices=experiments.SCENARIOS)
    p.add_argument("--alpha", type=float, help="run only this alpha")
    p.add_argument("--trajectories", type=int, help="run only this dataset size")
    p.add_argument("--threads", type=int)
    p.add_argument("--timing", action="store_true", help="record wall_millis")
    p.set_defaults(func=cmd_sweep, needs_out=False)
    return parser


def cli_main(argv=None):
    """Run one subcommand and return its exit status."""
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.needs_out and not args.out:
            raise UsageError(f"{args.command} needs --out")
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(cli_main())
