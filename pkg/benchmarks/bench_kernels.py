"""Compare the compiled and pure-numpy kernel backends.

Usage: ``python3 benchmarks/bench_kernels.py [--side 30] [--horizon 90] [--repeat 5]``
"""

import argparse
import time

import numpy as np

from valueprior import estimator
from valueprior.estimator import EstimatorConfig, alternating_maximize, count_tensor
from valueprior.kernels import available_backends
from valueprior.maze import blind_maze, desk_spec, generate_maze, mentor_policy
from valueprior.mdp import sample_trajectories


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def kernel_inputs(mdp, seed=0):
    rng = np.random.default_rng(seed)
    nxt, prob = mdp.transition_arrays(0)
    S, A = mdp.num_states, mdp.num_actions
    pi = rng.dirichlet(np.ones(A), size=S)
    occ = rng.dirichlet(np.ones(S))
    values = rng.normal(size=S)
    k = rng.integers(0, 3, size=(S, A)).astype(float)
    b = rng.normal(size=(S, A))
    lam_v = rng.uniform(0.1, 1.0, size=S)
    return nxt, prob, pi, occ, values, k, b, lam_v


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--side", type=int, default=30)
    parser.add_argument("--horizon", type=int, default=90)
    parser.add_argument("--trajectories", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    spec = desk_spec(grid_side=args.side, horizon=args.horizon, seed=1)
    true_mdp = generate_maze(spec)
    mdp = blind_maze(true_mdp)
    nxt, prob, pi, occ, values, k, b, lam_v = kernel_inputs(mdp)
    data = sample_trajectories(true_mdp, mentor_policy(true_mdp), args.trajectories, seed=2)
    counts = count_tensor(data, mdp.num_states, mdp.num_actions, mdp.horizon)
    config = EstimatorConfig(alpha=1.0, max_cycles=3, objective_tol=1e-300)

    backends = available_backends()
    print(f"maze {args.side}x{args.side}, H={args.horizon}, |A|={mdp.num_actions}; "
          f"best of {args.repeat} (ms)")
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name in backends))
    rows = {
        "propagate": lambda m: m.propagate(occ, pi, nxt, prob),
        "expected_next": lambda m: m.expected_next(values, nxt, prob),
        "backup": lambda m: m.backup(mdp.rewards, pi, values, nxt, prob, 1.0),
        "simplex_solve": lambda m: m.simplex_solve(k, b, lam_v, 1e-10, True),
    }
    results = {}
    for label, call in rows.items():
        results[label] = {name: best_of(lambda: call(mod), args.repeat) for name, mod in backends.items()}

    original = estimator.kernels.__dict__.copy()
    results["3 cycles"] = {}
    for name, mod in backends.items():
        for fn in ("propagate", "expected_next", "backup", "simplex_solve"):
            setattr(estimator.kernels, fn, getattr(mod, fn))
        results["3 cycles"][name] = best_of(lambda: alternating_maximize(mdp, counts, config), 1)
    for fn in ("propagate", "expected_next", "backup", "simplex_solve"):
        setattr(estimator.kernels, fn, original[fn])

    for label, timing in results.items():
        print(f"{label:<16}" + "".join(f"{1e3 * timing[n]:>12.3f}" for n in backends))
    if len(backends) > 1:
        ratio = results["3 cycles"]["python"] / results["3 cycles"]["compiled"]
        print(f"end-to-end speedup of compiled over python: {ratio:.1f}x")


if __name__ == "__main__":
    main()
