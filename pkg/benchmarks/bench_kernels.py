"""Compare the compiled and pure-Python kernel backends.

Times the individual network kernels on observation-shaped batches and the
end-to-end cost of one environment action (act, step, record, learn).

    python benchmarks/bench_kernels.py [--repeat N] [--episodes N]
"""

import argparse
import time
import timeit

import numpy as np

from swarmcov import kernels
from swarmcov.experiment import ExperimentSpec, run_experiment
from swarmcov.gridworld import GridMap
from swarmcov.neural import init_network


def observation_batch(rng, size, batch=16):
    """Sparse 0/1 batch shaped like real observations (4 channels of size x size)."""
    cells = size * size
    X = np.zeros((batch, 4 * cells))
    X[:, :cells] = 1.0
    X[:, cells:2 * cells] = rng.random((batch, cells)) < 0.5
    X[np.arange(batch), 2 * cells + rng.integers(0, cells, batch)] = 1.0
    return X


def bench_kernels(backends, repeat):
    rng = np.random.default_rng(0)
    print(f"{'map':>5} {'backend':>8} {'forward1':>10} {'forward16':>10} {'gradients':>10} {'train':>10}")
    for size in (5, 9):
        X = observation_batch(rng, size)
        net = init_network(X.shape[1], rng=0)
        acts = rng.integers(0, 4, len(X)).astype(np.intp)
        t = rng.normal(size=len(X))
        for name in backends:
            k = kernels.get(name)
            params = [p.copy() for p in net.params()]
            v = [np.zeros_like(p) for p in params]
            g = [np.empty_like(p) for p in params]
            cases = {
                "forward1": lambda: k.forward(*params, X[:1], False),
                "forward16": lambda: k.forward(*params, X, False),
                "gradients": lambda: k.gradients(*params, X, acts, t, False, *g),
                "train": lambda: k.train(*params, *v, X, acts, t, False, 1e-3, 0.9, 1e-8, *g),
            }
            us = {c: min(timeit.repeat(f, number=repeat, repeat=3)) / repeat * 1e6 for c, f in cases.items()}
            print(f"{size}x{size:<3} {name:>8} " + " ".join(f"{us[c]:>8.1f}us" for c in cases))


def bench_end_to_end(backends, episodes):
    print(f"\n{'map':>5} {'uavs':>4} {'backend':>8} {'us/action':>10} {'actions':>8}")
    for size, uavs in ((5, 1), (9, 3)):
        for name in backends:
            spec = ExperimentSpec(GridMap.open(size, size), uavs, episodes=episodes, seed=0,
                                  max_steps=300, backend=name)
            start = time.perf_counter()
            summary = run_experiment(spec)
            actions = sum(r.total_actions for r in summary.records)
            per = (time.perf_counter() - start) / actions * 1e6
            print(f"{size}x{size:<3} {uavs:>4} {name:>8} {per:>10.0f} {actions:>8}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=500, help="calls per kernel timing")
    parser.add_argument("--episodes", type=int, default=3, help="episodes per end-to-end run")
    args = parser.parse_args()
    backends = ["python"] + (["cython"] if kernels.fast is not None else [])
    print(f"active backend: {kernels.BACKEND}; compared: {', '.join(backends)}\n")
    bench_kernels(backends, args.repeat)
    bench_end_to_end(backends, args.episodes)


if __name__ == "__main__":
    main()
