"""Compare the numba and numpy kernel backends on production-shaped work.

Times one full training iteration (fresh sample, forward, loss gradient,
no optimizer step) for the triangle network at the default width/depth,
across sample counts and dtypes.  Run from the repository root:

    python3 benchmarks/bench_backends.py [--samples 10000 100000] [--repeats 3]
"""

from __future__ import annotations

import argparse
import importlib
import json
import time

import numpy as np

import qnetlocal.localmodel.backends as backends
from qnetlocal import Distribution, parse_config
from qnetlocal.localmodel import init_net
from qnetlocal.localmodel.net import _forward_backward

TRIANGLE = json.dumps(
    {
        "parties": {
            "a1": {"sources": ["l1", "l3"], "outcomes": 4},
            "a2": {"sources": ["l2", "l1"], "outcomes": 4},
            "a3": {"sources": ["l3", "l2"], "outcomes": 4},
        }
    }
)


def set_backend(name: str) -> None:
    backends._active = None
    backends._active_name = None
    backends._active = backends._load(name)
    backends._active_name = name


def time_iteration(name: str, n_samples: int, dtype, width: int, depth: int,
                   repeats: int) -> float:
    set_backend(name)
    cfg = parse_config(TRIANGLE)
    net = init_net(cfg, width=width, depth=depth, seed=7, dtype=dtype)
    rng = np.random.default_rng(11)
    target = Distribution.from_array(rng.dirichlet(np.ones(64)), (4, 4, 4))
    sample_dtype = np.float64 if dtype == np.float64 else dtype
    values = rng.random((n_samples, 3), dtype=sample_dtype)
    _forward_backward(net, target.probs, values, "kl")  # warm up / compile
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        _forward_backward(net, target.probs, values, "kl")
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, nargs="+", default=[10_000, 100_000])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--width", type=int, default=60)
    parser.add_argument("--depth", type=int, default=4)
    args = parser.parse_args()

    names = backends.available_backends()
    print(f"backends: {names}; width={args.width} depth={args.depth} (triangle)")
    header = f"{'backend':>8} {'dtype':>8} " + "".join(f"{n:>14,}" for n in args.samples)
    print(header)
    for name in names:
        for dtype in (np.float32, np.float64):
            times = [
                time_iteration(name, n, dtype, args.width, args.depth, args.repeats)
                for n in args.samples
            ]
            row = f"{name:>8} {np.dtype(dtype).name:>8} "
            row += "".join(f"{t * 1e3:>12.1f}ms" for t in times)
            print(row)


if __name__ == "__main__":
    main()
