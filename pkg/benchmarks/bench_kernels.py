"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Every kernel is also checked for bitwise agreement between the two backends
before it is timed.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from uncage import _pykernels as py
from uncage.guidance import PairIndex, gaussian_kernel
from uncage.prompt import build_prompt_spec

try:
    from uncage import _ckernels as cy
except ImportError:  # extension not built
    cy = None


def _cases(rng: np.random.Generator):
    spec = build_prompt_spec([("cat", ["red"]), ("dog", ["blue"]), ("bird", ["green"]), ("horse", ["pink"])])
    pairs = PairIndex.from_spec(spec)
    for size in (16, 64, 128):
        stack = rng.random((len(spec.subjects), size, size))
        k = gaussian_kernel(2.0)
        yield f"blur_stack {size}x{size}x{stack.shape[0]}", "blur_stack", (stack, k)
        yield (f"contrastive {size}x{size}", "contrastive",
               (stack, pairs.pos_ptr, pairs.pos_idx, pairs.neg_ptr, pairs.neg_idx, 0))
        tokens = rng.integers(0, 9, size=(size, size)).astype(np.int64)
        committed = rng.random((size, size)) < 0.5
        yield f"neighbor_votes {size}x{size} r=1", "neighbor_votes", (tokens, committed, 9, 1)
        yield f"halton_order {size}x{size}", "halton_order", (size, size, 64 * size * size)


def _best(fn, args, repeat: int) -> float:
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def kernel_table(repeat: int) -> list[tuple[str, float, float]]:
    rng = np.random.default_rng(0)
    rows = []
    for label, name, args in _cases(rng):
        ref = getattr(py, name)(*args)
        if cy is not None:
            got = getattr(cy, name)(*args)
            if not np.array_equal(np.asarray(ref), np.asarray(got)):
                raise SystemExit(f"{label}: backends disagree")
        t_py = _best(getattr(py, name), args, repeat)
        t_cy = _best(getattr(cy, name), args, repeat) if cy is not None else float("nan")
        rows.append((label, t_py, t_cy))
    return rows


_E2E = """
import time, numpy as np
from uncage import ScheduleConfig, Strategy, StrategyConfig, SyntheticMGT, gen_scene, run, BACKEND
t = time.perf_counter()
for s in range(40):
    scene, prompt = gen_scene(np.random.default_rng(s), 16, 16, 2, 0.7, 0.25, noise_sigma=1.0)
    run(SyntheticMGT(scene, prompt), prompt, ScheduleConfig(16, 256), StrategyConfig(Strategy.UNCAGE, seed=s))
print(BACKEND, (time.perf_counter() - t) / 40)
"""


def end_to_end() -> list[str]:
    out = []
    for pure in ("", "1"):
        env = dict(os.environ, UNCAGE_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True, check=True)
        backend, secs = res.stdout.split()
        out.append(f"{'16x16 uncage run':<28} {backend:>8} {float(secs) * 1e3:10.3f} ms")
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not available; timing the numpy fallback only")
    print(f"{'kernel':<28} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for label, t_py, t_cy in kernel_table(args.repeat):
        print(f"{label:<28} {t_py * 1e3:10.3f} {t_cy * 1e3:10.3f} {t_py / t_cy:8.1f}x")
    if args.end_to_end:
        print()
        for line in end_to_end():
            print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
