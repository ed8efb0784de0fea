"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from boxseg import kernels


def cases(rng):
    soft = rng.random((352, 352))
    grad = rng.normal(size=(352, 352))
    blobs = (rng.random((352, 352)) < 0.45).astype(np.uint8)
    pred = (rng.random((64, 96, 96)) < 0.5).astype(np.uint8)
    gt = (rng.random((64, 96, 96)) < 0.5).astype(np.uint8)
    return {
        "m2b 352x352": lambda k: k.m2b(soft),
        "m2b_backward 352x352": lambda k: k.m2b_backward(soft, grad),
        "component_boxes 352x352": lambda k: k.component_boxes(blobs),
        "overlap_counts 64x96x96": lambda k: k.overlap_counts(pred, gt),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    names = sorted(backends)
    print(f"{'kernel':28s}" + "".join(f"{n:>14s}" for n in names) + f"{'speedup':>10s}")
    for label, fn in cases(rng).items():
        times = {}
        for name in names:
            mod = backends[name]
            fn(mod)
            times[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        ratio = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:28s}" + "".join(f"{times[n] * 1e3:12.3f}ms" for n in names) + f"{ratio:9.1f}x")


if __name__ == "__main__":
    main()
