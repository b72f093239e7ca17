"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from detgrasp import _fallback
from detgrasp.geometry import GraspPose, pose_to_rect

try:
    from detgrasp import _core
except ImportError:
    _core = None


def cases(rng):
    x = rng.standard_normal((16, 64, 64))
    w = rng.standard_normal((16, 16, 3, 3))
    b = rng.standard_normal(16)
    g = rng.standard_normal((16, 64, 64))
    sam_x = rng.standard_normal((2, 64, 64))
    sam_w = rng.standard_normal((1, 2, 7, 7))
    sam_g = rng.standard_normal((1, 64, 64))
    rects = [pose_to_rect(GraspPose(*rng.uniform(0, 10, 2), rng.uniform(-1.5, 1.5), 5.0, 0.5)).vertices
             for _ in range(200)]
    return {
        "conv2d fwd 16x64x64 k3 d2": lambda m: m.conv2d_forward(x, w, b, 2, 2, 2, 2),
        "conv2d bwd 16x64x64 k3 d2": lambda m: m.conv2d_backward(g, x, w, 2, 2, 2, 2),
        "conv2d fwd SAM 7x7": lambda m: m.conv2d_forward(sam_x, sam_w, np.zeros(1), 3, 3, 1, 1),
        "conv2d bwd SAM 7x7": lambda m: m.conv2d_backward(sam_g, sam_x, sam_w, 3, 3, 1, 1),
        "polygon clip x200": lambda m: [m.convex_intersection_area(a, c) for a, c in zip(rects, rects[1:])],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = [("python", _fallback)] + ([("cython", _core)] if _core is not None else [])
    print(f"{'case':28s}" + "".join(f"{n:>12s}" for n, _ in impls) + ("     speedup" if len(impls) == 2 else ""))
    for name, fn in cases(np.random.default_rng(0)).items():
        times = [min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat)) for _, m in impls]
        row = f"{name:28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
