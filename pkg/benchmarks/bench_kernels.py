"""Compiled vs pure-Python image-source traversal.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Both
backends must return the same image set; the script checks that before
timing.
"""
import argparse
import time

import numpy as np

from bmldroom import _kernels
from bmldroom.room import compute_image_sources, lab_receiver, lab_room, pose_at

CASES = (  # (label, max_order, max_time)
    ("order 4", 4, None),
    ("order 6", 6, None),
    ("75 ms, order 8", 8, 0.0775),
)


def _best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    room = lab_room(0.1)
    rec = lab_receiver(room)
    src = pose_at(rec, (0.0, 1.0, 0.0), 0.0, 5.0)
    have_ext = _kernels.ism_traverse_ext is not None
    print(f"{'case':<16}{'images':>8}{'python s':>12}{'compiled s':>12}{'speedup':>9}")
    for label, order, tmax in CASES:
        def run(backend):
            return compute_image_sources(room, src, rec, order, max_time=tmax, backend=backend)
        t_py, ref = _best_of(lambda: run("python"), args.repeat)
        if have_ext:
            t_ext, got = _best_of(lambda: run("compiled"), args.repeat)
            assert len(got) == len(ref) and np.allclose(got.positions, ref.positions, atol=1e-9)
            print(f"{label:<16}{len(ref):>8}{t_py:>12.4f}{t_ext:>12.4f}{t_py / t_ext:>8.1f}x")
        else:
            print(f"{label:<16}{len(ref):>8}{t_py:>12.4f}{'n/a':>12}{'':>9}")


if __name__ == "__main__":
    main()
