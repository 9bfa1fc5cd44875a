"""Time the numba kernel against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--followers 9 49] [--duration 240]

Both paths are run on the same seeded scenario; the traces are checked for
bitwise equality before timings are reported.
"""

import argparse
import statistics
import time

from cacc_dift._accel import HAVE_NUMBA
from cacc_dift.comm import LinkModel
from cacc_dift.sim import PlatoonConfig, run, synthetic_leader


def timed(cfg, leader, use_numba, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        trace, _ = run(cfg, leader, use_numba=use_numba)
        times.append(time.perf_counter() - t0)
    return trace, times


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--followers", type=int, nargs="+", default=[9, 49])
    ap.add_argument("--duration", type=float, default=240.0)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba disabled or missing; unset CACC_DIFT_DISABLE_NUMBA to compare")

    leader = synthetic_leader("oscillating", duration=args.duration)
    t0 = time.perf_counter()
    run(PlatoonConfig(n_followers=2), leader.truncated(1.0), use_numba=True)
    print(f"numba warm-up (compile or cache load): {time.perf_counter() - t0:.3f} s")

    print(f"{'followers':>9} {'steps':>6} {'numba ms':>9} {'numpy ms':>9} {'speedup':>8}")
    for n in args.followers:
        cfg = PlatoonConfig(n_followers=n, link_model=LinkModel(d_half=40.0 * n), seed=1)
        tr_nb, t_nb = timed(cfg, leader, True, args.repeat)
        tr_np, t_np = timed(cfg, leader, False, args.repeat)
        assert tr_nb.equals(tr_np), "numba and numpy traces differ"
        a, b = statistics.median(t_nb), statistics.median(t_np)
        print(f"{n:>9} {len(leader):>6} {1e3 * a:>9.2f} {1e3 * b:>9.2f} {b / a:>7.1f}x")


if __name__ == "__main__":
    main()
