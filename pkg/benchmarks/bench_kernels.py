"""Time each hot kernel under the compiled and the pure-Python backend.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from viewil.kernels import available_backends


def workloads(rng):
    t = np.arange(400) / 20.0
    pos = np.cumsum(rng.normal(0, 0.01, (400, 3)), axis=0)
    pinned = np.zeros(400, dtype=bool)
    pts = rng.random((3000, 3))
    init = pts[rng.choice(3000, 30, replace=False)]
    cand = rng.random((1024, 3))
    hist = rng.random((60, 3))
    mean, sd = rng.normal(size=1024), np.abs(rng.normal(size=1024))
    wps = rng.uniform((0.1, -0.4, 0.05), (0.9, 0.4, 0.45), (40, 3))
    contact = np.arange(40) >= 19
    return {
        "squishe_select (400 pts)": lambda k: k.squishe_select(pos, t, pinned, -1, 0.01),
        "lloyd (3000 pts, k=30)": lambda k: k.lloyd(pts, init, 100),
        "se_cross (1024x60)": lambda k: k.se_cross(cand, hist, 0.2),
        "expected_improvement (1024)": lambda k: k.expected_improvement(mean, sd, 0.5),
        "rollout_core (40 wps)": lambda k: k.rollout_core(wps, contact, (0.5, 0.0, 0.04), 0.04, 0.08, 0.02,
                                                          0.04, False, (0, -0.5, 0), (1, 0.5, 0.5)),
        "sed (scalar)": lambda k: k.sed(0, 0, 0, 0, 1, 1, 0, 1, 2, 0, 0, 2),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = available_backends()
    rng = np.random.default_rng(0)
    jobs = workloads(rng)
    names = list(backends)
    print(f"{'kernel':32s}" + "".join(f"{n:>14s}" for n in names) + ("   speedup" if len(names) > 1 else ""))
    for label, fn in jobs.items():
        times = []
        for n in names:
            k = backends[n]
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(k), number=1), 1e-7)))
            best = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
            times.append(best)
        row = f"{label:32s}" + "".join(f"{t * 1e6:12.1f}us" for t in times)
        if len(times) > 1:
            row += f"   {times[0] / times[1]:7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
