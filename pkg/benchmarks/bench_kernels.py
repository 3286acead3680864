"""Time the compiled and pure-numpy MLP kernels on training-sized ensembles.

    python benchmarks/bench_kernels.py [--repeat 200] [--hidden 64,64]

Prints one line per (kernel, shape) with the median time per call for each
backend and the speed-up of the compiled one.  Both backends are also
checked to agree on the outputs before timing.
"""
import argparse
import statistics
import time

import numpy as np

from csirl.diffnet import MLPSpec, _pykernels

try:
    from csirl.diffnet import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def median_time(fn, repeat, warmup=50):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cases(hidden):
    # (label, input dim, output dim, ensemble size, batch)
    yield "critic pool", 6, 1, 5, 64
    yield "actor", 4, 4, 1, 64
    yield "actor eval", 4, 4, 1, 20
    yield "merge critic pool", 18, 1, 5, 64


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=200)
    p.add_argument("--hidden", default="64,64")
    args = p.parse_args(argv)
    hidden = tuple(int(h) for h in args.hidden.split(","))
    if _ckernels is None:
        print("compiled kernels unavailable; build with `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'case':<18s} {'kernel':<9s} {'python us':>10s} {'cython us':>10s} {'speed-up':>9s}")
    for label, d_in, d_out, n, B in cases(hidden):
        spec = MLPSpec(d_in, hidden, d_out)
        P = np.ascontiguousarray(spec.init(rng, n))
        x = np.ascontiguousarray(rng.normal(size=(n, B, d_in)))
        g = np.ascontiguousarray(rng.normal(size=(n, B, d_out)))
        acts_py = _pykernels.forward(P, spec.sizes, spec.act_id, x)
        acts_c = _ckernels.forward(P, spec.sizes, spec.act_id, x)
        np.testing.assert_allclose(acts_c[-1], acts_py[-1], atol=1e-10)
        timings = {
            "forward": (lambda: _pykernels.forward(P, spec.sizes, spec.act_id, x),
                        lambda: _ckernels.forward(P, spec.sizes, spec.act_id, x)),
            "backward": (lambda: _pykernels.backward(P, spec.sizes, spec.act_id, acts_py, g, True),
                         lambda: _ckernels.backward(P, spec.sizes, spec.act_id, acts_c, g, True)),
        }
        for kernel, (py, cy) in timings.items():
            t_py = median_time(py, args.repeat)
            t_cy = median_time(cy, args.repeat)
            print(f"{label:<18s} {kernel:<9s} {t_py * 1e6:10.1f} {t_cy * 1e6:10.1f} "
                  f"{t_py / t_cy:8.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
