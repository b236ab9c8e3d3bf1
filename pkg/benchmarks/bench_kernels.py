"""Compare the compiled and pure-numpy alignment kernels.

Times ``best_shift``, ``best_rotation`` and a full ``icf_run`` descent on
synthetic noisy copies of the built-in template, checks that both backends
return the same answer, and prints a table of per-call times and speedups.

    python benchmarks/bench_kernels.py [--n 50] [--sigma 0.5] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from multishape.deformation import BISECT_XTOL, scan_size
from multishape.kernels import available_backends
from multishape.synth import SynthConfig, builtin_template, center_template, generate


def cases(n, sigma, seed):
    template = center_template(builtin_template())
    tpl = template.coef / np.sqrt(np.sum(template.coef**2))
    sample = generate(SynthConfig(template, n=n, sigma=sigma, seed=seed))
    rng = np.random.default_rng(seed)
    return tpl, [x.coef for x in sample.preshapes], rng.random((n, tpl.shape[0]))


def workloads(k, tpl, targets, starts):
    M = tpl.shape[2] - 1
    n_scan = scan_size(M)
    stats = [k.shift_stats(tpl, c, 0.3) for c in targets]

    def shift():
        return [k.best_shift(tr[0], sk[0], n_scan, BISECT_XTOL)[0] for tr, sk in stats]

    def rotation():
        return [k.best_rotation(tpl, c, d)[0] for c, d in zip(targets, starts)]

    def icf():
        return [k.icf_run(tpl, c, d, 1e-10, 100, n_scan, BISECT_XTOL)[2] for c, d in zip(targets, starts)]

    return {"best_shift": shift, "best_rotation": rotation, "icf_run": icf}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50, help="number of curves")
    ap.add_argument("--sigma", type=float, default=0.5)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    tpl, targets, starts = cases(args.n, args.sigma, args.seed)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the python backend only")

    timings, results = {}, {}
    for name, mod in backends.items():
        for kernel, fn in workloads(mod, tpl, targets, starts).items():
            results[name, kernel] = np.asarray(fn())
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            timings[name, kernel] = best / args.n

    print(f"{'kernel':<14}{'backend':<9}{'per call':>12}{'speedup':>10}")
    for kernel in ("best_shift", "best_rotation", "icf_run"):
        base = timings["python", kernel]
        for name in backends:
            t = timings[name, kernel]
            print(f"{kernel:<14}{name:<9}{t * 1e6:>10.1f}us{base / t:>9.1f}x")
        if "cython" in backends:
            gap = np.max(np.abs(results["python", kernel] - results["cython", kernel]))
            print(f"{'':<14}max |python - cython| = {gap:.1e}")


if __name__ == "__main__":
    main()
