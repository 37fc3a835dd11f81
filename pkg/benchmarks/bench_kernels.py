"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py --n 64 --repeat 3
"""
import argparse
import time

from stochbench import _backend
from stochbench.cim import CimFixedParams, CimParams, run_cim
from stochbench.instances import WishartSpec, generate_wishart
from stochbench.pt import PtParams, run_pt


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--n", type=int, default=64, help="spins per instance")
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--replicas", type=int, default=8)
    parser.add_argument("--sweeps", type=int, default=50)
    parser.add_argument("--cim-steps", type=int, default=1000)
    parser.add_argument("--shots", type=int, default=2)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    inst = generate_wishart(WishartSpec(args.n, args.alpha, seed=0, count=1))[0]
    pt_params = PtParams(args.replicas, args.sweeps, 0.5, 0.5)
    cim_fixed = CimFixedParams(steps=args.cim_steps)
    spin_updates = args.shots * args.replicas * args.sweeps * args.n

    results = {}
    for name in _backend.available():
        k = _backend.load(name)
        pt_s = best_time(lambda: run_pt(inst, pt_params, args.shots, 1, kernels=k), args.repeat)
        cim_s = best_time(lambda: run_cim(inst, CimParams(), cim_fixed, args.shots, 1, kernels=k), args.repeat)
        results[name] = (pt_s, cim_s)

    print(f"n={args.n} pt: {args.shots} shots x {args.replicas} replicas x {args.sweeps} sweeps, "
          f"cim: {args.shots} shots x {args.cim_steps} steps")
    print(f"{'backend':<8} {'pt [s]':>10} {'flips/s':>12} {'cim [s]':>10} {'steps/s':>12}")
    for name, (pt_s, cim_s) in results.items():
        print(f"{name:<8} {pt_s:>10.4f} {spin_updates / pt_s:>12.3g} {cim_s:>10.4f} "
              f"{args.shots * args.cim_steps / cim_s:>12.3g}")
    if "cython" in results:
        (pc, cc), (pp, cp) = results["cython"], results["python"]
        print(f"speedup: pt {pp / pc:.1f}x, cim {cp / cc:.1f}x")


if __name__ == "__main__":
    main()
