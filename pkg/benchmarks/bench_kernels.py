"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Results of both backends are also compared for bit equality.
"""
import argparse
import timeit

from tsbapc import kernels

CASES = [
    ("phi_sum t=20", "phi_sum", (20, 1.3, -0.6)),
    ("phi_sum t=60", "phi_sum", (60, 1.3, -0.6)),
    ("phi_recursion t=200", "phi_recursion", (200, 1.3, -0.6)),
    ("gamma_sum 10,10", "gamma_sum", (10, 10, 1.2, -0.2, -0.5, 0.1)),
    ("ar2_ig_sums t=20", "ar2_ig_sums", (20, 1.1, -0.5, 0.2, -0.1, 1.0, 0.4)),
    ("ar2_ig_sums t=40", "ar2_ig_sums", (40, 1.1, -0.5, 0.2, -0.1, 1.0, 0.4)),
    ("ar2_ig_sums t=60", "ar2_ig_sums", (60, 1.1, -0.5, 0.2, -0.1, 1.0, 0.4)),
    ("ar2_value_grad t=60", "ar2_value_grad", (60, 1.1, -0.5, 1.0, 0.4)),
    ("nearest_index 1000", "nearest_index", (tuple(float(i) for i in range(1000)), 617.4)),
]


def best_time(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels are not built; only the fallback will be timed")
    mods = {b: kernels.load_backend(b) for b in backends}
    head = f"{'kernel':<22}" + "".join(f"{b + ' (us)':>14}" for b in backends)
    if len(backends) == 2:
        head += f"{'speedup':>10}{'same':>6}"
    print(head)
    for label, name, fargs in CASES:
        times = [best_time(getattr(mods[b], name), fargs, args.repeat) * 1e6 for b in backends]
        line = f"{label:<22}" + "".join(f"{t:>14.2f}" for t in times)
        if len(backends) == 2:
            same = getattr(mods["cython"], name)(*fargs) == getattr(mods["python"], name)(*fargs)
            line += f"{times[1] / times[0]:>9.1f}x{'yes' if same else 'NO':>6}"
        print(line)


if __name__ == "__main__":
    main()
