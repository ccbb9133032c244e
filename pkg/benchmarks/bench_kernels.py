"""Compare the compiled and pure-Python kernel backends.

Times batch evaluation of a compiled expression, single-point evaluation and a
fixed-step RK4 flow, and checks that the two backends agree to round-off.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from condsym import kernels
from condsym.numerics import ProgramField
from condsym.symcore import compile_program, parse

EXPR = "ln(x0 + x1^2)*sqrt(x2) - exp(x0/3)/x1 + abs(x2 - 1)^(3/2) + x0^3*x3"
FLOW = ("-x1 + x0*x2/10", "x0 + x3^2/20", "x0*x1/5", "exp(-x2)")


def cases(n_batch: int):
    rng = np.random.default_rng(0)
    prog = compile_program(parse(EXPR), ["x0", "x1", "x2", "x3"])
    X = np.ascontiguousarray(rng.uniform(0.5, 2.0, (n_batch, 4)))
    field = ProgramField([compile_program(parse(t), ["x0", "x1", "x2", "x3"]) for t in FLOW])
    y0 = np.array([1.0, 0.5, 0.2, 0.1])
    return {
        f"eval_batch ({n_batch} pts)": lambda m: m.eval_batch(prog.code, prog.consts, X)[0],
        "eval_one x1000": lambda m: [m.eval_one(prog.code, prog.consts, X[i % len(X)])[0] for i in range(1000)][-1],
        "rk4 (2000 steps)": lambda m: m.rk4(field.codes, field.offsets, field.consts, field.coffsets, y0, 1.0, 2000)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=20000)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    print(f"selected backend: {kernels.BACKEND}; available: {', '.join(backends)}")
    for name, fn in cases(args.batch).items():
        times, results = {}, {}
        for bname, mod in backends.items():
            results[bname] = np.asarray(fn(mod))
            times[bname] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        ref = results["python"]
        agree = all(np.allclose(r, ref, rtol=1e-12, atol=1e-14) for r in results.values())
        cols = "  ".join(f"{b}={t * 1e3:9.2f} ms" for b, t in times.items())
        speed = f"  speedup x{times['python'] / times['cython']:.1f}" if "cython" in times else ""
        print(f"{name:24s} {cols}{speed}  agree={agree}")


if __name__ == "__main__":
    main()
