"""Compiled vs pure-Python arc kernels.

Times the hot kernels on each curve kind, then one end-to-end multi-scale
decomposition per backend (run in a subprocess so the backend is chosen at
import). Usage: ``python benchmarks/bench_kernels.py [--repeat N]``.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

from convdec.kernels import available_backends

CASES = {
    "poly": (0, (0.0, 0.0, 0.5)),
    "cantor": (1, (1.0 / 3.0, 12.0)),
    "pl": (2, (5.0, 0.0, 0.2, 0.5, 0.8, 1.0, 0.0, 0.0, 0.06, 0.21, 0.35)),
}
SIM = (3.0, 0.8, -0.6, 0.1, 0.05)

END_TO_END = """
import json, time
from convdec import kernels
from convdec.corpus import corpus_curve
from convdec.decomposition import piece_trees
t0 = time.perf_counter()
piece_trees(corpus_curve({name!r}, {R}), {R}, {eps})
print(json.dumps({{"backend": kernels.BACKEND, "seconds": time.perf_counter() - t0}}))
"""


def kernel_rows(repeat: int):
    rows = []
    for name, mod in available_backends().items():
        for case, (kind, params) in CASES.items():
            p = mod.pack(params)
            calls = {
                "bending": lambda: mod.bending(kind, p, SIM, 0.1, 0.7),
                "sup_bending": lambda: mod.sup_bending(kind, p, SIM, 0.1, 0.1, 1.0, 0.01, 60),
                "cap_edge": lambda: mod.cap_edge(kind, p, SIM, 0.4, 0.3, 1e-3, 0.4, 1.0, 60),
            }
            for fn, call in calls.items():
                n = 2000 if fn == "bending" else 200
                best = min(timeit.repeat(call, number=n, repeat=repeat)) / n
                rows.append({"backend": name, "curve": case, "kernel": fn, "us_per_call": best * 1e6})
    return rows


def end_to_end(name="cantor", R=2 ** 10, eps=0.2):
    out = {}
    for pure in ("0", "1"):
        env = dict(os.environ, CONVDEC_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", END_TO_END.format(name=name, R=R, eps=eps)],
                             env=env, capture_output=True, text=True, check=True)
        rec = json.loads(res.stdout)
        out[rec["backend"]] = rec["seconds"]
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args()
    rows = kernel_rows(args.repeat)
    print(f"{'kernel':12s} {'curve':7s} " + " ".join(f"{b:>12s}" for b in available_backends()))
    for case in CASES:
        for fn in ("bending", "sup_bending", "cap_edge"):
            vals = [r["us_per_call"] for r in rows if r["curve"] == case and r["kernel"] == fn]
            print(f"{fn:12s} {case:7s} " + " ".join(f"{v:10.2f}us" for v in vals))
    if not args.skip_end_to_end:
        e2e = end_to_end()
        print("multi-scale trees, cantor R=2^10 eps=1/5: "
              + ", ".join(f"{k} {v:.2f}s" for k, v in sorted(e2e.items())))
        if "cython" in e2e and "python" in e2e:
            print(f"speedup {e2e['python'] / e2e['cython']:.1f}x")


if __name__ == "__main__":
    main()
