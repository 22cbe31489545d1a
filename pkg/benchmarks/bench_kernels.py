"""Compare the compiled and pure-numpy pair kernels.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--dims 8 32 64]

Times one pair-graph forward, one forward+reverse pass, and a full B x B
batch gradient per backend, and checks the backends agree.
"""
import argparse
import time

import numpy as np

from lean_tvr import kernels
from lean_tvr.hypergraph import pair_structure
from lean_tvr.numerics import SeededRng
from lean_tvr.params import init_params
from lean_tvr.pipeline import loss_and_grad


def _time(fn, repeat):
    fn()
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_pair(dim, words, frames, repeat, backends):
    params = init_params(dim, 16, 16, 2, seed=0)
    kp = kernels.KernelParams.from_params(params)
    st = pair_structure(words, frames)
    gen = np.random.default_rng(0)
    x0 = gen.standard_normal((st.n_nodes, dim))
    eps = gen.standard_normal((st.n_nodes, dim))
    rows, ref = [], None
    for b in backends:
        fwd = _time(lambda: kernels.pair_forward(x0, st, kp, eps, b), repeat)
        gk = kp.zeros_like()
        grad = _time(lambda: kernels.pair_grad(x0, st, kp, eps, 1.0, 0.1, gk, b), repeat)
        score = kernels.pair_forward(x0, st, kp, eps, b)[0]
        ref = score if ref is None else ref
        rows.append((b, fwd, grad, abs(score - ref)))
    return rows


def bench_batch(dim, batch, repeat, backends):
    params = init_params(dim, 64, 64, 2, seed=0)
    gen = np.random.default_rng(1)
    texts = [gen.standard_normal((3, 64)) for _ in range(batch)]
    videos = [gen.standard_normal((6, 64)) for _ in range(batch)]
    return [(b, _time(lambda: loss_and_grad(texts, videos, params, rng=SeededRng(0), backend=b),
                      repeat)) for b in backends]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--dims", type=int, nargs="+", default=[8, 32, 64])
    ap.add_argument("--batch", type=int, default=8)
    a = ap.parse_args()
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'dim':>4} {'backend':>8} {'forward us':>11} {'fwd+bwd us':>11} {'|ds|':>9}")
    for d in a.dims:
        rows = bench_pair(d, 3, 6, a.repeat, backends)
        base = {r[0]: r for r in rows}.get("python")
        for b, fwd, grad, diff in rows:
            speed = "" if base is None or b == "python" else \
                f"  ({base[1] / fwd:.1f}x / {base[2] / grad:.1f}x)"
            print(f"{d:>4} {b:>8} {fwd * 1e6:>11.1f} {grad * 1e6:>11.1f} {diff:>9.1e}{speed}")
    print(f"\nbatch loss_and_grad, B={a.batch}, dim=32")
    for b, t in bench_batch(32, a.batch, max(1, a.repeat // 50), backends):
        print(f"{b:>8} {t * 1e3:>9.1f} ms")


if __name__ == "__main__":
    main()
