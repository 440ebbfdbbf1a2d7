"""Compiled kernels vs the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` time per call for each kernel, a full block
sweep and a complete solve, together with the speed-up of the compiled
backend. Exits early when the extension is not built.
"""
import argparse
import timeit

import numpy as np

from p6dma import _core_py
from p6dma.channel import ChannelSet
from p6dma.polarization import BS_SCALE, QuantizationConfig, depolarization_matrices
from p6dma.wmmse_pdd import SolverConfig, bcd_sweep, initial_state, solve

try:
    from p6dma import _core
except ImportError:
    _core = None


def random_channels(rng, K, N):
    hlos = (rng.normal(size=(K, N)) + 1j * rng.normal(size=(K, N))) / np.sqrt(2)
    depol = depolarization_matrices(rng.uniform(0, 6, 3), rng.uniform(0, 6, (K, 3)),
                                    rng.uniform(-1, 1, K), rng.uniform(-3, 3, K))
    return ChannelSet(hlos, np.ascontiguousarray(depol), np.ones(K))


def best(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--users", type=int, default=8)
    ap.add_argument("--antennas", type=int, default=16)
    args = ap.parse_args()
    if _core is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    q = QuantizationConfig(2, 2)
    K, N = args.users, args.antennas
    ch = random_channels(rng, K, N)
    cfg = SolverConfig(power_budget=1.0, noise_power=0.1)

    z = np.ascontiguousarray((rng.normal(size=2 * K) + 1j * rng.normal(size=2 * K)))
    lam = np.sort(rng.uniform(0.01, 10, N))
    p = rng.uniform(0, 1, N)
    A = rng.normal(size=(K, 2, 2)) + 1j * rng.normal(size=(K, 2, 2))
    C = np.ascontiguousarray(A @ A.conj().transpose(0, 2, 1) + np.eye(2))
    b = np.ascontiguousarray(rng.normal(size=(K, 2)) + 0j)

    # sweeps run repeatedly on one evolving state per backend
    s_py, s_c = initial_state(ch, cfg, q), initial_state(ch, cfg, q)

    def sweep_py():
        bcd_sweep(s_py, ch, cfg, q)

    def sweep_c():
        s = s_c
        _core.pdd_sweep(ch.hlos, ch.depol, ch.weights, s.w, s.w_bar, s.v, s.v_bar, s.xi, s.eps, s.c, s.t,
                        s.t_bar, s.mu, cfg.noise_power, cfg.power_budget, q.phases, q.amplitudes, BS_SCALE, True)

    cases = [
        ("project_codebook", lambda: _core_py.project_codebook(z, q.phases, q.amplitudes),
         lambda: _core.project_codebook(z, q.phases, q.amplitudes), 2000),
        ("precoder_eta", lambda: _core_py.precoder_eta(lam, p, 0.5), lambda: _core.precoder_eta(lam, p, 0.5), 2000),
        ("solve_2x2", lambda: _core_py.solve_2x2(C, b), lambda: _core.solve_2x2(C, b), 2000),
        ("block sweep", sweep_py, sweep_c, 200),
        ("solve", lambda: solve(ch, cfg, q, record_trace=False, compiled=False),
         lambda: solve(ch, cfg, q, record_trace=False, compiled=True), 5),
    ]
    print(f"K={K} N={N}")
    print(f"{'kernel':<18}{'python':>14}{'compiled':>14}{'speed-up':>10}")
    for name, py, c, n in cases:
        tp, tc = best(py, n, args.repeat), best(c, n, args.repeat)
        print(f"{name:<18}{tp * 1e6:>11.1f} us{tc * 1e6:>11.1f} us{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
