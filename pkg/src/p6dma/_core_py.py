"""Pure-numpy implementations of the hot kernels.

Signatures and results match the compiled ``_core`` module exactly; this
module is used when the extension is unavailable or ``P6DMA_PURE_PYTHON`` is
set.
"""
import numpy as np

_TWO_PI = 2.0 * np.pi


def project_codebook(targets, phases, amps):
    x = np.asarray(targets, dtype=complex)
    ang = np.angle(x)
    dist = np.abs(np.mod(ang[:, None] - phases[None, :] + np.pi, _TWO_PI) - np.pi)
    # argmin returns the first index on ties
    ph = phases[np.argmin(dist, axis=1)]
    proj = (x * np.exp(-1j * ph)).real
    rho = amps[np.argmin((amps[None, :] - proj[:, None]) ** 2, axis=1)]
    return rho * np.exp(1j * ph)


def precoder_eta(lam, p, zeta, max_iter=200):
    lam = np.asarray(lam, dtype=float)
    p = np.asarray(p, dtype=float)
    total = p.sum()
    if total <= 0.0:
        return 0.0
    if np.all(lam > 0) and np.sum(p / lam**2) <= zeta:
        return 0.0
    lo, hi = 0.0, np.sqrt(total / zeta)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if np.sum(p / (lam + mid) ** 2) > zeta:
            lo = mid
        else:
            hi = mid
    return hi


def solve_2x2(C, b):
    C = np.asarray(C, dtype=complex)
    b = np.asarray(b, dtype=complex)
    det = C[:, 0, 0] * C[:, 1, 1] - C[:, 0, 1] * C[:, 1, 0]
    out = np.empty_like(b)
    out[:, 0] = (C[:, 1, 1] * b[:, 0] - C[:, 0, 1] * b[:, 1]) / det
    out[:, 1] = (C[:, 0, 0] * b[:, 1] - C[:, 1, 0] * b[:, 0]) / det
    return out
