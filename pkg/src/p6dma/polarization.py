"""Polarforming codebooks, wavefront polarisation bases and port projections."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import Direction, rotation_matrix

E_V = np.array([0.0, 1.0, 0.0])
E_H = np.array([1.0, 0.0, 0.0])

#: fixed prefactor carried by the BS polarforming vector
BS_SCALE = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class QuantizationConfig:
    """Bit widths for polarforming phase and amplitude control.

    ``amplitude_bits == 0`` means phase-only control (amplitude fixed to 1);
    ``phase_bits == 0`` gives a single phase of 0, i.e. amplitude-only control.
    """

    phase_bits: int = 2
    amplitude_bits: int = 2

    def __post_init__(self):
        if self.phase_bits < 0 or self.amplitude_bits < 0:
            raise ValueError("bit widths must be non-negative")

    @property
    def phases(self) -> np.ndarray:
        D = 2 ** self.phase_bits
        return 2.0 * np.pi * np.arange(D) / D

    @property
    def amplitudes(self) -> np.ndarray:
        if self.amplitude_bits == 0:
            return np.ones(1)
        return np.linspace(0.0, 1.0, 2 ** self.amplitude_bits)

    def codebook(self) -> np.ndarray:
        return codebook(self)


def codebook(q: QuantizationConfig) -> np.ndarray:
    """All distinct values ``rho * exp(j theta)``; the zero point appears once.

    Ordered phase-major then amplitude, matching the tie-break order of
    :func:`project_to_codebook`.
    """
    raw = (q.amplitudes[None, :] * np.exp(1j * q.phases)[:, None]).ravel()
    out = []
    seen_zero = False
    for x in raw:
        if x == 0:
            if seen_zero:
                continue
            seen_zero = True
        out.append(x)
    return np.array(out, dtype=complex)


def project_to_codebook(target, q: QuantizationConfig, scale: float = 1.0):
    """Sequential phase-then-amplitude quantisation of ``target``.

    Each element first snaps its phase to the nearest codebook phase (circular
    distance), then picks the amplitude that minimises the distance to the
    target along that phase. Ties resolve to the smaller phase and then the
    smaller amplitude. ``scale`` is a fixed prefactor applied outside the
    codebook (``BS_SCALE`` for the BS vector).
    """
    x = np.asarray(target, dtype=complex)
    flat = np.ascontiguousarray(x.ravel() / scale)
    out = kernels.project_codebook(flat, q.phases, q.amplitudes) * scale
    if x.ndim == 0:
        return complex(out[0])
    return out.reshape(x.shape)


def polarization_basis(d: Direction) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal wavefront basis ``(z, z_bar)`` for direction ``d``."""
    z, zb = polarization_bases(d.theta, d.phi)
    return z, zb


def polarization_bases(theta, phi) -> tuple[np.ndarray, np.ndarray]:
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    z = np.stack([st * sp, -ct, st * cp], axis=-1)
    zb = np.stack([cp, np.zeros_like(cp), -sp], axis=-1)
    return z, zb


def _projection(R: np.ndarray, z: np.ndarray, zb: np.ndarray) -> np.ndarray:
    # rows: z / z_bar; columns: V / H element mapped to the global frame
    rv = R[..., :, 1]
    rh = R[..., :, 0]
    P = np.empty(np.broadcast_shapes(rv.shape, z.shape)[:-1] + (2, 2))
    P[..., 0, 0] = np.sum(rv * z, axis=-1)
    P[..., 0, 1] = np.sum(rh * z, axis=-1)
    P[..., 1, 0] = np.sum(rv * zb, axis=-1)
    P[..., 1, 1] = np.sum(rh * zb, axis=-1)
    return P


def tx_projection(u, d: Direction) -> np.ndarray:
    z, zb = polarization_basis(d)
    return _projection(rotation_matrix(u), z, zb)


def rx_projection(u_r, d: Direction) -> np.ndarray:
    z, zb = polarization_basis(d)
    return _projection(rotation_matrix(u_r), z, zb).T


def depolarization_matrix(u, u_r, d: Direction) -> np.ndarray:
    """Real 2x2 port coupling ``A = Q(u_r) P(u)`` for one user."""
    return rx_projection(u_r, d) @ tx_projection(u, d)


def depolarization_matrices(u, user_rotations, theta, phi) -> np.ndarray:
    """Batched :func:`depolarization_matrix` for K users, shape (K, 2, 2)."""
    z, zb = polarization_bases(theta, phi)
    P = _projection(rotation_matrix(u)[None], z, zb)
    Q = np.swapaxes(_projection(rotation_matrix(np.asarray(user_rotations, dtype=float)), z, zb), -1, -2)
    return Q @ P
