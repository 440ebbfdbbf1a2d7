"""Coordinate frames, rotation matrices and BS array layout.

Angles follow the x/y/z rotation convention used throughout the package: a
rotation vector ``u = (alpha, beta, gamma)`` holds the rotation angles about
the global x, y and z axes. Local vectors map to the global frame through
``R(u)`` and global vectors map back through ``R(u).T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RotationAngles:
    """Rotation about the global x, y and z axes (radians, wrapped to [0, 2pi))."""

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            object.__setattr__(self, name, float(np.mod(getattr(self, name), TWO_PI)))

    @classmethod
    def from_array(cls, u) -> "RotationAngles":
        a, b, g = np.asarray(u, dtype=float).reshape(3)
        return cls(a, b, g)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma])


@dataclass(frozen=True)
class Direction:
    """Elevation ``theta`` in [-pi/2, pi/2] and azimuth ``phi`` in [-pi, pi]."""

    theta: float
    phi: float


def _angles(u) -> np.ndarray:
    if isinstance(u, RotationAngles):
        return u.as_array()
    return np.asarray(u, dtype=float)


def rotation_matrix(u) -> np.ndarray:
    """Return the 3x3 rotation matrix for rotation angles ``u``.

    ``u`` may be a :class:`RotationAngles` or any array of shape ``(..., 3)``;
    batched input yields an array of shape ``(..., 3, 3)``.
    """
    u = _angles(u)
    ca, cb, cg = np.cos(u[..., 0]), np.cos(u[..., 1]), np.cos(u[..., 2])
    sa, sb, sg = np.sin(u[..., 0]), np.sin(u[..., 1]), np.sin(u[..., 2])
    R = np.empty(u.shape[:-1] + (3, 3))
    R[..., 0, 0] = cb * cg
    R[..., 0, 1] = cb * sg
    R[..., 0, 2] = -sb
    R[..., 1, 0] = sb * sa * cg - ca * sg
    R[..., 1, 1] = sb * sa * sg + ca * cg
    R[..., 1, 2] = cb * sa
    R[..., 2, 0] = ca * sb * cg + sa * sg
    R[..., 2, 1] = ca * sb * sg - sa * cg
    R[..., 2, 2] = ca * cb
    return R


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna positions of the BS array in its local frame (meters, shape (N, 3))."""

    local_positions: np.ndarray
    spacing: float = 0.0

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.local_positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError(f"local_positions must have shape (N, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("antenna positions must be finite")
        object.__setattr__(self, "local_positions", pos)

    @property
    def num_antennas(self) -> int:
        return self.local_positions.shape[0]

    @classmethod
    def upa(cls, num_antennas: int, spacing: float) -> "ArrayGeometry":
        """Uniform planar array centred on the local origin.

        The array lies in the local y-z plane so that its boresight is the
        local +x axis. Elements are indexed row-major, rows along z and
        columns along y; the row count is the largest divisor of ``N`` not
        exceeding sqrt(N).
        """
        if num_antennas < 1:
            raise ValueError("num_antennas must be >= 1")
        rows = max(d for d in range(1, int(np.sqrt(num_antennas)) + 1) if num_antennas % d == 0)
        cols = num_antennas // rows
        zz = (np.arange(rows) - (rows - 1) / 2.0) * spacing
        yy = (np.arange(cols) - (cols - 1) / 2.0) * spacing
        pos = np.zeros((num_antennas, 3))
        pos[:, 1] = np.tile(yy, rows)
        pos[:, 2] = np.repeat(zz[::-1], cols)
        return cls(pos, spacing)


def global_antenna_positions(geom: ArrayGeometry, u) -> np.ndarray:
    """Positions ``R(u) r_n`` of every antenna in the global frame, shape (N, 3)."""
    return geom.local_positions @ rotation_matrix(u).T


def pointing_vector(d: Direction) -> np.ndarray:
    ct = np.cos(d.theta)
    return np.array([ct * np.cos(d.phi), ct * np.sin(d.phi), np.sin(d.theta)])


def pointing_vectors(theta, phi) -> np.ndarray:
    """Vectorised :func:`pointing_vector`; returns shape ``theta.shape + (3,)``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ct = np.cos(theta)
    return np.stack([ct * np.cos(phi), ct * np.sin(phi), np.sin(theta)], axis=-1)


def direction_of(f) -> Direction:
    """Spherical decomposition of a unit vector; azimuth is 0 at the poles."""
    f = np.asarray(f, dtype=float)
    rho = np.hypot(f[0], f[1])
    theta = float(np.arctan2(f[2], rho))
    if rho <= 1e-15:
        return Direction(theta, 0.0)
    return Direction(theta, float(np.arctan2(f[1], f[0])))


def local_doa(u, f) -> Direction:
    """Direction of the global unit vector ``f`` seen from the rotated array frame."""
    f_local = rotation_matrix(u).T @ np.asarray(f, dtype=float)
    return direction_of(f_local)
