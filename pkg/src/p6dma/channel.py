"""Line-of-sight channel between the rotatable BS array and polarforming users."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ArrayGeometry,
    Direction,
    RotationAngles,
    global_antenna_positions,
    local_doa,
    pointing_vector,
    pointing_vectors,
    rotation_matrix,
)
from .polarization import depolarization_matrices, depolarization_matrix


@dataclass(frozen=True)
class RadiationPattern:
    """BS element gain pattern.

    ``directive`` is a cosine-power pattern about the local +x boresight,
    ``G0 + 10 log10(max(cos(inc), floor) ** (2 q))`` dBi, where ``inc`` is the
    angle from boresight. Directions behind the array get the floor value.
    """

    kind: str = "isotropic"
    boresight_gain_dbi: float | None = None
    exponent: float = 1.0
    floor: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("isotropic", "directive"):
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.boresight_gain_dbi is None:
            # half-space normalisation of cos^(2q)
            object.__setattr__(self, "boresight_gain_dbi", float(10 * np.log10(2 * (2 * self.exponent + 1))))

    def gain_dbi(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "isotropic":
            return np.zeros_like(theta + np.asarray(phi, dtype=float))
        cos_inc = np.cos(theta) * np.cos(phi)
        return self.boresight_gain_dbi + 20.0 * self.exponent * np.log10(np.maximum(cos_inc, self.floor))

    @property
    def half_power_beamwidth(self) -> float:
        """Full angle (radians) where the directive gain drops by 3 dB."""
        if self.kind == "isotropic":
            return 2 * np.pi
        return 2.0 * np.arccos(0.5 ** (1.0 / (2.0 * self.exponent)))


ISOTROPIC = RadiationPattern()


@dataclass(frozen=True)
class UserState:
    direction: Direction
    distance: float
    path_loss: float
    rotation: RotationAngles = field(default_factory=RotationAngles)
    weight: float = 1.0

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError("distance must be positive")
        if not self.path_loss > 0:
            raise ValueError("path_loss must be positive")
        if self.weight < 0:
            raise ValueError("weight must be non-negative")


@dataclass(frozen=True)
class ChannelSample:
    """One user's unpolarformed channel (N,) and 2x2 depolarisation matrix."""

    unpolarformed: np.ndarray
    depolarization: np.ndarray


@dataclass(frozen=True)
class ChannelSet:
    """Stacked channel data for K users: ``hlos`` (K, N), ``depol`` (K, 2, 2), ``weights`` (K,)."""

    hlos: np.ndarray
    depol: np.ndarray
    weights: np.ndarray

    @property
    def num_users(self) -> int:
        return self.hlos.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.hlos.shape[1]

    @classmethod
    def from_samples(cls, samples, weights=None) -> "ChannelSet":
        hlos = np.array([s.unpolarformed for s in samples], dtype=complex)
        depol = np.array([s.depolarization for s in samples], dtype=float)
        w = np.ones(len(samples)) if weights is None else np.asarray(weights, dtype=float)
        return cls(hlos, depol, w)

    def samples(self) -> list[ChannelSample]:
        return [ChannelSample(h, A) for h, A in zip(self.hlos, self.depol)]


def steering_vector(geom: ArrayGeometry, u, d: Direction, wavelength: float) -> np.ndarray:
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    f = pointing_vector(d)
    return np.exp(-2j * np.pi / wavelength * (global_antenna_positions(geom, u) @ f))


def steering_vectors(geom: ArrayGeometry, u, f: np.ndarray, wavelength: float) -> np.ndarray:
    """Steering vectors for K pointing vectors ``f`` (K, 3); shape (K, N)."""
    return np.exp(-2j * np.pi / wavelength * (f @ global_antenna_positions(geom, u).T))


def effective_gain(pattern: RadiationPattern, u, d: Direction) -> float:
    dl = local_doa(u, pointing_vector(d))
    return float(10.0 ** (pattern.gain_dbi(dl.theta, dl.phi) / 10.0))


def effective_gains(pattern: RadiationPattern, u, f: np.ndarray) -> np.ndarray:
    """Linear gains for K global pointing vectors ``f`` (K, 3)."""
    if pattern.kind == "isotropic":
        return np.ones(f.shape[0])
    fl = f @ rotation_matrix(u)  # rows are R^T f_k
    theta = np.arctan2(fl[:, 2], np.hypot(fl[:, 0], fl[:, 1]))
    phi = np.arctan2(fl[:, 1], fl[:, 0])
    return 10.0 ** (pattern.gain_dbi(theta, phi) / 10.0)


def unpolarformed_channel(user: UserState, geom: ArrayGeometry, u, pattern: RadiationPattern,
                          wavelength: float) -> np.ndarray:
    g = effective_gain(pattern, u, user.direction)
    phase = np.exp(-2j * np.pi * user.distance / wavelength)
    return np.sqrt(user.path_loss * g) * phase * steering_vector(geom, u, user.direction, wavelength)


def channel_sample(user: UserState, geom, u, pattern, wavelength) -> ChannelSample:
    return ChannelSample(
        unpolarformed_channel(user, geom, u, pattern, wavelength),
        depolarization_matrix(u, user.rotation, user.direction),
    )


def build_channel_set(users, geom: ArrayGeometry, u, pattern: RadiationPattern,
                      wavelength: float) -> ChannelSet:
    """Vectorised channel construction for a list of :class:`UserState`."""
    theta = np.array([x.direction.theta for x in users])
    phi = np.array([x.direction.phi for x in users])
    dist = np.array([x.distance for x in users])
    nu = np.array([x.path_loss for x in users])
    rot = np.array([x.rotation.as_array() for x in users]).reshape(-1, 3)
    weights = np.array([x.weight for x in users])
    return build_channel_arrays(theta, phi, dist, nu, rot, weights, geom, u, pattern, wavelength)


def build_channel_arrays(theta, phi, dist, nu, rot, weights, geom, u, pattern, wavelength) -> ChannelSet:
    u = u.as_array() if isinstance(u, RotationAngles) else np.asarray(u, dtype=float)
    f = pointing_vectors(theta, phi)
    g = effective_gains(pattern, u, f)
    amp = np.sqrt(nu * g) * np.exp(-2j * np.pi * dist / wavelength)
    hlos = amp[:, None] * steering_vectors(geom, u, f, wavelength)
    depol = depolarization_matrices(u, rot, theta, phi)
    return ChannelSet(hlos, depol, np.asarray(weights, dtype=float))


def full_polarized_channel(sample: ChannelSample) -> np.ndarray:
    """Kronecker channel ``h_LoS (x) A`` of shape (2N, 2)."""
    return np.kron(np.asarray(sample.unpolarformed)[:, None], sample.depolarization)


def polarformed_gain(A, w, v) -> complex:
    return complex(np.conj(v) @ A @ w)


def effective_channel(sample: ChannelSample, w, v) -> np.ndarray:
    return sample.unpolarformed * polarformed_gain(sample.depolarization, w, v)


def effective_channels(channels: ChannelSet, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Effective channels (K, N) for user polarformers ``w`` (K, 2) and BS ``v`` (2,)."""
    s = np.einsum("i,kij,kj->k", np.conj(v), channels.depol, w)
    return channels.hlos * s[:, None]


def achievable_rate(channels, precoders, noise_power: float, weights=None):
    """Per-user rates (bits/s/Hz) and their weighted sum.

    ``channels`` and ``precoders`` are (K, N) arrays, row k belonging to user k.
    """
    H = np.atleast_2d(np.asarray(channels, dtype=complex))
    C = np.atleast_2d(np.asarray(precoders, dtype=complex))
    if H.shape != C.shape:
        raise ValueError(f"channels {H.shape} and precoders {C.shape} differ in shape")
    if not noise_power > 0:
        raise ValueError("noise_power must be positive")
    X = np.abs(H.conj() @ C.T) ** 2  # X[k, j] = |h_k^H c_j|^2
    sig = np.diag(X)
    interference = X.sum(axis=1) - sig
    rates = np.log2(1.0 + sig / (interference + noise_power))
    w = np.ones(H.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != rates.shape:
        raise ValueError("weights must have one entry per user")
    return rates, float(w @ rates)


def mrt_precoders(H: np.ndarray, power_budget: float, fallback: np.ndarray | None = None) -> np.ndarray:
    """Equal-power maximum-ratio transmission, ``sqrt(P/K) h_k / ||h_k||``.

    Users whose effective channel vanishes fall back to the direction of
    ``fallback`` (typically the unpolarformed channel), else zero.
    """
    K = H.shape[0]
    D = H.copy()
    norms = np.linalg.norm(D, axis=1)
    dead = norms <= 0
    if np.any(dead) and fallback is not None:
        D[dead] = fallback[dead]
        norms = np.linalg.norm(D, axis=1)
    out = np.zeros_like(D)
    ok = norms > 0
    out[ok] = D[ok] / norms[ok, None] * np.sqrt(power_budget / K)
    return out
