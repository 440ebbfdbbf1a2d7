"""Monte Carlo user drops and channel-sample batches."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelSet, RadiationPattern, UserState, build_channel_arrays
from .geometry import ArrayGeometry, Direction, RotationAngles

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Deployment parameters. Power and noise are in watts, angles in radians."""

    num_bs_antennas: int = 16
    mean_users: float = 8.0
    carrier_frequency: float = 24e9
    min_radius: float = 20.0
    max_radius: float = 100.0
    azimuth_range: tuple[float, float] = (-np.pi, np.pi)
    elevation_range: tuple[float, float] = (-np.pi / 6, np.pi / 6)
    power_budget: float = 1.0
    noise_power: float = field(default_factory=lambda: dbm_to_watt(-90.0))
    sample_count: int = 8
    seed: int = 0
    num_users: int | None = None  # fixes K instead of drawing it
    pattern: RadiationPattern = field(default_factory=RadiationPattern)

    def __post_init__(self):
        if not self.mean_users > 0:
            raise ValueError("mean_users must be positive")
        if not (0 < self.min_radius <= self.max_radius):
            raise ValueError("need 0 < min_radius <= max_radius")
        if self.num_bs_antennas < 1:
            raise ValueError("num_bs_antennas must be >= 1")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.upa(self.num_bs_antennas, self.wavelength / 2.0)

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class Drop:
    """One realisation of user positions and device rotations (array form)."""

    theta: np.ndarray
    phi: np.ndarray
    distance: np.ndarray
    path_loss: np.ndarray
    rotations: np.ndarray  # (K, 3)
    weights: np.ndarray

    @property
    def num_users(self) -> int:
        return self.theta.shape[0]

    @property
    def users(self) -> list[UserState]:
        return [
            UserState(Direction(float(t), float(p)), float(d), float(nu), RotationAngles.from_array(r), float(w))
            for t, p, d, nu, r, w in zip(self.theta, self.phi, self.distance, self.path_loss,
                                         self.rotations, self.weights)
        ]

    @classmethod
    def from_users(cls, users) -> "Drop":
        return cls(
            np.array([x.direction.theta for x in users]),
            np.array([x.direction.phi for x in users]),
            np.array([x.distance for x in users]),
            np.array([x.path_loss for x in users]),
            np.array([x.rotation.as_array() for x in users]).reshape(-1, 3),
            np.array([x.weight for x in users]),
        )

    def channels(self, geom: ArrayGeometry, u, pattern: RadiationPattern, wavelength: float) -> ChannelSet:
        return build_channel_arrays(self.theta, self.phi, self.distance, self.path_loss, self.rotations,
                                    self.weights, geom, u, pattern, wavelength)


def path_loss(distance, wavelength: float):
    """Free-space power gain ``(lambda / (4 pi d))**2``."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    nu = (wavelength / (4.0 * np.pi * d)) ** 2
    return float(nu) if nu.ndim == 0 else nu


def draw_drop(cfg: ScenarioConfig, rng: np.random.Generator) -> Drop:
    """Homogeneous PPP drop over the annular sector; empty drops are redrawn."""
    if cfg.num_users is not None:
        K = int(cfg.num_users)
    else:
        K = 0
        while K == 0:
            K = int(rng.poisson(cfg.mean_users))
    # uniform in volume: r^3, azimuth and sin(elevation) are uniform
    r = np.cbrt(rng.uniform(cfg.min_radius**3, cfg.max_radius**3, K))
    phi = rng.uniform(*cfg.azimuth_range, K)
    s0, s1 = np.sin(cfg.elevation_range[0]), np.sin(cfg.elevation_range[1])
    theta = np.arcsin(rng.uniform(s0, s1, K))
    rot = rng.uniform(0.0, 2.0 * np.pi, (K, 3))
    return Drop(theta, phi, r, path_loss(r, cfg.wavelength) * np.ones(K), rot, np.ones(K))


def generate_samples(cfg: ScenarioConfig, u, *, drop: Drop | None = None, rng=None,
                     geometry: ArrayGeometry | None = None, pattern: RadiationPattern | None = None,
                     count: int | None = None) -> list[ChannelSet]:
    """Build ``count`` (default ``cfg.sample_count``) channel sets at rotation ``u``.

    With ``drop`` given every sample uses that drop (fast timescale); otherwise
    a fresh drop is drawn per sample from ``rng`` (slow timescale).
    """
    geom = geometry or cfg.geometry()
    pattern = pattern or cfg.pattern
    L = cfg.sample_count if count is None else count
    if drop is None:
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        drops = [draw_drop(cfg, rng) for _ in range(L)]
    else:
        drops = [drop] * L
    return [d.channels(geom, u, pattern, cfg.wavelength) for d in drops]
