"""Slow-timescale rotation search by particle swarm and the two-timescale driver.

The swarm lives on the 3-torus of Euler angles: positions are wrapped modulo
2 pi after every move. Fitness of a rotation is the weighted sum-rate averaged
over a fixed set of training drops, each turned into a channel set at that
rotation and handed to a per-sample evaluator (the fast-timescale solver or a
cheap fixed-polarformer/MRT rule).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, RadiationPattern, achievable_rate, effective_channels, mrt_precoders
from .geometry import TWO_PI, ArrayGeometry, RotationAngles
from .polarization import QuantizationConfig
from .scenario import Drop
from .wmmse_pdd import SolveResult, SolverConfig, solve

LOCAL_BEST_RULES = ("own_best", "previous")


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 16
    iterations: int = 30
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    sample_count: int = 8
    seed: int = 0
    initial_velocity: float = 0.5  # initial velocities uniform in [-x, x] rad
    local_best: str = "own_best"

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ValueError("swarm_size must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.inertia < 0 or self.cognitive < 0 or self.social < 0:
            raise ValueError("inertia and learning factors must be non-negative")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.local_best not in LOCAL_BEST_RULES:
            raise ValueError(f"local_best must be one of {LOCAL_BEST_RULES}")


# ---------------------------------------------------------------------------
# fitness

class SolverEvaluator:
    """Weighted sum-rate returned by the fast-timescale solver on one channel set."""

    def __init__(self, solver_cfg: SolverConfig, q: QuantizationConfig):
        self.solver_cfg = solver_cfg
        self.q = q

    def __call__(self, ch: ChannelSet, index: int) -> float:
        return solve(ch, self.solver_cfg, self.q, record_trace=False).weighted_sum_rate


class FixedPolarformerEvaluator:
    """Weighted sum-rate with given polarformers per sample and equal-power MRT.

    ``polarformers[index]`` is a pair ``(w (K, 2), v (2,))`` for sample ``index``.
    """

    def __init__(self, polarformers, power_budget: float, noise_power: float):
        self.polarformers = list(polarformers)
        self.power_budget = power_budget
        self.noise_power = noise_power

    def __call__(self, ch: ChannelSet, index: int) -> float:
        w, v = self.polarformers[index]
        H = effective_channels(ch, w, v)
        c = mrt_precoders(H, self.power_budget, fallback=ch.hlos)
        return achievable_rate(H, c, self.noise_power, ch.weights)[1]


class RotationObjective:
    """Average of ``evaluator`` over the training drops at a given rotation.

    Per-sample values are cached under the rotation rounded to ``resolution``
    radians (after wrapping) together with the sample index.
    """

    def __init__(self, drops, evaluator, geometry: ArrayGeometry, pattern: RadiationPattern,
                 wavelength: float, resolution: float = 1e-6, cache: bool = True):
        self.drops: list[Drop] = list(drops)
        if not self.drops:
            raise ValueError("need at least one training drop")
        self.evaluator = evaluator
        self.geometry = geometry
        self.pattern = pattern
        self.wavelength = wavelength
        self.resolution = resolution
        self.use_cache = cache
        self._cache: dict = {}
        self.evaluations = 0  # evaluator invocations
        self.calls = 0  # fitness queries

    def _key(self, u: np.ndarray, index: int):
        return tuple(np.round(u / self.resolution).astype(np.int64).tolist()) + (index,)

    def sample_value(self, u, index: int) -> float:
        u = np.mod(_as_angles(u), TWO_PI)
        key = self._key(u, index)
        if self.use_cache and key in self._cache:
            return self._cache[key]
        ch = self.drops[index].channels(self.geometry, u, self.pattern, self.wavelength)
        val = float(self.evaluator(ch, index))
        self.evaluations += 1
        if self.use_cache:
            self._cache[key] = val
        return val

    def __call__(self, u) -> float:
        self.calls += 1
        return float(np.mean([self.sample_value(u, i) for i in range(len(self.drops))]))


def _as_angles(u) -> np.ndarray:
    if isinstance(u, RotationAngles):
        return u.as_array()
    return np.asarray(u, dtype=float).reshape(3)


def fitness(s, drops, geometry: ArrayGeometry, pattern: RadiationPattern, wavelength: float,
            solver_cfg: SolverConfig, q: QuantizationConfig) -> float:
    """Solver-based fitness of rotation ``s`` averaged over ``drops`` (no caching)."""
    obj = RotationObjective(drops, SolverEvaluator(solver_cfg, q), geometry, pattern, wavelength, cache=False)
    return obj(s)


# ---------------------------------------------------------------------------
# swarm

@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_fitness: float
    fitness: float


@dataclass
class Swarm:
    """Array-backed swarm state; row j is particle j."""

    positions: np.ndarray  # (S, 3)
    velocities: np.ndarray  # (S, 3)
    best_positions: np.ndarray  # (S, 3)
    best_fitness: np.ndarray  # (S,)
    fitness: np.ndarray  # (S,) fitness at the current positions
    global_best: np.ndarray  # (3,)
    global_best_fitness: float
    rngs: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def particles(self) -> list[Particle]:
        return [Particle(self.positions[j].copy(), self.velocities[j].copy(), self.best_positions[j].copy(),
                         float(self.best_fitness[j]), float(self.fitness[j])) for j in range(self.size)]


def particle_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent per-particle streams spawned from the master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def init_swarm(objective, cfg: PsoConfig) -> Swarm:
    rngs = particle_rngs(cfg.seed, cfg.swarm_size)
    pos = np.array([r.uniform(0.0, TWO_PI, 3) for r in rngs])
    vel = np.array([r.uniform(-cfg.initial_velocity, cfg.initial_velocity, 3) for r in rngs])
    fit = np.array([objective(p) for p in pos])
    g = int(np.argmax(fit))
    return Swarm(pos, vel, pos.copy(), fit.copy(), fit.copy(), pos[g].copy(), float(fit[g]), rngs)


def move(swarm: Swarm, cfg: PsoConfig) -> None:
    """Velocity and position update with one (tau1, tau2) pair per particle and step."""
    for j, r in enumerate(swarm.rngs):
        tau1, tau2 = r.uniform(0.0, 1.0, 2)
        s = swarm.positions[j]
        swarm.velocities[j] = (cfg.inertia * swarm.velocities[j]
                               + cfg.cognitive * tau1 * (swarm.best_positions[j] - s)
                               + cfg.social * tau2 * (swarm.global_best - s))
        swarm.positions[j] = np.mod(s + swarm.velocities[j], TWO_PI)


def pso_step(swarm: Swarm, objective, cfg: PsoConfig) -> Swarm:
    """One iteration: move, evaluate, refresh local bests and the global best (in place)."""
    move(swarm, cfg)
    new = np.array([objective(p) for p in swarm.positions])
    if cfg.local_best == "own_best":
        better = new > swarm.best_fitness
    else:
        better = new > swarm.fitness
    swarm.best_positions[better] = swarm.positions[better]
    swarm.best_fitness[better] = new[better]
    swarm.fitness = new
    g = int(np.argmax(swarm.best_fitness))
    if swarm.best_fitness[g] > swarm.global_best_fitness:
        swarm.global_best = swarm.best_positions[g].copy()
        swarm.global_best_fitness = float(swarm.best_fitness[g])
    return swarm


@dataclass(frozen=True)
class TelemetryRow:
    iteration: int
    best_fitness: float
    mean_fitness: float


@dataclass
class PsoResult:
    rotation: RotationAngles
    fitness: float
    initial_fitness: np.ndarray
    history: list[TelemetryRow]
    fitness_calls: int
    evaluations: int


def optimize_rotation(objective, cfg: PsoConfig, telemetry_path=None) -> PsoResult:
    """Run the swarm for ``cfg.iterations`` steps and return the global best."""
    calls0 = getattr(objective, "calls", 0)
    evals0 = getattr(objective, "evaluations", 0)
    swarm = init_swarm(objective, cfg)
    initial = swarm.fitness.copy()
    history = [TelemetryRow(0, swarm.global_best_fitness, float(np.mean(swarm.fitness)))]
    for i in range(1, cfg.iterations + 1):
        pso_step(swarm, objective, cfg)
        history.append(TelemetryRow(i, swarm.global_best_fitness, float(np.mean(swarm.fitness))))
    if telemetry_path is not None:
        write_telemetry_csv(history, telemetry_path)
    return PsoResult(RotationAngles.from_array(swarm.global_best), swarm.global_best_fitness, initial, history,
                     getattr(objective, "calls", 0) - calls0, getattr(objective, "evaluations", 0) - evals0)


def write_telemetry_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "best_fitness", "mean_fitness"])
        for r in history:
            wr.writerow([r.iteration, repr(r.best_fitness), repr(r.mean_fitness)])


# ---------------------------------------------------------------------------
# two-timescale orchestration

@dataclass
class TwoTimescaleResult:
    rotation: RotationAngles
    pso: PsoResult
    solves: list[SolveResult]
    mean_rate: float


def two_timescale_run(training_drops, fast_drops, geometry: ArrayGeometry, pattern: RadiationPattern,
                      wavelength: float, pso_cfg: PsoConfig, solver_cfg: SolverConfig,
                      q: QuantizationConfig, telemetry_path=None, record_trace: bool = False) -> TwoTimescaleResult:
    """Pick the rotation on ``training_drops``, then solve every fast-timescale drop at it."""
    objective = RotationObjective(training_drops, SolverEvaluator(solver_cfg, q), geometry, pattern, wavelength)
    pso = optimize_rotation(objective, pso_cfg, telemetry_path)
    u = pso.rotation.as_array()
    solves = [solve(d.channels(geometry, u, pattern, wavelength), solver_cfg, q, record_trace=record_trace)
              for d in fast_drops]
    mean = float(np.mean([r.weighted_sum_rate for r in solves])) if solves else 0.0
    return TwoTimescaleResult(pso.rotation, pso, solves, mean)
