"""Benchmark schemes, parameter sweeps and result tables.

Four schemes share one randomly drawn instance per trial seed so that results
pair up across schemes:

* ``fixed`` - random rotation, random codebook polarformers, equal-power MRT;
* ``polarforming_only`` - the fixed rotation and precoders, polarformers from
  the PDD solver with the precoder block frozen;
* ``rotation_only`` - the fixed polarformers and MRT, rotation from the swarm;
* ``joint`` - rotation from the swarm with solver fitness, then the solver on
  the test drop.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import RadiationPattern, achievable_rate, effective_channels, mrt_precoders
from .geometry import TWO_PI
from .polarization import BS_SCALE, QuantizationConfig, codebook
from .rotation_pso import (
    FixedPolarformerEvaluator,
    PsoConfig,
    RotationObjective,
    optimize_rotation,
    two_timescale_run,
)
from .scenario import Drop, ScenarioConfig, dbm_to_watt, draw_drop
from .wmmse_pdd import SolverConfig, solve, write_trace_csv

SCHEMES = ("fixed", "polarforming_only", "rotation_only", "joint")
KINDS = ("power_sweep", "user_sweep", "single")
CSV_HEADER = ("scheme", "sweep", "seed", "rate", "iters", "ms")


def desk_scenario(**kw) -> ScenarioConfig:
    base = ScenarioConfig(num_bs_antennas=16, mean_users=8.0, sample_count=8,
                          pattern=RadiationPattern("directive"))
    return replace(base, **kw)


def full_scale_scenario(**kw) -> ScenarioConfig:
    return replace(desk_scenario(), num_bs_antennas=64, mean_users=30.0, **kw)


def desk_pso(**kw) -> PsoConfig:
    """Small swarm that keeps a joint-scheme trial in the tens of seconds."""
    return replace(PsoConfig(swarm_size=6, iterations=8, sample_count=8), **kw)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str = "single"
    schemes: tuple[str, ...] = SCHEMES
    grid: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0)  # dBm (power sweep) or mean users (user sweep)
    quantizations: tuple[QuantizationConfig, ...] = (QuantizationConfig(2, 2),)
    trials: int = 20
    seed: int = 0
    output: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ValueError(f"unknown or empty scheme list {self.schemes}")
        if not self.grid:
            raise ValueError("sweep grid must be nonempty")
        if not self.quantizations:
            raise ValueError("quantization list must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.trials)]


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    sweep: float
    seed: int
    rate: float
    iters: int
    ms: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be non-negative")


# ---------------------------------------------------------------------------
# instances

@dataclass
class Instance:
    """Everything a scheme needs for one (configuration, seed) pair."""

    scenario: ScenarioConfig
    solver: SolverConfig
    pso: PsoConfig
    q: QuantizationConfig
    seed: int
    sweep: float
    test_drop: Drop
    rotation: np.ndarray
    polarformers: tuple[np.ndarray, np.ndarray]
    training_drops: list[Drop] = field(default_factory=list)
    training_polarformers: list = field(default_factory=list)
    trace_path: str | None = None  # solver trace of the joint scheme's test solve
    telemetry_path: str | None = None  # swarm telemetry of the joint scheme

    @property
    def geometry(self):
        return self.scenario.geometry()


def random_polarformers(K: int, q: QuantizationConfig, rng: np.random.Generator):
    """Codebook-feasible random user vectors (K, 2) and BS vector (2,)."""
    F = codebook(q)
    w = F[rng.integers(0, F.size, (K, 2))]
    v = BS_SCALE * F[rng.integers(0, F.size, 2)]
    return w.astype(complex), v.astype(complex)


def make_instance(scenario: ScenarioConfig, solver: SolverConfig, pso: PsoConfig, q: QuantizationConfig,
                  seed: int, sweep: float = 0.0) -> Instance:
    """Draw the test drop, fixed rotation, fixed polarformers and training drops for ``seed``.

    Random streams are keyed only by ``seed`` (and the scenario), so instances
    built with different quantizations or schemes share drops and rotation.
    """
    s_test, s_rot, s_pol, s_train, s_tpol, s_pso = np.random.SeedSequence([scenario.seed, seed]).spawn(6)
    test = draw_drop(scenario, np.random.default_rng(s_test))
    rot = np.random.default_rng(s_rot).uniform(0.0, TWO_PI, 3)
    pol = random_polarformers(test.num_users, q, np.random.default_rng(s_pol))
    rng_train = np.random.default_rng(s_train)
    training = [draw_drop(scenario, rng_train) for _ in range(pso.sample_count)]
    rng_tpol = np.random.default_rng(s_tpol)
    tpol = [random_polarformers(d.num_users, q, rng_tpol) for d in training]
    pso = replace(pso, seed=int(s_pso.generate_state(1)[0]))
    solver = replace(solver, power_budget=scenario.power_budget, noise_power=scenario.noise_power)
    return Instance(scenario, solver, pso, q, seed, sweep, test, rot, pol, training, tpol)


def _test_channels(inst: Instance, u):
    sc = inst.scenario
    return inst.test_drop.channels(inst.geometry, u, sc.pattern, sc.wavelength)


def _fixed_rate(inst: Instance, u):
    ch = _test_channels(inst, u)
    w, v = inst.polarformers
    H = effective_channels(ch, w, v)
    c = mrt_precoders(H, inst.scenario.power_budget, fallback=ch.hlos)
    return ch, c, achievable_rate(H, c, inst.scenario.noise_power, ch.weights)[1]


def _timed(fn):
    t0 = time.perf_counter()
    rate, iters = fn()
    return max(float(rate), 0.0), int(iters), (time.perf_counter() - t0) * 1e3


# ---------------------------------------------------------------------------
# schemes

def run_fixed(inst: Instance, label: str = "fixed") -> ResultRow:
    rate, iters, ms = _timed(lambda: (_fixed_rate(inst, inst.rotation)[2], 0))
    return ResultRow(label, inst.sweep, inst.seed, rate, iters, ms)


def run_polarforming_only(inst: Instance, label: str = "polarforming_only") -> ResultRow:
    def go():
        ch, c, _ = _fixed_rate(inst, inst.rotation)
        res = solve(ch, inst.solver, inst.q, fixed_precoders=c, record_trace=False)
        return res.weighted_sum_rate, res.sweeps

    rate, iters, ms = _timed(go)
    return ResultRow(label, inst.sweep, inst.seed, rate, iters, ms)


def run_rotation_only(inst: Instance, label: str = "rotation_only") -> ResultRow:
    def go():
        sc = inst.scenario
        ev = FixedPolarformerEvaluator(inst.training_polarformers, sc.power_budget, sc.noise_power)
        obj = RotationObjective(inst.training_drops, ev, inst.geometry, sc.pattern, sc.wavelength)
        res = optimize_rotation(obj, inst.pso)
        return _fixed_rate(inst, res.rotation.as_array())[2], res.fitness_calls

    rate, iters, ms = _timed(go)
    return ResultRow(label, inst.sweep, inst.seed, rate, iters, ms)


def run_joint(inst: Instance, label: str = "joint") -> ResultRow:
    def go():
        sc = inst.scenario
        res = two_timescale_run(inst.training_drops, [inst.test_drop], inst.geometry, sc.pattern, sc.wavelength,
                                inst.pso, inst.solver, inst.q, telemetry_path=inst.telemetry_path,
                                record_trace=inst.trace_path is not None)
        if inst.trace_path is not None:
            write_trace_csv(res.solves[0].trace, inst.trace_path)
        return res.mean_rate, res.pso.fitness_calls + sum(r.sweeps for r in res.solves)

    rate, iters, ms = _timed(go)
    return ResultRow(label, inst.sweep, inst.seed, rate, iters, ms)


RUNNERS = {
    "fixed": run_fixed,
    "polarforming_only": run_polarforming_only,
    "rotation_only": run_rotation_only,
    "joint": run_joint,
}


def scheme_label(scheme: str, q: QuantizationConfig, multi: bool) -> str:
    return f"{scheme}:q{q.phase_bits}{q.amplitude_bits}" if multi else scheme


def sweep_scenario(spec: ExperimentSpec, scenario: ScenarioConfig, value: float) -> ScenarioConfig:
    if spec.kind == "power_sweep":
        return replace(scenario, power_budget=dbm_to_watt(value))
    if spec.kind == "user_sweep":
        return replace(scenario, mean_users=float(value))
    return scenario


def run_experiment(spec: ExperimentSpec, scenario: ScenarioConfig, solver: SolverConfig | None = None,
                   pso: PsoConfig | None = None, progress=None, trace_path=None,
                   telemetry_path=None) -> list[ResultRow]:
    """Every (sweep value, quantization, seed, scheme) combination of ``spec``.

    ``trace_path``/``telemetry_path`` capture the joint scheme's solver trace
    and swarm telemetry for the first instance only.
    """
    solver = solver or SolverConfig()
    pso = pso or desk_pso()
    grid = spec.grid if spec.kind != "single" else (0.0,)
    multi = len(spec.quantizations) > 1
    rows = []
    for value in grid:
        sc = sweep_scenario(spec, scenario, value)
        for q in spec.quantizations:
            for seed in spec.seeds:
                inst = make_instance(sc, solver, pso, q, seed, float(value))
                if not rows:
                    inst.trace_path, inst.telemetry_path = trace_path, telemetry_path
                for scheme in spec.schemes:
                    row = RUNNERS[scheme](inst, scheme_label(scheme, q, multi))
                    rows.append(row)
                    if progress is not None:
                        progress(row)
    return sort_rows(rows)


# ---------------------------------------------------------------------------
# output

def sort_rows(rows) -> list[ResultRow]:
    return sorted(rows, key=lambda r: (r.scheme, r.sweep, r.seed))


def write_rows(rows, fh, fmt: str = "csv") -> None:
    """Serialise ``rows`` (sorted by scheme, sweep, seed) to an open text stream."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    rows = sort_rows(rows)
    if fmt == "csv":
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in rows:
            wr.writerow([r.scheme, repr(r.sweep), r.seed, repr(r.rate), r.iters, f"{r.ms:.3f}"])
    else:
        json.dump([asdict(r) for r in rows], fh, indent=1)
        fh.write("\n")


def emit(rows, path, fmt: str = "csv") -> Path:
    """Write ``rows`` to ``path`` as CSV or JSON; I/O errors name the path."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            write_rows(rows, fh, fmt)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def read_rows(path) -> list[ResultRow]:
    path = Path(path)
    with open(path, newline="") as fh:
        if path.suffix == ".json":
            data = json.load(fh)
        else:
            data = list(csv.DictReader(fh))
    return [ResultRow(d["scheme"], float(d["sweep"]), int(d["seed"]), float(d["rate"]), int(d["iters"]),
                      float(d["ms"])) for d in data]


def summarize(rows) -> dict:
    """Mean rate per (scheme, sweep)."""
    acc: dict = {}
    for r in rows:
        acc.setdefault((r.scheme, r.sweep), []).append(r.rate)
    return {k: float(np.mean(v)) for k, v in sorted(acc.items())}
