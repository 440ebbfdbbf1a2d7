"""Experiment configuration files (YAML).

Top-level sections ``scenario``, ``solver``, ``pso`` and ``experiment`` hold
the fields of the corresponding dataclasses; unknown keys are rejected.
Power values may be given in watts (``power_budget``, ``noise_power``) or in
dBm (``power_dbm``, ``noise_dbm``). Example::

    scenario:
      num_bs_antennas: 16
      mean_users: 8
      pattern: {kind: directive, exponent: 1.0}
      noise_dbm: -90
    solver: {outer_tol: 1.0e-3}
    pso: {swarm_size: 8, iterations: 10}
    experiment:
      kind: power_sweep
      grid: [0, 10, 20, 30]
      quantizations: [[2, 2], [2, 0]]
      trials: 20
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

import yaml

from .channel import RadiationPattern
from .harness import ExperimentSpec, desk_pso, desk_scenario
from .polarization import QuantizationConfig
from .rotation_pso import PsoConfig
from .scenario import ScenarioConfig, dbm_to_watt
from .wmmse_pdd import SolverConfig


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig
    solver: SolverConfig
    pso: PsoConfig
    experiment: ExperimentSpec


def _check_keys(section: str, data: dict, cls, extra=()):
    known = {f.name for f in fields(cls)} | set(extra)
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys in [{section}]: {sorted(unknown)}")


def _coerce(section: str, d: dict, base) -> dict:
    # YAML 1.1 reads forms like 24.0e9 as strings; cast to the field's type
    for f in fields(base):
        if f.name not in d or isinstance(d[f.name], bool):
            continue
        default = getattr(base, f.name)
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            try:
                d[f.name] = type(default)(d[f.name]) if isinstance(default, float) else int(d[f.name])
            except (TypeError, ValueError):
                raise ValueError(f"[{section}] {f.name}: expected a number, got {d[f.name]!r}") from None
    return d


def _tuples(d: dict, *names):
    for n in names:
        if n in d:
            d[n] = tuple(d[n])


def scenario_from_dict(d: dict, base: ScenarioConfig) -> ScenarioConfig:
    d = dict(d)
    _check_keys("scenario", d, ScenarioConfig, ("power_dbm", "noise_dbm"))
    if "power_dbm" in d:
        d["power_budget"] = dbm_to_watt(float(d.pop("power_dbm")))
    if "noise_dbm" in d:
        d["noise_power"] = dbm_to_watt(float(d.pop("noise_dbm")))
    if "pattern" in d:
        d["pattern"] = RadiationPattern(**d["pattern"])
    _tuples(d, "azimuth_range", "elevation_range")
    return replace(base, **_coerce("scenario", d, base))


def experiment_from_dict(d: dict, base: ExperimentSpec) -> ExperimentSpec:
    d = dict(d)
    _check_keys("experiment", d, ExperimentSpec)
    if "quantizations" in d:
        d["quantizations"] = tuple(QuantizationConfig(int(p), int(a)) for p, a in d["quantizations"])
    if "schemes" in d and isinstance(d["schemes"], str):
        d["schemes"] = (d["schemes"],)
    _tuples(d, "schemes", "grid")
    if "grid" in d:
        d["grid"] = tuple(float(x) for x in d["grid"])
    return replace(base, **d)


def load_config(path=None, full_scale: bool = False) -> RunConfig:
    """Read ``path`` (or only defaults when None) on top of the desk or full-scale preset."""
    base_sc = desk_scenario()
    if full_scale:
        base_sc = replace(base_sc, num_bs_antennas=64, mean_users=30.0)
    data = {}
    if path is not None:
        text = Path(path).read_text()
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        unknown = set(data) - {"scenario", "solver", "pso", "experiment"}
        if unknown:
            raise ValueError(f"{path}: unknown sections {sorted(unknown)}")
    sc = scenario_from_dict(data.get("scenario", {}), base_sc)
    s = dict(data.get("solver", {}))
    _check_keys("solver", s, SolverConfig)
    base_solver = SolverConfig(power_budget=sc.power_budget, noise_power=sc.noise_power)
    solver = replace(base_solver, **_coerce("solver", s, base_solver))
    p = dict(data.get("pso", {}))
    _check_keys("pso", p, PsoConfig)
    base_pso = desk_pso(sample_count=sc.sample_count)
    pso = replace(base_pso, **_coerce("pso", p, base_pso))
    exp = experiment_from_dict(data.get("experiment", {}), ExperimentSpec())
    return RunConfig(sc, solver, pso, exp)
