import io
import json
from dataclasses import replace

import numpy as np
import pytest

from p6dma.channel import RadiationPattern, effective_channels
from p6dma.harness import (
    CSV_HEADER, RUNNERS, SCHEMES, ExperimentSpec, ResultRow, desk_pso, desk_scenario, emit, make_instance,
    random_polarformers, read_rows, run_experiment, run_fixed, run_polarforming_only, run_rotation_only,
    scheme_label, sort_rows, summarize, sweep_scenario, write_rows,
)
from p6dma.polarization import BS_SCALE, QuantizationConfig, codebook
from p6dma.rotation_pso import PsoConfig
from p6dma.scenario import ScenarioConfig, dbm_to_watt
from p6dma.wmmse_pdd import SolverConfig

Q = QuantizationConfig(2, 2)
TINY_PSO = PsoConfig(swarm_size=2, iterations=1, sample_count=2)


def tiny(**kw):
    base = dict(num_bs_antennas=4, mean_users=2.0, pattern=RadiationPattern("directive"))
    base.update(kw)
    return ScenarioConfig(**base)


def inst(seed=0, sc=None, q=Q, pso=TINY_PSO):
    return make_instance(sc or tiny(), SolverConfig(), pso, q, seed)


def strip_ms(rows):
    return [replace(r, ms=0.0) for r in rows]


# ---------------------------------------------------------------------------
# schemes

@pytest.mark.parametrize("scheme", SCHEMES)
def test_zero_power_gives_zero_rate(scheme):
    row = RUNNERS[scheme](inst(sc=tiny(power_budget=0.0)))
    assert row.rate == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_fixed_single_user_matches_capacity(seed):
    i = inst(seed, sc=tiny(num_users=1))
    ch = i.test_drop.channels(i.geometry, i.rotation, i.scenario.pattern, i.scenario.wavelength)
    h = effective_channels(ch, *i.polarformers)[0]
    want = np.log2(1 + i.scenario.power_budget * np.sum(np.abs(h) ** 2) / i.scenario.noise_power)
    assert run_fixed(i).rate == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_schemes_are_deterministic(scheme):
    a, b = RUNNERS[scheme](inst(3)), RUNNERS[scheme](inst(3))
    assert (a.rate, a.iters) == (b.rate, b.iters)


def test_polarforming_only_beats_fixed_on_most_seeds():
    wins = sum(run_polarforming_only(inst(s)).rate >= run_fixed(inst(s)).rate for s in range(20))
    assert wins >= 16


def test_rotation_only_gains_on_clustered_users():
    sc = tiny(mean_users=3.0, azimuth_range=(0.4, 0.5), elevation_range=(0.1, 0.15))
    pso = PsoConfig(swarm_size=6, iterations=8, sample_count=2)
    gain = [run_rotation_only(inst(s, sc, pso=pso)).rate - run_fixed(inst(s, sc, pso=pso)).rate for s in range(6)]
    assert np.mean(gain) > 0


def test_random_polarformers_are_codebook_points():
    w, v = random_polarformers(5, Q, np.random.default_rng(0))
    F = codebook(Q)
    assert w.shape == (5, 2) and v.shape == (2,)
    assert all(np.min(np.abs(F - z)) == 0 for z in w.ravel())
    assert all(np.min(np.abs(BS_SCALE * F - z)) < 1e-15 for z in v)


def test_instances_share_draws_across_quantizations():
    a, b = inst(4, q=QuantizationConfig(2, 2)), inst(4, q=QuantizationConfig(2, 0))
    np.testing.assert_array_equal(a.test_drop.theta, b.test_drop.theta)
    np.testing.assert_array_equal(a.rotation, b.rotation)
    assert a.pso.seed == b.pso.seed


def test_instance_takes_power_and_noise_from_scenario():
    i = make_instance(tiny(power_budget=0.3, noise_power=2e-12), SolverConfig(), TINY_PSO, Q, 0)
    assert (i.solver.power_budget, i.solver.noise_power) == (0.3, 2e-12)
    assert len(i.training_drops) == TINY_PSO.sample_count


# ---------------------------------------------------------------------------
# experiment driver

def test_sweep_scenario():
    sc = tiny()
    assert sweep_scenario(ExperimentSpec(kind="power_sweep"), sc, 20.0).power_budget == pytest.approx(dbm_to_watt(20))
    assert sweep_scenario(ExperimentSpec(kind="user_sweep"), sc, 6).mean_users == 6.0
    assert sweep_scenario(ExperimentSpec(kind="single"), sc, 6) == sc


def test_run_experiment_grid_and_determinism(tmp_path):
    spec = ExperimentSpec(kind="power_sweep", grid=(10.0, 20.0), trials=2, seed=5)
    trace, tele = tmp_path / "trace.csv", tmp_path / "tele.csv"
    rows = run_experiment(spec, tiny(), pso=TINY_PSO, trace_path=trace, telemetry_path=tele)
    assert len(rows) == 2 * 2 * len(SCHEMES)
    assert rows == sort_rows(rows)
    assert {r.seed for r in rows} == {5, 6}
    assert trace.read_text().startswith("outer,inner,lagrangian")
    assert tele.read_text().startswith("iteration,best_fitness")
    again = run_experiment(spec, tiny(), pso=TINY_PSO)
    assert strip_ms(rows) == strip_ms(again)


def test_run_experiment_labels_quantizations():
    spec = ExperimentSpec(kind="single", schemes=("fixed",), trials=1,
                          quantizations=(QuantizationConfig(2, 2), QuantizationConfig(2, 0)))
    rows = run_experiment(spec, tiny(), pso=TINY_PSO)
    assert {r.scheme for r in rows} == {"fixed:q22", "fixed:q20"}
    assert scheme_label("joint", Q, False) == "joint"


def test_progress_callback():
    seen = []
    run_experiment(ExperimentSpec(schemes=("fixed",), trials=3), tiny(), pso=TINY_PSO, progress=seen.append)
    assert len(seen) == 3


@pytest.mark.parametrize("kw", [dict(kind="other"), dict(schemes=()), dict(schemes=("best",)), dict(grid=()),
                                dict(quantizations=()), dict(trials=0)])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        ExperimentSpec(**kw)


def test_result_row_rejects_negative_rate():
    with pytest.raises(ValueError):
        ResultRow("fixed", 0.0, 0, -1.0, 0, 0.0)


def test_presets():
    assert desk_scenario().num_bs_antennas == 16 and desk_scenario().mean_users == 8
    assert desk_scenario().pattern.kind == "directive"
    assert desk_pso(iterations=2).iterations == 2


# ---------------------------------------------------------------------------
# emission

ROWS = [ResultRow("joint", 10.0, 1, 3.5, 7, 1.25), ResultRow("fixed", 10.0, 2, 1.0, 0, 0.5),
        ResultRow("fixed", 0.0, 3, 0.25, 0, 0.125), ResultRow("fixed", 10.0, 1, 2.0, 0, 0.5)]


def test_emit_empty_is_header_only(tmp_path):
    p = emit([], tmp_path / "r.csv")
    assert p.read_text() == ",".join(CSV_HEADER) + "\n"
    assert json.loads(emit([], tmp_path / "r.json", "json").read_text()) == []


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_emit_round_trip_sorted(tmp_path, fmt):
    p = emit(ROWS, tmp_path / f"r.{fmt}", fmt)
    back = read_rows(p)
    assert back == sort_rows(ROWS)
    assert [(r.scheme, r.sweep, r.seed) for r in back] == [
        ("fixed", 0.0, 3), ("fixed", 10.0, 1), ("fixed", 10.0, 2), ("joint", 10.0, 1)]


def test_emit_is_stable_under_input_order(tmp_path):
    a = emit(ROWS, tmp_path / "a.csv").read_bytes()
    b = emit(ROWS[::-1], tmp_path / "b.csv").read_bytes()
    assert a == b


def test_write_rows_stream():
    buf = io.StringIO()
    write_rows(ROWS[:1], buf)
    assert buf.getvalue().splitlines() == ["scheme,sweep,seed,rate,iters,ms", "joint,10.0,1,3.5,7,1.250"]


def test_emit_errors_name_path(tmp_path):
    bad = tmp_path / "missing" / "r.csv"
    with pytest.raises(OSError, match="missing"):
        emit(ROWS, bad)
    with pytest.raises(ValueError):
        emit(ROWS, tmp_path / "r.xml", "xml")


def test_summarize():
    s = summarize(ROWS)
    assert s[("fixed", 10.0)] == pytest.approx(1.5)
    assert list(s) == sorted(s)
