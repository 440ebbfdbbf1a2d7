"""The compiled kernels must agree with the numpy fallback."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import crandn, random_channel_set
from p6dma import _core_py
from p6dma.polarization import QuantizationConfig
from p6dma.wmmse_pdd import SolverConfig, augmented_lagrangian, bcd_sweep, initial_state, solve

core = pytest.importorskip("p6dma._core", reason="compiled kernels not built")

NOISE = 0.1


@given(st.integers(0, 2**31 - 1), st.sampled_from([(1, 1), (2, 2), (2, 0), (0, 2), (3, 3)]))
def test_projection_agrees(seed, bits):
    q = QuantizationConfig(*bits)
    z = np.ascontiguousarray(crandn(np.random.default_rng(seed), 64))
    np.testing.assert_array_equal(core.project_codebook(z, q.phases, q.amplitudes),
                                  _core_py.project_codebook(z, q.phases, q.amplitudes))


@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
def test_eta_agrees(seed, zeta):
    rng = np.random.default_rng(seed)
    lam = np.sort(rng.uniform(1e-3, 10, 6))
    p = rng.uniform(0, 5, 6)
    assert core.precoder_eta(lam, p, zeta) == pytest.approx(_core_py.precoder_eta(lam, p, zeta), rel=1e-12, abs=1e-14)


def test_solve_2x2_agrees():
    rng = np.random.default_rng(0)
    A = crandn(rng, 20, 2, 2)
    C = np.ascontiguousarray(A @ A.conj().transpose(0, 2, 1) + np.eye(2))
    b = np.ascontiguousarray(crandn(rng, 20, 2))
    np.testing.assert_allclose(core.solve_2x2(C, b), _core_py.solve_2x2(C, b), rtol=1e-13)
    np.testing.assert_allclose(np.einsum("kij,kj->ki", C, core.solve_2x2(C, b)), b, atol=1e-12)


@pytest.mark.parametrize("update_c", [True, False])
def test_compiled_sweep_matches_python_sweep(update_c):
    q = QuantizationConfig(2, 2)
    cfg = SolverConfig(power_budget=1.0, noise_power=NOISE)
    rng = np.random.default_rng(1)
    ch = random_channel_set(rng, 4, 8)
    a = initial_state(ch, cfg, q)
    a.t, a.mu = 0.1 * crandn(rng, 4, 2), 0.4
    b = a.copy()
    for _ in range(5):
        bcd_sweep(a, ch, cfg, q, update_c)
        val = core.pdd_sweep(ch.hlos, ch.depol, ch.weights, b.w, b.w_bar, b.v, b.v_bar, b.xi, b.eps, b.c,
                             b.t, b.t_bar, b.mu, NOISE, 1.0, q.phases, q.amplitudes, 1 / np.sqrt(2), update_c)
        assert val == pytest.approx(augmented_lagrangian(a, ch, NOISE), rel=1e-12)
        for name in ("w", "w_bar", "v", "v_bar", "xi", "eps", "c"):
            np.testing.assert_allclose(getattr(b, name), getattr(a, name), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_solvers_agree_end_to_end(seed):
    q = QuantizationConfig(2, 2)
    cfg = SolverConfig(power_budget=1.0, noise_power=NOISE)
    ch = random_channel_set(np.random.default_rng(seed), 3, 8)
    a, b = solve(ch, cfg, q, compiled=False), solve(ch, cfg, q, compiled=True)
    assert a.sweeps == b.sweeps
    assert a.weighted_sum_rate == pytest.approx(b.weighted_sum_rate, rel=1e-9)
