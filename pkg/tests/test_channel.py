import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from p6dma.channel import (
    ISOTROPIC,
    ChannelSample,
    ChannelSet,
    RadiationPattern,
    UserState,
    achievable_rate,
    build_channel_set,
    channel_sample,
    effective_channel,
    effective_channels,
    effective_gain,
    full_polarized_channel,
    mrt_precoders,
    polarformed_gain,
    steering_vector,
    unpolarformed_channel,
)
from p6dma.geometry import ArrayGeometry, Direction, RotationAngles
from p6dma.polarization import BS_SCALE

from conftest import crandn

LAM = 0.0125


def random_user(rng, weight=1.0):
    return UserState(Direction(rng.uniform(-1.5, 1.5), rng.uniform(-3, 3)), rng.uniform(5, 50),
                     rng.uniform(1e-9, 1e-6), RotationAngles.from_array(rng.uniform(0, 6.3, 3)), weight)


def test_steering_examples():
    geom = ArrayGeometry(np.zeros((3, 3)))
    np.testing.assert_allclose(steering_vector(geom, (0, 0, 0), Direction(0.3, 1.0), LAM), np.ones(3))
    geom = ArrayGeometry(np.array([[LAM / 4, 0, 0], [-LAM / 4, 0, 0]]))
    a = steering_vector(geom, (0, 0, 0), Direction(0, 0), LAM)
    np.testing.assert_allclose(a, [np.exp(-0.5j * np.pi), np.exp(0.5j * np.pi)], atol=1e-15)
    with pytest.raises(ValueError):
        steering_vector(geom, (0, 0, 0), Direction(0, 0), 0.0)


@given(st.integers(0, 2**31))
def test_steering_unit_modulus(seed):
    rng = np.random.default_rng(seed)
    geom = ArrayGeometry(rng.normal(size=(5, 3)))
    a = steering_vector(geom, rng.uniform(0, 6, 3), Direction(rng.uniform(-1.5, 1.5), rng.uniform(-3, 3)), LAM)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-14)


def test_gain_patterns():
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert effective_gain(ISOTROPIC, rng.uniform(0, 6, 3), Direction(rng.uniform(-1, 1), rng.uniform(-3, 3))) == 1.0
    pat = RadiationPattern("directive")
    assert pat.boresight_gain_dbi == pytest.approx(10 * np.log10(6))
    assert effective_gain(pat, (0, 0, 0), Direction(0, 0)) == pytest.approx(10 ** (pat.boresight_gain_dbi / 10))
    th = rng.uniform(-1.5, 1.5, 500)
    ph = rng.uniform(-3.1, 3.1, 500)
    assert np.all(pat.gain_dbi(th, ph) <= pat.boresight_gain_dbi + 1e-12)
    # behind the array: floor
    assert pat.gain_dbi(0.0, np.pi) == pytest.approx(pat.boresight_gain_dbi - 60.0)
    with pytest.raises(ValueError):
        RadiationPattern("cardioid")


def test_half_power_beamwidth():
    pat = RadiationPattern("directive", exponent=2.0)
    half = pat.half_power_beamwidth / 2
    assert pat.gain_dbi(0.0, half) == pytest.approx(pat.boresight_gain_dbi - 10 * np.log10(2), abs=1e-9)


def test_directive_pattern_follows_rotation():
    pat = RadiationPattern("directive")
    # rotate the array a quarter turn about z: local +x now points to global R e_x
    u = (0.0, 0.0, np.pi / 2)
    from p6dma.geometry import direction_of, rotation_matrix

    bore = direction_of(rotation_matrix(u) @ np.array([1.0, 0, 0]))
    assert effective_gain(pat, u, bore) == pytest.approx(10 ** (pat.boresight_gain_dbi / 10))


def test_unpolarformed_examples():
    geom = ArrayGeometry.upa(4, LAM / 2)
    user = UserState(Direction(0.2, 0.4), LAM, 1.0)
    h = unpolarformed_channel(user, geom, (0.1, 0.2, 0.3), ISOTROPIC, LAM)
    np.testing.assert_allclose(h, steering_vector(geom, (0.1, 0.2, 0.3), user.direction, LAM), atol=1e-12)
    one = ArrayGeometry(np.zeros((1, 3)))
    user = UserState(Direction(0.2, 0.4), 3.3, 4e-6)
    h = unpolarformed_channel(user, one, (1, 2, 3), ISOTROPIC, LAM)
    np.testing.assert_allclose(h, [np.sqrt(4e-6) * np.exp(-2j * np.pi * 3.3 / LAM)])


@given(st.integers(0, 2**31))
def test_unpolarformed_norm(seed):
    rng = np.random.default_rng(seed)
    geom = ArrayGeometry.upa(6, LAM / 2)
    pat = RadiationPattern("directive")
    user = random_user(rng)
    u = rng.uniform(0, 6, 3)
    h = unpolarformed_channel(user, geom, u, pat, LAM)
    g = effective_gain(pat, u, user.direction)
    assert np.linalg.norm(h) ** 2 == pytest.approx(6 * user.path_loss * g, rel=1e-10)


def test_user_validation():
    with pytest.raises(ValueError):
        UserState(Direction(0, 0), 0.0, 1.0)
    with pytest.raises(ValueError):
        UserState(Direction(0, 0), 1.0, 0.0)
    with pytest.raises(ValueError):
        UserState(Direction(0, 0), 1.0, 1.0, weight=-1)


def test_kronecker_examples():
    s = ChannelSample(np.array([1.0 + 0j]), np.eye(2))
    np.testing.assert_array_equal(full_polarized_channel(s), np.eye(2))
    s = ChannelSample(np.ones(3, complex), np.zeros((2, 2)))
    assert full_polarized_channel(s).shape == (6, 2) and not np.any(full_polarized_channel(s))


@given(st.integers(0, 2**31), st.integers(1, 8))
def test_factored_equals_kronecker(seed, N):
    rng = np.random.default_rng(seed)
    geom = ArrayGeometry(rng.normal(scale=LAM, size=(N, 3)))
    s = channel_sample(random_user(rng), geom, rng.uniform(0, 6, 3), RadiationPattern("directive"), LAM)
    w, v = crandn(rng, 2), crandn(rng, 2)
    hbar = full_polarized_channel(s)
    direct = np.kron(np.eye(N), v.conj()[None, :]) @ hbar @ w
    np.testing.assert_allclose(effective_channel(s, w, v), direct, atol=1e-12 * max(1, np.abs(direct).max()))


def test_effective_channel_examples():
    h = np.array([1.0, 1j])
    s = ChannelSample(h, np.eye(2))
    v = BS_SCALE * np.array([1.0, 0.0])
    np.testing.assert_allclose(effective_channel(s, np.array([1.0, 0]), v), BS_SCALE * h)
    assert polarformed_gain(np.eye(2), np.array([1.0, 0]), v) == pytest.approx(BS_SCALE)
    # v^H w = 0: full polarisation mismatch
    np.testing.assert_allclose(effective_channel(s, np.array([1.0, 1j]), np.array([1.0, -1j])), 0, atol=1e-15)


def test_unpolarformed_independent_of_polarformers_and_user_rotation():
    rng = np.random.default_rng(4)
    geom = ArrayGeometry.upa(4, LAM / 2)
    base = random_user(rng)
    u = rng.uniform(0, 6, 3)
    h0 = unpolarformed_channel(base, geom, u, ISOTROPIC, LAM)
    other = UserState(base.direction, base.distance, base.path_loss, RotationAngles(1, 2, 3))
    np.testing.assert_array_equal(unpolarformed_channel(other, geom, u, ISOTROPIC, LAM), h0)


def test_channel_set_matches_per_user():
    rng = np.random.default_rng(5)
    geom = ArrayGeometry.upa(4, LAM / 2)
    users = [random_user(rng, w) for w in (1.0, 0.5, 2.0)]
    u = rng.uniform(0, 6, 3)
    pat = RadiationPattern("directive")
    cs = build_channel_set(users, geom, u, pat, LAM)
    for k, user in enumerate(users):
        smp = channel_sample(user, geom, u, pat, LAM)
        np.testing.assert_allclose(cs.hlos[k], smp.unpolarformed, rtol=1e-10)
        np.testing.assert_allclose(cs.depol[k], smp.depolarization, atol=1e-14)
    np.testing.assert_array_equal(cs.weights, [1.0, 0.5, 2.0])
    back = ChannelSet.from_samples(cs.samples(), cs.weights)
    np.testing.assert_array_equal(back.hlos, cs.hlos)


def test_rate_examples():
    h = np.array([[1.0 + 0j]])
    rates, total = achievable_rate(h, np.array([[1.0 + 0j]]), 1.0)
    assert rates[0] == pytest.approx(1.0) and total == pytest.approx(1.0)
    H = crandn(np.random.default_rng(0), 3, 4)
    rates, total = achievable_rate(H, np.zeros((3, 4)), 1.0)
    assert not np.any(rates) and total == 0
    with pytest.raises(ValueError):
        achievable_rate(H, np.zeros((2, 4)), 1.0)
    with pytest.raises(ValueError):
        achievable_rate(H, np.zeros((3, 4)), 0.0)


@given(st.integers(0, 2**31))
def test_rate_direct_summation(seed):
    rng = np.random.default_rng(seed)
    H, C = crandn(rng, 2, 3), crandn(rng, 2, 3)
    sigma2 = rng.uniform(0.1, 2)
    w = rng.uniform(0, 2, 2)
    rates, total = achievable_rate(H, C, sigma2, w)
    for k in range(2):
        sig = abs(np.vdot(H[k], C[k])) ** 2
        intf = sum(abs(np.vdot(H[k], C[j])) ** 2 for j in range(2) if j != k)
        assert rates[k] == pytest.approx(np.log2(1 + sig / (intf + sigma2)), abs=1e-12)
    assert total == pytest.approx(w @ rates, abs=1e-12)


@given(st.integers(0, 2**31), st.floats(1.01, 100))
def test_rate_scaling_invariance(seed, alpha):
    rng = np.random.default_rng(seed)
    H, C = crandn(rng, 3, 4), crandn(rng, 3, 4)
    r1, _ = achievable_rate(H, C, 0.3)
    r2, _ = achievable_rate(H, alpha * C, 0.3 * alpha**2)
    np.testing.assert_allclose(r1, r2, rtol=1e-10)


def test_mrt():
    rng = np.random.default_rng(2)
    H = crandn(rng, 3, 4)
    C = mrt_precoders(H, 2.0)
    assert np.sum(np.abs(C) ** 2) == pytest.approx(2.0)
    for k in range(3):
        assert abs(np.vdot(C[k], H[k])) == pytest.approx(np.linalg.norm(C[k]) * np.linalg.norm(H[k]))
    H[1] = 0
    fb = crandn(rng, 3, 4)
    C = mrt_precoders(H, 3.0, fallback=fb)
    np.testing.assert_allclose(C[1], fb[1] / np.linalg.norm(fb[1]))
    assert not np.any(mrt_precoders(H, 3.0)[1])


def test_effective_channels_vectorised():
    rng = np.random.default_rng(9)
    from conftest import random_channel_set

    ch = random_channel_set(rng, 4, 3)
    w, v = crandn(rng, 4, 2), crandn(rng, 2)
    H = effective_channels(ch, w, v)
    for k, smp in enumerate(ch.samples()):
        np.testing.assert_allclose(H[k], effective_channel(smp, w[k], v), atol=1e-14)
