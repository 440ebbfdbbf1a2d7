import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from p6dma.channel import ChannelSet
from p6dma.polarization import depolarization_matrices

settings.register_profile("p6dma", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("p6dma")

ACCEPTANCE_LINES: list[str] = []


def random_channel_set(rng, K, N, scale=1.0) -> ChannelSet:
    """Unit-scale random channels with geometrically valid depolarisation matrices."""
    hlos = scale * (rng.normal(size=(K, N)) + 1j * rng.normal(size=(K, N))) / np.sqrt(2)
    theta = rng.uniform(-np.pi / 2, np.pi / 2, K)
    phi = rng.uniform(-np.pi, np.pi, K)
    depol = depolarization_matrices(rng.uniform(0, 2 * np.pi, 3), rng.uniform(0, 2 * np.pi, (K, 3)), theta, phi)
    return ChannelSet(hlos, depol, rng.uniform(0.5, 1.5, K))


def crandn(rng, *shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2)


@pytest.fixture
def report():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def add(number: int, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
