import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rocus.env2d import DEFAULT_PARAMS, Task2D, sample_prior_task

settings.register_profile(
    "rocus", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("rocus")

FAR = 50.0


def far_task(*pts, n=15):
    """Task whose listed points are real and the rest parked far away."""
    arr = np.full((n, 2), FAR)
    if pts:
        arr[: len(pts)] = np.asarray(pts, dtype=float)
    return Task2D(arr)


@pytest.fixture
def params():
    return DEFAULT_PARAMS


@pytest.fixture
def empty_task():
    return far_task()


@pytest.fixture(scope="session")
def prior_tasks():
    rng = np.random.default_rng(1234)
    return [sample_prior_task(rng) for _ in range(50)]


def gap_wall_task(gap: int):
    """A wall along x = -y sealing the arena, with one gap.

    17 slots at spacing ~0.22 (field between neighbours > eta); slots
    ``gap`` and ``gap + 1`` are dropped, leaving a ~0.66 wide opening.
    """
    if not 2 <= gap <= 13:
        raise ValueError("gap slot must be interior")
    t = np.linspace(-1.25, 1.25, 17)
    keep = np.delete(t, [gap, gap + 1])
    return Task2D(np.stack([keep, -keep], axis=1))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
