import numpy as np
import pytest

from uaeos.generator import ScenarioConfig, generate_instance, sample_environment
from uaeos.model import AttitudeProfile, EnvironmentRealization, Instance, Task


def const_task(i, ws, we, du, profit=10.0, pitch=0.0, roll=0.0):
    return Task(i, ws, we, du, profit, AttitudeProfile(pitch, 0.0, roll))


def sweep_task(i, ws, we, du, profit=10.0, roll=0.0, bound=27.0):
    return Task(i, ws, we, du, profit, AttitudeProfile(bound, -2 * bound / (we - ws), roll))


def make_instance(tasks, horizon=None, mmc=10_000.0, **kw):
    horizon = horizon if horizon is not None else max(t.we for t in tasks) + 1.0
    return Instance(tuple(tasks), horizon, mmc, **kw)


def expected_env(inst):
    return EnvironmentRealization.expected(inst)


@pytest.fixture(scope="session")
def small_cell():
    """A handful of generated NT=50 instances with one sampled world each."""
    out = []
    for seed in range(4):
        inst = generate_instance(ScenarioConfig(50, 2000, 1024, 0.2, seed=seed))
        out.append((inst, sample_environment(inst, 0.2, 100 + seed)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_small_instance(rng, nt, horizon=300.0, mmc=None):
    """Few sweeping tasks packed into a short horizon, so windows and maneuvers conflict."""
    tasks = []
    for i in range(nt):
        du = float(rng.uniform(15, 30))
        length = float(rng.uniform(max(du + 10, 60), 120))
        ws = float(rng.uniform(0, horizon - length))
        tasks.append((ws, length, du, float(rng.uniform(10, 80)), float(rng.uniform(-27, 27))))
    tasks.sort()
    built = [sweep_task(i, ws, ws + n, du, profit=p, roll=roll) for i, (ws, n, du, p, roll) in enumerate(tasks)]
    if mmc is None:
        mmc = float(rng.choice([10_000.0, 3.5 * 55]))
    return Instance(tuple(built), horizon, mmc, pitch_bound=27.0, roll_bound=27.0)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record the verdict line of one acceptance criterion; printed at the end of the session."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
