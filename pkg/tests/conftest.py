import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sdcoag import KernelSpec
from sdcoag.rhs import BACKENDS

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SEPARABLE = {
    "constant": KernelSpec.constant(1.0),
    "sum": KernelSpec.sum(1.0),
    "alpha_sum": KernelSpec.alpha_sum(0.5),
    "product": KernelSpec.product(1.0),
}
ALL_KERNELS = dict(SEPARABLE, min_power=KernelSpec.min_power(1.0, 1.5))


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def unit_mass_state(rng, n):
    psi = rng.random(n)
    return psi / (np.arange(1, n + 1) @ psi)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
