import numpy as np
import pytest

from multishape.deformation import PreShape
from multishape.fourier import MultiCurve
from multishape.synth import builtin_template

ACCEPTANCE_LINES: list[str] = []


def random_curve(rng, p=3, M=22, scale=1.0) -> MultiCurve:
    return MultiCurve(scale * rng.standard_normal((p, 2, M + 1)))


def random_preshape(rng, p=3, M=22) -> PreShape:
    coef = rng.standard_normal((p, 2, M + 1))
    coef[:, :, 0] -= coef[:, :, 0].mean(axis=0)
    coef /= np.sqrt(np.sum(coef * coef))
    return PreShape(coef)


def random_tangent(rng, mu: MultiCurve) -> np.ndarray:
    """Jointly centered coefficient array orthogonal to ``mu``, unit norm."""
    v = rng.standard_normal(mu.coef.shape)
    v[:, :, 0] -= v[:, :, 0].mean(axis=0)
    v -= np.sum(v * mu.coef) * mu.coef
    return v / np.sqrt(np.sum(v * v))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def template():
    return builtin_template(22)


@pytest.fixture(scope="session")
def template_preshape(template):
    c = template.coef / template.norm()
    return PreShape(c)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
