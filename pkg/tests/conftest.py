import pytest

from turnphase.phasefn import CoefficientSpec, build_phase
from turnphase.specfun import airy_q, bessel_normal_q, monomial_q


def _build(named, mode="supplied"):
    spec = CoefficientSpec.from_named(named, mode)
    a, b = named.domain
    return spec, build_phase(spec, a, b, named.turning_points[0])


@pytest.fixture(scope="session")
def airy_basis():
    return _build(airy_q())


@pytest.fixture(scope="session")
def bessel100_basis():
    return _build(bessel_normal_q(100.0))


@pytest.fixture(scope="session")
def monomial_bases():
    cache = {}

    def get(k):
        if k not in cache:
            cache[k] = _build(monomial_q(k))
        return cache[k]

    return get


_CRITERIA = pytest.StashKey()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; all lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def record(label, ok, detail):
        line = f"CRITERION {label}: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
