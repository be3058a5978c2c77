import numpy as np
import pytest
from hypothesis import settings

from fiberlab.geometry import ToricPotential

settings.register_profile("fiberlab", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("fiberlab")


@pytest.fixture(scope="session")
def fs():
    return ToricPotential.fubini_study(1)


@pytest.fixture(scope="session")
def fs2():
    return ToricPotential.fubini_study(2)


@pytest.fixture(scope="session")
def bumped(fs):
    return fs.with_bump(0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


# one line per acceptance criterion, repeated at the end of the run
_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance():
    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
