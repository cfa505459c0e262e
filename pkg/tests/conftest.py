import numpy as np
import pytest

from atomrec import CanonicalBasis, MeasurementOperator, RankOneManifold, ring_frame

ACCEPTANCE_LINES = []


def record_acceptance(number, name, ok, detail=""):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}"
    if detail:
        line += f"  [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def frame8():
    return ring_frame(8)


@pytest.fixture(scope="session")
def ones_op():
    """Operator on R^3 whose null space is spanned by (1, 1, 1)."""
    return MeasurementOperator.from_null_space(np.ones((3, 1)))


@pytest.fixture(scope="session")
def canon3():
    return CanonicalBasis(3)


@pytest.fixture(scope="session")
def rank22():
    return RankOneManifold(2, 2)
