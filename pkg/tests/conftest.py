import numpy as np
import pytest

from herit_ridge.geno import RawGenotypeMatrix


def random_counts(rng, n, p, low=0.1, high=0.5):
    f = rng.uniform(low, high, size=p)
    return rng.binomial(2, f, size=(n, p)).astype(np.int8)


def polymorphic_matrix(rng, n, p) -> RawGenotypeMatrix:
    counts = random_counts(rng, n, p)
    # force every column to vary so empirical standardization is defined
    counts[0] = 0
    counts[1] = 2
    return RawGenotypeMatrix(counts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
