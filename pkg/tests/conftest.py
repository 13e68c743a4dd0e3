import numpy as np
import pytest

from dtn_lab import AdmissibleDiskClass, CylinderClass, compute_zeros

DISK_CLASS = AdmissibleDiskClass(a=0.5, eps0=0.1, M=10.0, N=5.0)
CYLINDER_CLASS = CylinderClass(h=0.3, M=3.0)


@pytest.fixture(scope="session")
def zeros100():
    return compute_zeros(100)


@pytest.fixture(scope="session")
def zeros32():
    return compute_zeros(32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_disk(rng, cls=DISK_CLASS, margin=0.0):
    """Uniform draw from the class box, shrunk by ``margin`` on each side."""
    lo, hi = np.array(cls.bounds()).T
    span = hi - lo
    p = lo + margin * span + (1.0 - 2.0 * margin) * span * rng.random(3)
    return cls.make(p)


def random_cylinder(rng, cls=CYLINDER_CLASS, distinct=True):
    while True:
        a1, a2 = cls.M * rng.random(2)
        if not distinct or abs(a1 - a2) > 1e-3:
            return cls.make((a1, a2))


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion and return the verdict."""

    def record(number, checks):
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{text} [{'ok' if passed else 'FAIL'}]" for text, passed in checks)
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
