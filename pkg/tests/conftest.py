import numpy as np
import pytest

from slicephase.ensemble import OMEGA0_DEFAULT


@pytest.fixture
def omega0():
    return OMEGA0_DEFAULT


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rabi_population(omega, delta, t):
    """Closed-form excited population for a constant drive starting in |g>."""
    w2 = omega**2 + delta**2
    return np.where(w2 > 0, omega**2 / np.where(w2 > 0, w2, 1.0)
                    * np.sin(np.sqrt(w2) * t / 2) ** 2, 0.0)


def rabi_amplitude(omega, phase, delta, t):
    """Closed-form <e|U|g> for a constant drive ``(omega, phase, delta)``."""
    w = np.sqrt(omega**2 + delta**2)
    return -1j * np.exp(-1j * phase) * omega / w * np.sin(w * t / 2)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one PASS/FAIL line per acceptance criterion."""
    def report(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
