import numpy as np
import pytest

from densmap.grid import build_grid
from densmap.hamiltonian import HamiltonianSpec, ground_state


@pytest.fixture
def ring():
    """Periodic grid on [0, 2 pi) with 64 nodes."""
    return build_grid(2 * np.pi, 64)


@pytest.fixture
def box():
    """Dirichlet grid on (0, 1) with 99 interior nodes."""
    return build_grid(1.0, 99, "dirichlet")


@pytest.fixture
def cos_system(ring):
    """Ground state of ``-1/2 d^2/dx^2 + cos x`` on the ring."""
    spec = HamiltonianSpec(ring, np.cos(ring.x))
    return spec, ground_state(spec)


class AcceptanceLog:
    """Collects named checks per acceptance criterion for the end-of-run summary."""

    def __init__(self):
        self.checks: dict[int, list[tuple[str, str, bool]]] = {}
        self.titles: dict[int, str] = {}

    def check(self, number: int, title: str, name: str, value: float, limit: float,
              ok: bool | None = None, relation: str = "<=") -> bool:
        ok = bool(value <= limit) if ok is None else bool(ok)
        self.titles[number] = title
        self.checks.setdefault(number, []).append((name, f"{value:.3g} {relation} {limit:.3g}", ok))
        return ok

    def lines(self) -> list[str]:
        out = []
        for number in sorted(self.checks):
            checks = self.checks[number]
            verdict = "PASS" if all(ok for _, _, ok in checks) else "FAIL"
            detail = "; ".join(f"{name} {text}{'' if ok else ' (failed)'}"
                               for name, text, ok in checks)
            out.append(f"{verdict} criterion {number:2d} {self.titles[number]}: {detail}")
        return out


_ACCEPTANCE = AcceptanceLog()


@pytest.fixture(scope="session")
def acceptance():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    lines = _ACCEPTANCE.lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
