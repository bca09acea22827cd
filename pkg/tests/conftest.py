import numpy as np
import pytest

from loclab.model import Box, chain_hamiltonian, hamiltonian_from_potential

# 5-site chain on sites -2..2 (hopping 1, diagonal 2 + v)
FIXTURE5 = (0.3, -0.7, 1.1, 0.2, -0.4)
# L = 6 box on sites -3..2
FIXTURE6 = (0.42, -0.91, 0.17, 0.66, -0.35, 0.8)


@pytest.fixture
def chain5():
    return chain_hamiltonian(FIXTURE5, start=-2)


@pytest.fixture
def box6():
    box = Box((0,), 6)
    return hamiltonian_from_potential(box, np.asarray(FIXTURE6), box=box)


def zero_hopping(potential, side=None):
    """Box Hamiltonian with no hopping: eigenvectors are site deltas."""
    potential = np.asarray(potential, dtype=float)
    box = Box((0,), side or len(potential))
    return hamiltonian_from_potential(box, potential, hopping=0.0, box=box)


def char_poly_roots(matrix):
    """Eigenvalues from the characteristic polynomial (Faddeev-LeVerrier coefficients)."""
    A = np.asarray(matrix, dtype=float)
    n = A.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(A)
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(A @ M) / k)
    roots = np.roots(coeffs)
    return np.sort(roots.real)


ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    """Record one acceptance line; printed in the terminal summary."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
