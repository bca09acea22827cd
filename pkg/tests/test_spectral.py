import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import char_poly_roots, zero_hopping
from loclab.errors import NearEigenvalueError, SolverError
from loclab.model import Box, DisorderSpec, build_hamiltonian, chain_hamiltonian, hamiltonian_from_potential
from loclab.spectral import (cluster_eigenvalues, eigendecompose, fermi_projection, resolvent_apply,
                             spectral_measure)


def _explicit(matrix):
    n = matrix.shape[0]
    sites = np.arange(n)[:, None]
    H = hamiltonian_from_potential(sites, np.zeros(n))
    object.__setattr__(H, "matrix", np.asarray(matrix, dtype=float))
    return H


def test_single_site():
    H = chain_hamiltonian([0.7])
    sol = eigendecompose(H)
    assert sol.eigenvalues.tolist() == [2.7]


def test_dirichlet_chain_closed_form():
    H = build_hamiltonian(Box((0,), 4), DisorderSpec(coupling=0.0))
    sol = eigendecompose(H)
    closed = 2 - 2 * np.cos(np.arange(1, 5) * np.pi / 5)
    assert np.allclose(sol.eigenvalues, np.sort(closed), atol=1e-13)
    assert np.allclose(sol.eigenvalues, char_poly_roots(H.matrix), atol=1e-10)


def test_random_5x5_against_characteristic_polynomial():
    rng = np.random.default_rng(17)
    A = rng.normal(size=(5, 5))
    A = A + A.T
    sol = eigendecompose(_explicit(A))
    assert np.allclose(sol.eigenvalues, char_poly_roots(A), atol=1e-8)


def test_residual_and_orthonormality(chain5):
    sol = eigendecompose(chain5)
    V, w = sol.eigenvectors, sol.eigenvalues
    assert np.max(np.abs(chain5.matrix @ V - V * w)) <= sol.residual + 1e-15
    assert sol.residual < 1e-12 and sol.orthonormality < 1e-12
    assert np.all(np.diff(w) >= 0)


def test_eigendecompose_rejects_impossible_tolerance(chain5):
    with pytest.raises(SolverError):
        eigendecompose(chain5, tol=1e-300)


def test_clusters_all_simple(chain5):
    clusters = cluster_eigenvalues(eigendecompose(chain5))
    assert [c.multiplicity for c in clusters] == [1] * 5


def test_constructed_double_eigenvalue():
    H = zero_hopping([0.5, 0.5, -1.0, 2.0])
    clusters = cluster_eigenvalues(eigendecompose(H))
    assert sorted(c.multiplicity for c in clusters) == [1, 1, 2]
    double = next(c for c in clusters if c.multiplicity == 2)
    assert double.value == pytest.approx(0.5)
    assert np.allclose(double.basis.T @ double.basis, np.eye(2), atol=1e-12)


def test_cluster_gaps_exceed_tolerance():
    H = build_hamiltonian(Box((0,), 40), DisorderSpec(coupling=2.0, master_seed=8))
    sol = eigendecompose(H)
    clusters = cluster_eigenvalues(sol, cluster_tol=1e-3)
    for a, b in zip(clusters[:-1], clusters[1:]):
        assert sol.eigenvalues[b.start] - sol.eigenvalues[b.start - 1] > 1e-3
    for c in clusters:
        assert c.spread <= (c.multiplicity - 1) * 1e-3


def test_resolvent_diagonal():
    H = zero_hopping([0.3, -1.4, 0.9, 2.2])
    rhs = np.arange(8.0).reshape(4, 2)
    res = resolvent_apply(H, 0.0, rhs)
    assert np.allclose(res.solution, rhs / np.diag(H.matrix)[:, None], rtol=1e-14)


def test_resolvent_identity_residual(box6):
    n = box6.n_sites
    res = resolvent_apply(box6, 0.3, np.eye(n))
    assert np.max(np.abs((box6.matrix - 0.3 * np.eye(n)) @ res.solution - np.eye(n))) <= 1e-10
    assert res.backward_error <= 1e-12


def test_green_column_matches_dense_inverse(box6):
    G = np.linalg.inv(box6.matrix - 0.3 * np.eye(6))
    col = resolvent_apply(box6, 0.3, np.eye(6)[:, [2]]).solution[:, 0]
    assert np.allclose(col, G[:, 2], atol=1e-9, rtol=0)


def test_resolvent_reports_distance(box6):
    w = np.linalg.eigvalsh(box6.matrix)
    res = resolvent_apply(box6, 0.3, np.eye(6)[:, :1])
    assert res.distance == pytest.approx(np.min(np.abs(w - 0.3)))


def test_resolvent_near_eigenvalue(box6):
    w = np.linalg.eigvalsh(box6.matrix)
    with pytest.raises(NearEigenvalueError):
        resolvent_apply(box6, w[2], np.eye(6))


def test_spectral_measure_empty_and_total():
    H = build_hamiltonian(Box((0, 0), 6), DisorderSpec(coupling=3.0, master_seed=1))
    sol = eigendecompose(H)
    assert spectral_measure(sol, 1.5, (50.0, 60.0)) == []
    total = sum(a.mass for a in spectral_measure(sol, 1.5))
    expected = np.sum(np.sqrt(1 + np.sum(H.sites ** 2, axis=1)) ** -3.0)
    assert abs(total - expected) <= 1e-10


def test_spectral_measure_additive(chain5):
    sol = eigendecompose(chain5)
    w = sol.eigenvalues
    cut = 0.5 * (w[1] + w[2])
    left = sum(a.mass for a in spectral_measure(sol, 1.0, (-10, cut)))
    right = sum(a.mass for a in spectral_measure(sol, 1.0, (cut, 10)))
    whole = sum(a.mass for a in spectral_measure(sol, 1.0))
    assert left + right == pytest.approx(whole, abs=1e-14)


def test_site_localized_atom_mass():
    H = zero_hopping([0.1, 0.7, -0.4, 1.3])
    sol = eigendecompose(H)
    b = -1  # potential 0.7 sits at site -1 of the box -2..1
    atoms = spectral_measure(sol, 1.0, (0.6, 0.8))
    assert len(atoms) == 1
    assert atoms[0].mass == pytest.approx((1 + b * b) ** -1.0, abs=1e-15)


def test_fermi_projection_limits(chain5):
    sol = eigendecompose(chain5)
    assert fermi_projection(sol, sol.eigenvalues[0] - 1).rank == 0
    assert np.allclose(fermi_projection(sol, sol.eigenvalues[-1]).matrix(), np.eye(5), atol=1e-12)


def test_fermi_projection_mid_spectrum(chain5):
    sol = eigendecompose(chain5)
    E = 0.5 * (sol.eigenvalues[2] + sol.eigenvalues[3])
    P = fermi_projection(sol, E).matrix()
    assert np.max(np.abs(P @ P - P)) <= 1e-12
    assert np.array_equal(P, P.T) or np.max(np.abs(P - P.T)) <= 1e-15
    assert fermi_projection(sol, E).rank == int(np.sum(np.linalg.eigvalsh(chain5.matrix) <= E)) == 3


def test_fermi_kernel_hs_symmetry(chain5):
    proj = fermi_projection(eigendecompose(chain5), 2.0)
    for i in range(5):
        for j in range(5):
            assert proj.kernel(i, j) == proj.kernel(j, i)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=12), st.floats(-1, 6))
def test_projector_identities(potential, E):
    sol = eigendecompose(chain_hamiltonian(potential))
    P = fermi_projection(sol, E).matrix()
    assert np.max(np.abs(P @ P - P)) <= 1e-12
    assert np.max(np.abs(P - P.T)) <= 1e-12
