import numpy as np
import pytest
import scipy.integrate
import scipy.linalg
from hypothesis import given, settings, strategies as st

from conftest import zero_hopping
from loclab.errors import InvalidParameterError
from loclab.fermi_dynamics import (fermi_kernel_profile, fermi_kernel_sup, fermi_kernel_sup_matrix,
                                   moment_integrand, smooth_bump, transport_moment)
from loclab.model import Box, DisorderSpec, build_hamiltonian, chain_hamiltonian, separation_pairs
from loclab.spectral import eigendecompose, fermi_projection


def brute_sup(sol, interval, i, j, extra_grid=0):
    """Enumerate P^(E) at the left endpoint and every eigenvalue inside the interval."""
    lo, hi = interval
    energies = [lo] + [w for w in sol.eigenvalues if lo <= w <= hi]
    energies += list(np.linspace(lo, hi, extra_grid))
    return max(fermi_projection(sol, E).matrix()[i, j] ** 2 for E in energies)


def test_interval_below_spectrum_gives_zero(chain5):
    sol = eigendecompose(chain5)
    assert fermi_kernel_sup(sol, (-10, -9), (0,), (1,)) == 0.0
    assert np.all(fermi_kernel_sup_matrix(sol, (-10, -9)) == 0.0)


def test_top_of_spectrum_diagonal_is_one(chain5):
    sol = eigendecompose(chain5)
    for x in sol.sites:
        assert fermi_kernel_sup(sol, (0, 10), tuple(x), tuple(x)) == pytest.approx(1.0, abs=1e-12)


def test_matches_enumeration_oracle(chain5):
    sol = eigendecompose(chain5)
    interval = (sol.eigenvalues[0] - 0.5, sol.eigenvalues[-1] + 0.5)
    M = fermi_kernel_sup_matrix(sol, interval)
    for i in range(5):
        for j in range(5):
            oracle = brute_sup(sol, interval, i, j, extra_grid=200)
            assert abs(M[i, j] - oracle) <= 1e-9
            assert abs(fermi_kernel_sup(sol, interval, tuple(sol.sites[i]), tuple(sol.sites[j])) - oracle) <= 1e-9


def test_partial_interval_matches_enumeration(chain5):
    sol = eigendecompose(chain5)
    w = sol.eigenvalues
    interval = (0.5 * (w[0] + w[1]), 0.5 * (w[3] + w[4]))
    M = fermi_kernel_sup_matrix(sol, interval)
    for i in range(5):
        for j in range(5):
            assert abs(M[i, j] - brute_sup(sol, interval, i, j, extra_grid=100)) <= 1e-12


def test_closed_interval_includes_right_endpoint_eigenvalue(chain5):
    sol = eigendecompose(chain5)
    w = sol.eigenvalues
    interval = (w[2] - 1e-3, w[2])
    assert fermi_kernel_sup(sol, interval, (0,), (0,)) == pytest.approx(
        fermi_projection(sol, w[2]).matrix()[2, 2] ** 2)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=10), st.floats(-1, 5), st.floats(0.01, 3),
       st.floats(0.01, 2))
def test_symmetry_nesting_and_normalization(potential, lo, width, extra):
    sol = eigendecompose(chain_hamiltonian(potential))
    inner = (lo, lo + width)
    outer = (lo - extra, lo + width + extra)
    A = fermi_kernel_sup_matrix(sol, inner)
    B = fermi_kernel_sup_matrix(sol, outer)
    assert np.array_equal(A, A.T) or np.max(np.abs(A - A.T)) <= 1e-15
    assert np.all(A <= B + 1e-15)
    P = fermi_projection(sol, lo).matrix()
    assert np.allclose(np.sum(P ** 2, axis=1), np.diag(P), atol=1e-12)
    assert np.all(np.diag(P) <= 1 + 1e-12)


def test_profile_center_matches_pointwise():
    sol = eigendecompose(build_hamiltonian(Box((0,), 30), DisorderSpec(coupling=5.0, master_seed=1)))
    seps = [1, 2, 5, 10]
    prof = fermi_kernel_profile(sol, (-0.5, 0.5), separation_pairs(sol.sites, seps, mode="center"))
    direct = [fermi_kernel_sup(sol, (-0.5, 0.5), (0,), (r,)) for r in seps]
    assert np.allclose(prof, direct, rtol=1e-12, atol=1e-300)


def test_profile_translate_is_pair_average():
    sol = eigendecompose(build_hamiltonian(Box((0,), 20), DisorderSpec(coupling=5.0, master_seed=2)))
    pairs = separation_pairs(sol.sites, [3])
    prof = fermi_kernel_profile(sol, (-0.5, 0.5), pairs, chunk=7)
    M = fermi_kernel_sup_matrix(sol, (-0.5, 0.5))
    ii, jj = pairs[0]
    assert prof[0] == pytest.approx(np.mean(M[ii, jj]), rel=1e-12)


def test_bump_shape():
    X = smooth_bump((1.0, 3.0))
    assert X(2.0) == 1.0
    assert X(1.0) == 0.0 and X(3.0) == 0.0 and X(0.0) == 0.0
    for d in (0.1, 0.5, 0.99):
        assert X(2.0 + d) == pytest.approx(X(2.0 - d), rel=1e-11)
    assert np.all(np.diff(X(np.linspace(2.0, 3.0, 50))) <= 0)
    with pytest.raises(InvalidParameterError):
        smooth_bump((1.0, 1.0))


def _expm_oracle(H, n, bump, T, source_index):
    """Laplace-averaged moment by direct time quadrature of exp(-itH) X(H) δ_0."""
    w, V = np.linalg.eigh(H.matrix)
    phi0 = V @ (bump(w) * V[source_index])
    src = H.sites[source_index]
    weights = (1 + np.sum((H.sites - src) ** 2, axis=1)) ** (n / 2)

    def f(t):
        psi = scipy.linalg.expm(-1j * t * H.matrix) @ phi0
        return np.sum(weights * np.abs(psi) ** 2) * (2 / T) * np.exp(-2 * t / T)

    total, err = 0.0, 0.0
    edges = np.concatenate([np.linspace(0, 40 * T, 81)])
    for a, b in zip(edges[:-1], edges[1:]):
        val, e = scipy.integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val
        err += e
    return total, err


@pytest.mark.parametrize("T", [0.5, 3.0, 10.0])
def test_transport_closed_form_matches_quadrature(T):
    H = chain_hamiltonian([0.3, -0.7, 1.1, 0.2, -0.4, 0.9, -1.2], start=-3)
    sol = eigendecompose(H)
    X = smooth_bump((0.0, 4.0))
    closed = transport_moment(sol, 2.0, X, T)
    oracle, err = _expm_oracle(H, 2.0, X, T, source_index=3)
    assert err < 1e-8
    assert abs(closed - oracle) <= 1e-6


def test_transport_zero_hopping_independent_of_T():
    H = zero_hopping([0.2, -0.3, 0.1, 0.45, -0.25, 0.3])
    sol = eigendecompose(H)
    X = smooth_bump((-0.5, 0.5))
    values = [transport_moment(sol, 2.0, X, T) for T in (0.0, 1.0, 10.0, 1e3, 1e6)]
    assert max(values) - min(values) <= 1e-10
    assert values[0] > 0


def test_transport_static_limit(chain5):
    sol = eigendecompose(chain5)
    X = smooth_bump((0.5, 3.5))
    w, V = sol.eigenvalues, sol.eigenvectors
    state = V @ (X(w) * V[2])
    static = np.sum((1 + sol.sites[:, 0] ** 2) ** 1.5 * state ** 2)
    assert transport_moment(sol, 3.0, X, 0.0) == pytest.approx(static, rel=1e-12)
    assert transport_moment(sol, 3.0, X, 1e-8) == pytest.approx(static, rel=1e-9)


def test_transport_monotone_in_order(chain5):
    sol = eigendecompose(chain5)
    X = smooth_bump((0.5, 3.5))
    vals = [transport_moment(sol, n, X, 7.0) for n in (0.5, 1, 2, 4)]
    assert all(a <= b + 1e-15 for a, b in zip(vals[:-1], vals[1:]))


def test_integrand_time_zero_is_static(chain5):
    sol = eigendecompose(chain5)
    X = smooth_bump((0.5, 3.5))
    assert moment_integrand(sol, 2.0, X)(0.0) == pytest.approx(transport_moment(sol, 2.0, X, 0.0), rel=1e-12)


def test_transport_validation(chain5):
    sol = eigendecompose(chain5)
    X = smooth_bump((0.5, 3.5))
    with pytest.raises(InvalidParameterError):
        transport_moment(sol, 0.0, X, 1.0)
    with pytest.raises(InvalidParameterError):
        transport_moment(sol, 2.0, X, -1.0)
    assert transport_moment(sol, 2.0, smooth_bump((20, 30)), 5.0) == 0.0
