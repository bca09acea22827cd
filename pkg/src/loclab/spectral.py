"""Dense eigendecomposition, degeneracy clusters, resolvents, spectral measure, Fermi projections."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NearEigenvalueError, SolverError
from .model import weight_vector

__all__ = [
    "EigenSolution", "EigenCluster", "SpectralMeasureAtom", "ResolventResult",
    "FermiProjection", "eigendecompose", "cluster_eigenvalues", "resolvent_apply",
    "spectral_measure", "fermi_projection", "in_interval",
]

DEFAULT_CLUSTER_RTOL = 1e-8
DEFAULT_PIVOT_RTOL = 1e-12


def in_interval(values, interval):
    """Membership in the closed interval ``[lo, hi]``."""
    lo, hi = interval
    values = np.asarray(values)
    return (values >= lo) & (values <= hi)


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Full spectrum of a finite-volume Hamiltonian.

    ``eigenvalues`` ascend; ``eigenvectors`` holds orthonormal columns.
    ``residual`` is ``max_n ||H ψ_n - λ_n ψ_n||`` and ``orthonormality`` is
    ``max |<ψ_m, ψ_n> - δ_mn|`` as achieved.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float
    orthonormality: float
    sites: np.ndarray

    @property
    def n(self):
        return len(self.eigenvalues)

    @property
    def norm(self):
        return float(np.max(np.abs(self.eigenvalues), initial=0.0))

    @property
    def dim(self):
        return self.sites.shape[1]


@dataclass(frozen=True, eq=False)
class EigenCluster:
    """Eigenvalues grouped within ``cluster_tol``; ``basis`` spans ``Ran P_λ``."""

    value: float
    multiplicity: int
    basis: np.ndarray
    start: int
    cluster_tol: float
    spread: float = 0.0


@dataclass(frozen=True)
class SpectralMeasureAtom:
    eigenvalue: float
    mass: float
    multiplicity: int = 1


@dataclass(frozen=True, eq=False)
class ResolventResult:
    solution: np.ndarray
    distance: float
    backward_error: float


def eigendecompose(H, tol=None):
    """Full dense eigendecomposition of a symmetric finite-volume Hamiltonian.

    Parameters
    ----------
    H : FiniteVolumeHamiltonian
    tol : float, optional
        Bound on the residual and orthonormality defect. Defaults to
        ``1e-9 * max(1, ||H||)``.

    Returns
    -------
    EigenSolution

    Raises
    ------
    SolverError
        If LAPACK fails or the achieved accuracy exceeds ``tol``.
    """
    mat = H.matrix
    if not np.array_equal(mat, mat.T):
        raise SolverError("matrix is not symmetric")
    try:
        w, v = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigensolver failed: {exc}", {"n": mat.shape[0]}) from exc
    norm = float(np.max(np.abs(w), initial=0.0))
    if tol is None:
        tol = 1e-9 * max(1.0, norm)
    residual = float(np.max(np.linalg.norm(mat @ v - v * w, axis=0), initial=0.0))
    ortho = float(np.max(np.abs(v.T @ v - np.eye(len(w))), initial=0.0))
    if residual > tol or ortho > tol:
        raise SolverError("eigendecomposition inaccurate",
                          {"residual": residual, "orthonormality": ortho, "tol": tol})
    return EigenSolution(eigenvalues=w, eigenvectors=v, residual=residual,
                         orthonormality=ortho, sites=np.asarray(H.sites))


def cluster_eigenvalues(sol, cluster_tol=None):
    """Single-linkage grouping of sorted eigenvalues: gaps ``> cluster_tol`` split clusters."""
    if cluster_tol is None:
        cluster_tol = DEFAULT_CLUSTER_RTOL * max(sol.norm, 1.0)
    w = sol.eigenvalues
    if len(w) == 0:
        return []
    breaks = np.flatnonzero(np.diff(w) > cluster_tol) + 1
    bounds = np.concatenate(([0], breaks, [len(w)]))
    clusters = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        vals = w[lo:hi]
        clusters.append(EigenCluster(value=float(np.mean(vals)), multiplicity=int(hi - lo),
                                     basis=sol.eigenvectors[:, lo:hi], start=int(lo),
                                     cluster_tol=float(cluster_tol),
                                     spread=float(vals[-1] - vals[0])))
    return clusters


def resolvent_apply(H, E, rhs, eigenvalues=None, pivot_tol=None):
    """Solve ``(H - E) X = rhs`` with a symmetric (LDLᵀ) factorization.

    The guard for ``E ∉ σ(H)`` is the distance from ``E`` to the spectrum:
    it must exceed ``pivot_tol`` (default ``1e-12 * ||H||``).  When
    ``eigenvalues`` are not supplied they are computed.

    Raises
    ------
    NearEigenvalueError
        If ``dist(E, σ(H)) <= pivot_tol``.
    """
    mat = H.matrix if hasattr(H, "matrix") else np.asarray(H)
    if eigenvalues is None:
        eigenvalues = scipy.linalg.eigvalsh(mat)
    eigenvalues = np.asarray(eigenvalues)
    norm = float(np.max(np.abs(eigenvalues), initial=0.0))
    if pivot_tol is None:
        pivot_tol = DEFAULT_PIVOT_RTOL * max(norm, np.finfo(float).tiny)
    distance = float(np.min(np.abs(eigenvalues - E)))
    if distance <= pivot_tol:
        raise NearEigenvalueError(f"E={E} lies within {distance:.3g} of the spectrum", distance)
    shifted = mat - E * np.eye(mat.shape[0])
    rhs = np.asarray(rhs, dtype=float)
    x = scipy.linalg.solve(shifted, rhs, assume_a="sym", check_finite=False)
    res = shifted @ x - rhs
    scale = np.linalg.norm(shifted, np.inf) * np.max(np.abs(x)) + np.max(np.abs(rhs))
    backward = float(np.max(np.abs(res)) / scale) if scale > 0 else 0.0
    return ResolventResult(solution=x, distance=distance, backward_error=backward)


def spectral_measure(sol, kappa, interval=(-np.inf, np.inf), center=None, cluster_tol=None,
                     clusters=None):
    """Atoms ``μ({λ}) = ||T^{-1} P_λ||_2^2`` for eigenvalue clusters inside ``interval``.

    ``T`` is multiplication by ``<y - center>^kappa`` (``center`` defaults to
    the origin).
    """
    if center is None:
        center = (0,) * sol.dim
    inv_w2 = weight_vector(sol.sites, center, kappa) ** -2.0
    if clusters is None:
        clusters = cluster_eigenvalues(sol, cluster_tol)
    atoms = []
    for c in clusters:
        if not in_interval(c.value, interval):
            continue
        mass = float(np.sum(inv_w2[:, None] * c.basis ** 2))
        atoms.append(SpectralMeasureAtom(eigenvalue=c.value, mass=mass,
                                         multiplicity=c.multiplicity))
    return atoms


@dataclass(frozen=True, eq=False)
class FermiProjection:
    """Orthogonal projection onto ``span{ψ_n : λ_n <= E}``."""

    energy: float
    basis: np.ndarray

    @property
    def rank(self):
        return self.basis.shape[1]

    def matrix(self):
        return self.basis @ self.basis.T

    def kernel(self, i, j):
        """Matrix element ``<δ_i, P δ_j>`` between site indices."""
        return float(self.basis[i] @ self.basis[j])


def fermi_projection(sol, E):
    k = int(np.searchsorted(sol.eigenvalues, E, side="right"))
    return FermiProjection(energy=float(E), basis=sol.eigenvectors[:, :k])
