"""Eigenfunction-correlation functionals W and Z, SUDEC products, SULE centres and multiplicities.

On a finite volume the spectrum is pure point, so the generalized-eigenfunction
functional coincides with W and is not computed separately.  For a cluster
with orthonormal basis ``φ_1..φ_ν`` and weight ``w(y) = <y - a>^κ``::

    Z(a)^2 = Σ_j φ_j(a)^2 / Σ_j Σ_y φ_j(y)^2 w(y)^-2
    W(a)^2 = max_v (vᵀ A v) / (vᵀ B v),  A = u uᵀ, u_j = φ_j(a),  B_ij = Σ_y φ_i φ_j w^-2
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidParameterError
from .model import japanese_bracket, site_index as _site_index, sup_distance, weight_vector
from .spectral import cluster_eigenvalues, in_interval

__all__ = [
    "SuleRecord", "PairCorrelation", "compute_Z", "compute_W", "w_bound",
    "correlation_tables", "sudec_sup_product", "eigenfunction_pair_correlation",
    "sule_centers", "count_NL", "multiplicity_histogram", "sudec_profile", "sup_product_profile",
    "MultiplicityReport",
]


_CHUNK = 1024


def w_bound(d, kappa):
    """Upper bound ``(1 + d/4)^(κ/2)`` on W and Z."""
    return (1 + d / 4) ** (kappa / 2)


def _inv_w2(sites, a, kappa):
    return weight_vector(sites, a, kappa) ** -2.0


def compute_Z(cluster, a, kappa, sites):
    basis = cluster.basis
    idx = _site_index(sites, a)
    num = 0.0 if idx is None else float(np.sum(basis[idx] ** 2))
    den = float(np.sum(_inv_w2(sites, a, kappa)[:, None] * basis ** 2))
    return float(np.sqrt(num / den))


def compute_W(cluster, a, kappa, sites):
    """Sup of ``||χ_a φ|| / ||T_a^{-1} φ||`` over the eigenspace, via a ν×ν generalized eigenproblem."""
    basis = cluster.basis
    idx = _site_index(sites, a)
    if idx is None:
        return 0.0
    u = basis[idx]
    if cluster.multiplicity == 1:
        den = float(np.sum(_inv_w2(sites, a, kappa) * basis[:, 0] ** 2))
        return float(abs(u[0]) / np.sqrt(den))
    B = basis.T @ (_inv_w2(sites, a, kappa)[:, None] * basis)
    A = np.outer(u, u)
    top = scipy.linalg.eigh(A, B, eigvals_only=True)[-1]
    return float(np.sqrt(max(top, 0.0)))


def correlation_tables(sol, kappa, interval=(-np.inf, np.inf), cluster_tol=None, clusters=None,
                       kinds=("W", "Z")):
    """W and Z for every cluster in ``interval`` and every site of the volume.

    Returns
    -------
    (clusters, tables)
        ``tables[kind]`` has shape ``(n_clusters, n_sites)``.
    """
    sites = sol.sites
    if clusters is None:
        clusters = cluster_eigenvalues(sol, cluster_tol)
    clusters = [c for c in clusters if in_interval(c.value, interval)]
    n = len(sites)
    tables = {k: np.zeros((len(clusters), n)) for k in kinds}
    if not clusters:
        return clusters, tables
    # per-cluster site masses Σ_j φ_j(y)^2, one column per cluster
    Q = np.stack([np.sum(c.basis ** 2, axis=1) for c in clusters], axis=1)
    den = np.empty((len(clusters), n))
    for start in range(0, n, _CHUNK):
        sl = slice(start, min(start + _CHUNK, n))
        # K[y, a] = <y - a>^{-2κ}
        K = japanese_bracket(sites[:, None, :] - sites[None, sl, :]) ** (-2.0 * kappa)
        den[:, sl] = Q.T @ K
    ratio = np.sqrt(Q.T / den)
    if "Z" in tables:
        tables["Z"][:] = ratio
    if "W" in tables:
        tables["W"][:] = ratio
        for i, c in enumerate(clusters):
            if c.multiplicity > 1:
                tables["W"][i] = [compute_W(c, a, kappa, sites) for a in sites]
    return clusters, tables


def sudec_sup_product(sol, kappa, interval, x, y, cluster_tol=None, clusters=None):
    """``max_{E_n ∈ I} W_{E_n}(x) W_{E_n}(y)``; 0 when no eigenvalue lies in ``interval``."""
    if clusters is None:
        clusters = cluster_eigenvalues(sol, cluster_tol)
    best = 0.0
    for c in clusters:
        if in_interval(c.value, interval):
            best = max(best, compute_W(c, x, kappa, sol.sites) * compute_W(c, y, kappa, sol.sites))
    return best


def sudec_profile(sol, kappa, interval, pairs, cluster_tol=None):
    """Mean over each pair set of ``max_{E_n ∈ I} W_n(x) W_n(y)``.

    ``pairs`` comes from :func:`loclab.model.separation_pairs`; one value per
    separation is returned (0 when no eigenvalue lies in ``interval``).
    """
    _, tables = correlation_tables(sol, kappa, interval, cluster_tol, kinds=("W",))
    return sup_product_profile(tables["W"], pairs)


def sup_product_profile(W, pairs):
    """Pair-set means of ``max_n W[n, x] W[n, y]`` for a precomputed ``(n_clusters, n_sites)`` table."""
    out = np.zeros(len(pairs))
    if W.shape[0] == 0:
        return out
    for k, (ii, jj) in enumerate(pairs):
        out[k] = float(np.mean(np.max(W[:, ii] * W[:, jj], axis=0)))
    return out


@dataclass(frozen=True)
class PairCorrelation:
    product: float
    normalizer: float
    x_mass: float
    y_mass: float


def eigenfunction_pair_correlation(phi_i, phi_j, x, y, kappa, sites):
    """``||χ_x φ_i|| ||χ_y φ_j||`` and the normalizer ``sqrt(α_i α_j)``, ``α = ||T^{-1}φ||^2``."""
    ix, iy = _site_index(sites, x), _site_index(sites, y)
    xm = 0.0 if ix is None else float(abs(phi_i[ix]))
    ym = 0.0 if iy is None else float(abs(phi_j[iy]))
    inv = _inv_w2(sites, (0,) * sites.shape[1], kappa)
    alpha_i = float(np.sum(inv * phi_i ** 2))
    alpha_j = float(np.sum(inv * phi_j ** 2))
    return PairCorrelation(product=xm * ym, normalizer=float(np.sqrt(alpha_i * alpha_j)),
                           x_mass=xm, y_mass=ym)


@dataclass(frozen=True)
class SuleRecord:
    index: int
    energy: float
    center: tuple
    multiplicity: int
    alphas: tuple

    @property
    def mass(self):
        return float(sum(self.alphas))


def _lex_argmax(values, sites, rtol=1e-12):
    top = np.max(values)
    cand = np.flatnonzero(values >= top * (1 - rtol))
    order = np.lexsort(sites[cand].T[::-1])
    return cand[order[0]]


def sule_centers(sol, kappa, interval=(-np.inf, np.inf), cluster_tol=None, clusters=None):
    """Localization centre of each cluster in ``interval`` and its ``α_{n,j}``.

    The centre maximizes ``|ψ(y)|`` for the first basis vector of the cluster;
    ties go to the lexicographically smallest site.
    """
    if clusters is None:
        clusters = cluster_eigenvalues(sol, cluster_tol)
    sites = sol.sites
    inv = _inv_w2(sites, (0,) * sites.shape[1], kappa)
    records = []
    for n, c in enumerate(clusters):
        if not in_interval(c.value, interval):
            continue
        psi = c.basis[:, 0]
        centre = tuple(int(v) for v in sites[_lex_argmax(np.abs(psi), sites)])
        alphas = tuple(float(a) for a in inv @ c.basis ** 2)
        records.append(SuleRecord(index=n, energy=c.value, center=centre,
                                  multiplicity=c.multiplicity, alphas=alphas))
    return records


def count_NL(records, L, origin=None):
    """``N_L = Σ ν_n`` over centres with ``|y_n|_∞ <= L``."""
    if L < 1:
        raise InvalidParameterError(f"L must be >= 1, got {L}")
    total = 0
    for r in records:
        o = np.zeros(len(r.center)) if origin is None else np.asarray(origin)
        if sup_distance(r.center, o) <= L:
            total += r.multiplicity
    return total


@dataclass(frozen=True)
class MultiplicityReport:
    histogram: dict
    max_mass_times_multiplicity: float
    total_mass: float
    max_multiplicity: int


def multiplicity_histogram(sol, cluster_tol=None, kappa=None, interval=(-np.inf, np.inf)):
    """Histogram ``ν -> count`` over clusters in ``interval`` and ``max_n μ({E_n}) ν_n``."""
    clusters = [c for c in cluster_eigenvalues(sol, cluster_tol) if in_interval(c.value, interval)]
    hist = dict(sorted(Counter(c.multiplicity for c in clusters).items()))
    if kappa is None:
        kappa = (sol.dim + 1) / 2
    inv = _inv_w2(sol.sites, (0,) * sol.dim, kappa)
    masses = [float(np.sum(inv[:, None] * c.basis ** 2)) for c in clusters]
    prod = max((m * c.multiplicity for m, c in zip(masses, clusters)), default=0.0)
    return MultiplicityReport(histogram=hist, max_mass_times_multiplicity=prod,
                              total_mass=float(sum(masses)),
                              max_multiplicity=max(hist, default=0))
