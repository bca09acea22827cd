"""Fermi-projection kernel decay and time-averaged transport moments on a finite volume."""
from __future__ import annotations

import math

import numpy as np

from .errors import InvalidParameterError
from .model import japanese_bracket, site_index as _site_index
from .spectral import in_interval

__all__ = [
    "fermi_kernel_sup", "fermi_kernel_sup_matrix", "fermi_kernel_profile", "smooth_bump",
    "transport_moment", "moment_integrand",
]


def _threshold_counts(sol, interval):
    """Fermi-projection ranks at which ``sup_{E ∈ I}`` can be attained.

    ``P^{(E)}`` is constant between eigenvalues, so the candidates are the
    left endpoint of ``I`` and every eigenvalue inside ``I``.
    """
    w = sol.eigenvalues
    lo, hi = interval
    k_lo = int(np.searchsorted(w, lo, side="right"))
    inside = np.flatnonzero(in_interval(w, interval))
    # rank after including an eigenvalue (degenerate ones included together)
    ranks = {k_lo}
    ranks.update(int(np.searchsorted(w, w[i], side="right")) for i in inside)
    return sorted(ranks)


def fermi_kernel_sup(sol, interval, x, y):
    """``sup_{E ∈ I} |<δ_x, P^{(E)} δ_y>|^2`` (exact, evaluated at spectral thresholds)."""
    i, j = _site_index(sol.sites, x), _site_index(sol.sites, y)
    if i is None or j is None:
        raise InvalidParameterError(f"sites {x}, {y} must lie in the volume")
    products = sol.eigenvectors[i] * sol.eigenvectors[j]
    partial = np.concatenate(([0.0], np.cumsum(products)))
    return float(max(partial[k] ** 2 for k in _threshold_counts(sol, interval)))


def fermi_kernel_sup_matrix(sol, interval, rows=None):
    """``sup_{E ∈ I} P^{(E)}[x, y]^2`` for all ``x`` in ``rows`` (default all sites) and all ``y``."""
    V = sol.eigenvectors
    rows = np.arange(V.shape[0]) if rows is None else np.asarray(rows)
    ranks = _threshold_counts(sol, interval)
    P = V[rows, :ranks[0]] @ V[:, :ranks[0]].T
    best = P ** 2
    for a, b in zip(ranks[:-1], ranks[1:]):
        P += V[rows, a:b] @ V[:, a:b].T
        np.maximum(best, P ** 2, out=best)
    return best


def fermi_kernel_profile(sol, interval, pairs, chunk=512):
    """Mean over each pair set of ``sup_{E ∈ I} P^{(E)}[x, y]^2`` (pairs from ``separation_pairs``)."""
    rows = np.unique(np.concatenate([ii for ii, _ in pairs]))
    pos = np.full(sol.n, -1)
    pos[rows] = np.arange(len(rows))
    best = np.empty((len(rows), sol.n))
    for start in range(0, len(rows), chunk):
        sl = slice(start, start + chunk)
        best[sl] = fermi_kernel_sup_matrix(sol, interval, rows=rows[sl])
    return np.array([float(np.mean(best[pos[ii], jj])) for ii, jj in pairs])


def smooth_bump(interval):
    """Compactly supported C^∞ bump on ``interval``, peak 1 at the midpoint.

    ``X(E) = exp(1 - 1/(1 - s^2))`` for ``|s| < 1`` with ``s`` the affine image
    of ``E`` onto (-1, 1), and 0 otherwise.
    """
    lo, hi = map(float, interval)
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise InvalidParameterError(f"bump needs a bounded nondegenerate interval, got {interval}")
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def bump(E):
        s = (np.asarray(E, dtype=float) - mid) / half
        out = np.zeros_like(s)
        inside = np.abs(s) < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out if out.ndim else float(out)

    bump.interval = (lo, hi)
    return bump


def _moment_pieces(sol, n, bump, source):
    if not n > 0:
        raise InvalidParameterError(f"moment order must be positive, got {n}")
    V, w = sol.eigenvectors, sol.eigenvalues
    src = (0,) * sol.dim if source is None else source
    i0 = _site_index(sol.sites, src)
    if i0 is None:
        raise InvalidParameterError(f"source site {src} is not in the volume")
    coeff = np.asarray(bump(w)) * V[i0]
    keep = np.flatnonzero(coeff != 0.0)
    weights = japanese_bracket(sol.sites - np.asarray(src)) ** n
    return w[keep], coeff[keep], V[:, keep], weights


def transport_moment(sol, n, bump, T, source=None):
    """Laplace-time-averaged moment ``(2/T) ∫ e^{-2t/T} ||<x>^{n/2} e^{-itH} X(H) δ_0||^2 dt``.

    In the eigenbasis the squared norm is ``Σ_{m,m'} c_m c_m' G_mm' e^{-it(λ_m - λ_m')}``
    with ``c_m = X(λ_m) ψ_m(0)`` and ``G_mm' = Σ_x <x>^n ψ_m(x) ψ_m'(x)``; the time
    average of each oscillating factor is ``2/(2 + iTΔ)`` whose symmetric part
    is ``4/(4 + T^2 Δ^2)``.  ``T = 0`` gives the static moment.
    """
    if T < 0:
        raise InvalidParameterError(f"T must be non-negative, got {T}")
    w, c, V, weights = _moment_pieces(sol, n, bump, source)
    if len(w) == 0:
        return 0.0
    G = V.T @ (weights[:, None] * V)
    delta = w[:, None] - w[None, :]
    kernel = 4.0 / (4.0 + (T * delta) ** 2)
    return float(c @ (G * kernel) @ c)


def moment_integrand(sol, n, bump, source=None):
    """``t ↦ ||<x>^{n/2} e^{-itH} X(H) δ_0||^2`` (used by quadrature checks)."""
    w, c, V, weights = _moment_pieces(sol, n, bump, source)

    def f(t):
        psi = V @ (c * np.exp(-1j * t * w))
        return float(np.sum(weights * np.abs(psi) ** 2))

    return f
