"""Multiscale-analysis criterion: box regularity, the two-box event and its probability along scales.

A box ``Λ_L(x)`` with ``L ∈ 6N`` is (m, E)-regular when ``E`` is off its
spectrum and the belt-to-core block of the resolvent satisfies
``||Γ_{x,L} R(E) χ_{x,L/3}|| <= exp(-m L / 2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NearEigenvalueError, PreconditionError
from .model import Box, build_hamiltonian, max_matrix_size, sup_distance
from .spectral import resolvent_apply

__all__ = [
    "BeltGeometry", "ScaleSequence", "RegularityVerdict", "EventROutcome", "ScaleRow",
    "belt_geometry", "regularity_check", "certify_over_interval", "event_R",
    "estimate_probability", "run_scale_sequence", "round_to_6N", "msa_bound",
]

REGULAR = "regular"
NOT_REGULAR = "not_regular"


def round_to_6N(K):
    """``[K]_{6N}``: the largest multiple of 6 not exceeding ``K``."""
    return int(math.floor(K / 6.0)) * 6


def msa_bound(L, zeta):
    """Lower bound ``1 - exp(-L^zeta)`` on the probability of the two-box event."""
    return 1.0 - math.exp(-(L ** zeta))


@dataclass(frozen=True, eq=False)
class BeltGeometry:
    """Index sets of the belt ``{(L-3)/2 <= |y-x|_∞ <= (L-1)/2}`` and the core ``Λ_{L/3}(x)``."""

    box: Box
    belt: np.ndarray
    core: np.ndarray


def belt_geometry(box):
    if box.side % 6:
        raise InvalidParameterError(f"box side must be a multiple of 6, got {box.side}")
    sites = box.sites
    dist = sup_distance(sites, np.asarray(box.center))
    L = box.side
    belt = np.flatnonzero((dist >= (L - 3) / 2) & (dist <= (L - 1) / 2))
    core = np.flatnonzero(Box(box.center, L // 3).contains(sites))
    return BeltGeometry(box=box, belt=belt, core=core)


@dataclass(frozen=True)
class RegularityVerdict:
    E: float
    m: float
    L: int
    verdict: str
    attained_norm: float
    certified_over: tuple
    resolvent_norm: float = math.inf
    reason: str = ""

    @property
    def regular(self):
        return self.verdict == REGULAR


def _geometry_for(H):
    if H.box is None:
        raise InvalidParameterError("regularity requires a Hamiltonian built on a Box")
    return belt_geometry(H.box)


def _block_norm(H, E, geom, eigenvalues, pivot_tol):
    """Return (belt×core resolvent norm, ||R(E)||); raises NearEigenvalueError."""
    n = H.n_sites
    rhs = np.zeros((n, len(geom.core)))
    rhs[geom.core, np.arange(len(geom.core))] = 1.0
    res = resolvent_apply(H, E, rhs, eigenvalues=eigenvalues, pivot_tol=pivot_tol)
    block = res.solution[geom.belt, :]
    return float(np.linalg.norm(block, 2)), 1.0 / res.distance


def regularity_check(H, E, m, eigenvalues=None, pivot_tol=None, geometry=None):
    """Pointwise (m, E)-regularity test of a finite-volume box Hamiltonian."""
    geom = geometry or _geometry_for(H)
    L = H.box.side
    threshold = math.exp(-m * L / 2)
    try:
        attained, rnorm = _block_norm(H, E, geom, eigenvalues, pivot_tol)
    except NearEigenvalueError:
        return RegularityVerdict(E=float(E), m=m, L=L, verdict=NOT_REGULAR, attained_norm=math.inf,
                                 certified_over=(float(E), float(E)), reason="near eigenvalue")
    verdict = REGULAR if attained <= threshold else NOT_REGULAR
    return RegularityVerdict(E=float(E), m=m, L=L, verdict=verdict, attained_norm=attained,
                             certified_over=(float(E), float(E)), resolvent_norm=rnorm)


def certify_over_interval(H, interval, m, eta=None, max_refine=6, eigenvalues=None,
                          pivot_tol=None, bound="spectral"):
    """Cover ``interval`` by energy cells and certify regularity on each whole cell.

    A cell of half-width ``h`` centred at ``E`` is certified regular when
    ``a(E) + h ||R(E)||^2 / (1 - h ||R(E)||) <= exp(-mL/2)`` with
    ``h ||R(E)|| < 1``, which bounds the block norm on the cell through the
    resolvent identity.  With ``bound="spectral"`` (default) the cell is also
    accepted under the sharper estimate
    ``a(E) + h Σ_n ||Γψ_n|| ||χψ_n|| / (δ_n (δ_n - h))``, ``δ_n = |λ_n - E| > h``,
    which follows from the same identity written in the eigenbasis; the
    smaller of the two bounds is used.  Cells that cannot be certified are halved up to
    ``max_refine`` times; whatever is still uncertified at that depth is
    reported ``not_regular`` (with the reason in ``reason``).

    Parameters
    ----------
    eta : float, optional
        Initial cell half-width; defaults to ``|I| / 64``.

    Returns
    -------
    list of RegularityVerdict
        Ordered by energy; their ``certified_over`` cells tile the interval.
    """
    lo, hi = map(float, interval)
    if not hi > lo:
        raise InvalidParameterError(f"interval must satisfy lo < hi, got {interval}")
    if eta is None:
        eta = (hi - lo) / 64
    if not eta > 0:
        raise InvalidParameterError(f"eta must be positive, got {eta}")
    if bound not in ("spectral", "resolvent"):
        raise InvalidParameterError(f"bound must be 'spectral' or 'resolvent', got {bound!r}")
    geom = _geometry_for(H)
    weights = None
    if bound == "spectral":
        eigenvalues, vecs = np.linalg.eigh(H.matrix)
        weights = (np.linalg.norm(vecs[geom.belt], axis=0)
                   * np.linalg.norm(vecs[geom.core], axis=0))
    elif eigenvalues is None:
        eigenvalues = np.linalg.eigvalsh(H.matrix)
    L = H.box.side
    threshold = math.exp(-m * L / 2)
    n_cells = max(1, math.ceil((hi - lo) / (2 * eta) - 1e-12))
    edges = np.linspace(lo, hi, n_cells + 1)
    out = []

    def visit(a, b, depth):
        E = 0.5 * (a + b)
        h = 0.5 * (b - a)
        try:
            attained, rnorm = _block_norm(H, E, geom, eigenvalues, pivot_tol)
        except NearEigenvalueError:
            attained, rnorm = math.inf, math.inf
        if _cell_increment(E, h, rnorm, eigenvalues, weights) + attained <= threshold:
            out.append(RegularityVerdict(E=E, m=m, L=L, verdict=REGULAR, attained_norm=attained,
                                         certified_over=(a, b), resolvent_norm=rnorm))
            return
        if depth < max_refine:
            visit(a, E, depth + 1)
            visit(E, b, depth + 1)
            return
        if math.isinf(attained):
            reason = "near eigenvalue"
        elif attained > threshold:
            reason = "violated at cell centre"
        else:
            reason = f"unresolved after {max_refine} refinements"
        out.append(RegularityVerdict(E=E, m=m, L=L, verdict=NOT_REGULAR, attained_norm=attained,
                                     certified_over=(a, b), resolvent_norm=rnorm, reason=reason))

    for a, b in zip(edges[:-1], edges[1:]):
        visit(float(a), float(b), 0)
    return out


def _cell_increment(E, h, rnorm, eigenvalues, weights):
    """Upper bound on ``sup_{|E'-E|<=h} ||Γ(R(E') - R(E))χ||`` (inf when none applies)."""
    q = h * rnorm
    best = h * rnorm * rnorm / (1 - q) if q < 1 else math.inf
    if weights is not None:
        delta = np.abs(eigenvalues - E)
        if np.all(delta > h):
            best = min(best, float(h * np.sum(weights / (delta * (delta - h)))))
    return best


@dataclass(frozen=True)
class EventROutcome:
    x: tuple
    y: tuple
    L: int
    m: float
    interval: tuple
    holds: bool
    witness: tuple | None = None
    n_cells: int = 0


def _regular_cover(verdicts):
    return [v.certified_over for v in verdicts if v.regular]


def _covered(E, cells):
    return any(a <= E <= b for a, b in cells)


def combine_verdicts(interval, verdicts_x, verdicts_y):
    """First energy segment of ``interval`` on which neither box is certified regular."""
    lo, hi = interval
    cover_x, cover_y = _regular_cover(verdicts_x), _regular_cover(verdicts_y)
    points = {lo, hi}
    for v in list(verdicts_x) + list(verdicts_y):
        points.update(v.certified_over)
    points = sorted(p for p in points if lo <= p <= hi)
    for a, b in zip(points[:-1], points[1:]):
        mid = 0.5 * (a + b)
        if not (_covered(mid, cover_x) or _covered(mid, cover_y)):
            return (a, b)
    return None


def event_R(x, y, L, m, interval, spec, eta=None, max_refine=6, hopping=1.0, hamiltonians=None,
            bound="spectral"):
    """Does, for every energy in ``interval``, one of ``Λ_L(x)``, ``Λ_L(y)`` certify as regular?

    Raises
    ------
    PreconditionError
        If ``|x - y|_∞ <= L`` (boxes not separated).
    """
    bx, by = Box(x, L), Box(y, L)
    if not sup_distance(np.asarray(bx.center), np.asarray(by.center)) > L:
        raise PreconditionError(f"boxes at {bx.center} and {by.center} need |x-y| > L={L}")
    if hamiltonians is None:
        hamiltonians = (build_hamiltonian(bx, spec, hopping), build_hamiltonian(by, spec, hopping))
    vx = certify_over_interval(hamiltonians[0], interval, m, eta, max_refine, bound=bound)
    vy = certify_over_interval(hamiltonians[1], interval, m, eta, max_refine, bound=bound)
    witness = combine_verdicts(tuple(map(float, interval)), vx, vy)
    return EventROutcome(x=bx.center, y=by.center, L=L, m=m, interval=tuple(interval),
                         holds=witness is None, witness=witness, n_cells=len(vx) + len(vy))


def estimate_probability(x, y, L, m, interval, n_realizations, spec, eta=None, max_refine=6,
                         hopping=1.0, bound="spectral"):
    """Monte Carlo frequency of the two-box event over realizations ``0..n-1`` of ``spec``.

    Returns
    -------
    (p_hat, standard_error)
        ``standard_error = sqrt(p(1-p)/n)``.
    """
    if n_realizations < 2:
        raise InvalidParameterError(f"need at least 2 realizations, got {n_realizations}")
    hits = 0
    for k in range(n_realizations):
        out = event_R(x, y, L, m, interval, spec.realization(k), eta, max_refine, hopping,
                      bound=bound)
        hits += out.holds
    p = hits / n_realizations
    return p, math.sqrt(p * (1 - p) / n_realizations)


@dataclass(frozen=True)
class ScaleSequence:
    """``L_{k+1} = [L_k^α]_{6N}`` with ``1 < α < 1/ζ``."""

    L0: int
    alpha: float
    zeta: float

    def __post_init__(self):
        if self.L0 < 6 or self.L0 % 6:
            raise InvalidParameterError(f"L0 must be a positive multiple of 6, got {self.L0}")
        if not 0 < self.zeta < 1:
            raise InvalidParameterError(f"zeta must lie in (0, 1), got {self.zeta}")
        if not 1 < self.alpha < 1 / self.zeta:
            raise InvalidParameterError(f"alpha must lie in (1, 1/zeta), got {self.alpha}")

    def scales(self, n):
        out = [self.L0]
        while len(out) < n:
            nxt = round_to_6N(out[-1] ** self.alpha)
            if nxt <= out[-1]:
                raise InvalidParameterError(f"scale sequence stalls at L={out[-1]}; increase L0 or alpha")
            out.append(nxt)
        return out


@dataclass(frozen=True)
class ScaleRow:
    k: int
    L: int
    n: int
    p_hat: float
    stderr: float
    bound: float
    consistent: bool

    @property
    def consistent_flag(self):
        return int(self.consistent)


def is_consistent(p_hat, stderr, bound, n_sigma=2.0):
    """One-sided: the bound is a lower bound, so only ``p̂ < bound - n_sigma·se`` is inconsistent."""
    return p_hat >= bound - n_sigma * stderr


def run_scale_sequence(params, m, interval, n_realizations, spec, n_scales=3, dim=1,
                       eta=None, max_refine=6, hopping=1.0, start_k=0, bound="spectral"):
    """Estimate the two-box probability at every scale ``L_k`` and compare with the bound.

    Scales whose boxes would exceed the matrix cap are skipped (the run stops).
    Scales with ``k < start_k`` are listed in the sequence but not sampled.
    """
    rows = []
    cap = max_matrix_size()
    for k, L in enumerate(params.scales(n_scales)):
        if L ** dim > cap:
            break
        if k < start_k:
            continue
        x = (0,) * dim
        y = (L + 1,) + (0,) * (dim - 1)
        p, se = estimate_probability(x, y, L, m, interval, n_realizations, spec, eta, max_refine,
                                     hopping, bound)
        target = msa_bound(L, params.zeta)
        rows.append(ScaleRow(k=k, L=L, n=n_realizations, p_hat=p, stderr=se, bound=target,
                             consistent=is_consistent(p, se, target)))
    return rows
