"""Lattice boxes, i.i.d. disorder, weight functions and finite-volume Anderson Hamiltonians.

The finite-volume operator on a box is ``H = t(-Δ) + λV`` where ``-Δ`` has
diagonal ``2d`` and hopping ``-1`` between nearest neighbours that both lie in
the box (plain truncation, no boundary correction of the diagonal).
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError, ResourceError

__all__ = [
    "Box", "DisorderSpec", "FiniteVolumeHamiltonian", "DISTRIBUTIONS",
    "max_matrix_size", "default_kappa", "sample_potential", "build_hamiltonian",
    "hamiltonian_from_potential", "chain_hamiltonian", "weight_vector",
    "japanese_bracket", "sup_distance", "site_index", "separation_pairs",
]

DISTRIBUTIONS = ("uniform", "uniform01", "bernoulli")
DEFAULT_MAX_MATRIX = 12000
# side of the cubic tiles that key the random streams
_TILE = 64


def max_matrix_size():
    """Matrix-dimension cap, read from ``LOCLAB_MAX_MATRIX`` (default 12000)."""
    raw = os.environ.get("LOCLAB_MAX_MATRIX")
    if raw is None or raw == "":
        return DEFAULT_MAX_MATRIX
    try:
        value = int(raw)
    except ValueError:
        raise InvalidParameterError(f"LOCLAB_MAX_MATRIX must be an integer, got {raw!r}")
    if value < 1:
        raise InvalidParameterError("LOCLAB_MAX_MATRIX must be positive")
    return value


def default_kappa(d):
    return (d + 1) / 2


def japanese_bracket(x):
    """``<x> = sqrt(1 + |x|^2)`` with Euclidean ``|x|``, taken along the last axis."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return float(np.sqrt(1.0 + x * x))
    return np.sqrt(1.0 + np.sum(x * x, axis=-1))


def sup_distance(x, y):
    """Sup-norm distance between lattice points (broadcasts over leading axes)."""
    diff = np.atleast_1d(np.asarray(x) - np.asarray(y))
    return np.max(np.abs(diff), axis=-1)


def site_index(sites, a):
    """Row of ``a`` in an ``(n, d)`` coordinate array, or ``None`` if absent."""
    a = np.atleast_1d(np.asarray(a))
    hit = np.flatnonzero(np.all(sites == a, axis=1))
    return int(hit[0]) if len(hit) else None


def _as_point(p, d=None):
    p = tuple(int(c) for c in np.atleast_1d(p))
    if d is not None and len(p) != d:
        raise InvalidParameterError(f"point {p} does not have dimension {d}")
    return p


@dataclass(frozen=True)
class Box:
    """Lattice cube ``Λ_L(x)``: sites ``y`` with ``-L/2 <= y_i - x_i < L/2``.

    Sites are enumerated lexicographically (first coordinate slowest).
    """

    center: tuple
    side: int

    def __post_init__(self):
        center = _as_point(self.center)
        object.__setattr__(self, "center", center)
        if len(center) not in (1, 2):
            raise InvalidParameterError(f"dimension must be 1 or 2, got {len(center)}")
        if int(self.side) != self.side or self.side < 2 or self.side % 2:
            raise InvalidParameterError(f"box side must be an even integer >= 2, got {self.side}")
        object.__setattr__(self, "side", int(self.side))

    @property
    def dim(self):
        return len(self.center)

    @property
    def n_sites(self):
        return self.side ** self.dim

    @property
    def sites(self):
        half = self.side // 2
        axes = [np.arange(c - half, c + half, dtype=np.int64) for c in self.center]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def contains(self, y):
        y = np.asarray(y)
        rel = y - np.asarray(self.center)
        half = self.side // 2
        return np.all((rel >= -half) & (rel < half), axis=-1)

    def index(self, y):
        """Position of site ``y`` in the site order."""
        y = _as_point(y, self.dim)
        if not self.contains(y):
            raise InvalidParameterError(f"site {y} is not in {self}")
        half = self.side // 2
        idx = 0
        for yi, ci in zip(y, self.center):
            idx = idx * self.side + (yi - ci + half)
        return idx

    def shifted(self, b):
        b = _as_point(b, self.dim)
        return Box(tuple(c + s for c, s in zip(self.center, b)), self.side)

    def disjoint_from(self, other):
        half_a, half_b = self.side // 2, other.side // 2
        for ca, cb in zip(self.center, other.center):
            if ca + half_a <= cb - half_b or cb + half_b <= ca - half_a:
                return True
        return False


@dataclass(frozen=True)
class DisorderSpec:
    """Distribution, coupling and seeding of the i.i.d. on-site potential.

    ``uniform`` draws from [-1, 1], ``uniform01`` from [0, 1] and ``bernoulli``
    takes +1 with probability ``p`` and -1 otherwise.  The stream of
    realization ``k`` is a pure function of ``(master_seed, k)`` and of the
    absolute site coordinate.
    """

    distribution: str = "uniform"
    coupling: float = 1.0
    master_seed: int = 0
    realization_index: int = 0
    p: float = 0.5

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise InvalidParameterError(
                f"distribution must be one of {DISTRIBUTIONS}, got {self.distribution!r}")
        if not np.isfinite(self.coupling) or self.coupling < 0:
            raise InvalidParameterError(f"coupling must be >= 0, got {self.coupling}")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise InvalidParameterError("master_seed must be a 64-bit unsigned integer")
        if int(self.realization_index) < 0:
            raise InvalidParameterError("realization_index must be >= 0")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParameterError(f"Bernoulli p must be in [0, 1], got {self.p}")

    def realization(self, k):
        return replace(self, realization_index=int(k))

    @property
    def sup_abs(self):
        """``sup |v|`` over the support of the single-site distribution."""
        return 1.0


def _zigzag(n):
    # maps Z -> N bijectively so negative tile indices can enter a SeedSequence
    return 2 * n if n >= 0 else -2 * n - 1


def _tile_uniforms(spec, tile, d):
    key = (int(spec.realization_index), d) + tuple(_zigzag(t) for t in tile)
    ss = np.random.SeedSequence(entropy=int(spec.master_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss)).random(_TILE ** d)


def sample_potential(sites, spec):
    """Unscaled single-site values ``v(y)`` for the given sites.

    ``sites`` is a :class:`Box` or an ``(n, d)`` integer array.  Values depend
    only on ``(master_seed, realization_index, y)``, so overlapping boxes agree
    on shared sites and disjoint boxes draw from disjoint substreams.
    """
    if isinstance(sites, Box):
        sites = sites.sites
    sites = np.asarray(sites, dtype=np.int64)
    if sites.ndim == 1:
        sites = sites[:, None]
    d = sites.shape[1]
    tiles = np.floor_divide(sites, _TILE)
    offsets = sites - tiles * _TILE
    flat = np.zeros(len(sites), dtype=np.int64)
    for axis in range(d):
        flat = flat * _TILE + offsets[:, axis]
    u = np.empty(len(sites))
    uniq, inverse = np.unique(tiles, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    order = np.argsort(inverse, kind="stable")
    groups = np.split(order, np.cumsum(np.bincount(inverse, minlength=len(uniq)))[:-1])
    for tile, idx in zip(uniq, groups):
        u[idx] = _tile_uniforms(spec, tuple(int(c) for c in tile), d)[flat[idx]]
    if spec.distribution == "uniform":
        return 2.0 * u - 1.0
    if spec.distribution == "uniform01":
        return u
    return np.where(u < spec.p, 1.0, -1.0)


@dataclass(frozen=True, eq=False)
class FiniteVolumeHamiltonian:
    """Real symmetric finite-volume matrix together with its geometry.

    ``sites`` holds the lattice coordinates in matrix order and ``potential``
    the scaled on-site values ``λ v(y)``.  ``box`` and ``spec`` are ``None``
    for hand-built fixtures.
    """

    sites: np.ndarray
    matrix: np.ndarray
    potential: np.ndarray
    hopping: float = 1.0
    box: Box | None = None
    spec: DisorderSpec | None = None
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("sites", "matrix", "potential"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_index", {tuple(s): i for i, s in enumerate(self.sites.tolist())})

    @property
    def dim(self):
        return self.sites.shape[1]

    @property
    def n_sites(self):
        return self.sites.shape[0]

    def index(self, y):
        try:
            return self._index[_as_point(y, self.dim)]
        except KeyError:
            raise InvalidParameterError(f"site {tuple(np.atleast_1d(y))} is not in this volume") from None

    def indices(self, points):
        return np.array([self.index(p) for p in points], dtype=np.int64)

    @property
    def norm_bound(self):
        """Gershgorin bound ``4d|t| + max|λv|`` on the operator norm."""
        return 4 * self.dim * abs(self.hopping) + float(np.max(np.abs(self.potential), initial=0.0))


def _check_size(n):
    cap = max_matrix_size()
    if n > cap:
        raise ResourceError(f"matrix dimension {n} exceeds LOCLAB_MAX_MATRIX={cap}")


def hamiltonian_from_potential(sites, potential, hopping=1.0, box=None, spec=None):
    """Assemble ``t(-Δ) + diag(potential)`` on an arbitrary finite site set."""
    if isinstance(sites, Box):
        box = box or sites
        sites = sites.sites
    sites = np.asarray(sites, dtype=np.int64)
    if sites.ndim == 1:
        sites = sites[:, None]
    potential = np.asarray(potential, dtype=float)
    n, d = sites.shape
    if potential.shape != (n,):
        raise InvalidParameterError(f"potential has shape {potential.shape}, expected ({n},)")
    _check_size(n)
    index = {tuple(s): i for i, s in enumerate(sites.tolist())}
    mat = np.zeros((n, n))
    mat[np.diag_indices(n)] = 2 * d * hopping + potential
    if hopping != 0.0:
        for i, s in enumerate(sites.tolist()):
            for axis in range(d):
                nb = list(s)
                nb[axis] += 1
                j = index.get(tuple(nb))
                if j is not None:
                    mat[i, j] = mat[j, i] = -hopping
    return FiniteVolumeHamiltonian(sites=sites, matrix=mat, potential=potential,
                                   hopping=float(hopping), box=box, spec=spec)


def build_hamiltonian(box, spec, hopping=1.0):
    """Finite-volume Anderson Hamiltonian on ``box`` for one disorder realization."""
    _check_size(box.n_sites)
    v = sample_potential(box, spec)
    return hamiltonian_from_potential(box, spec.coupling * v, hopping=hopping, box=box, spec=spec)


def chain_hamiltonian(potential, hopping=1.0, start=0):
    """1D fixture chain on sites ``start, ..., start + n - 1`` (any length)."""
    potential = np.asarray(potential, dtype=float)
    sites = np.arange(start, start + len(potential), dtype=np.int64)[:, None]
    return hamiltonian_from_potential(sites, potential, hopping=hopping)


def weight_vector(sites, center, kappa):
    """Diagonal of the weight ``T_a``: ``<y - a>^kappa`` for every site ``y``.

    Raises
    ------
    InvalidParameterError
        If ``kappa <= d/2``.
    """
    if isinstance(sites, (Box, FiniteVolumeHamiltonian)):
        sites = sites.sites
    sites = np.asarray(sites)
    if sites.ndim == 1:
        sites = sites[:, None]
    d = sites.shape[1]
    if not kappa > d / 2:
        raise InvalidParameterError(f"kappa must exceed d/2 = {d / 2}, got {kappa}")
    a = np.asarray(_as_point(center, d))
    return japanese_bracket(sites - a) ** kappa


def separation_pairs(sites, separations, mode="translate", source=None, axis=0):
    """Index pairs ``(i, j)`` with ``y_j = y_i + r e_axis``, one pair set per separation ``r``.

    ``mode="center"`` uses the single source site (default: the origin);
    ``mode="translate"`` uses every site whose shifted partner lies in the volume.
    """
    if isinstance(sites, (Box, FiniteVolumeHamiltonian)):
        sites = sites.sites
    sites = np.asarray(sites, dtype=np.int64)
    d = sites.shape[1]
    index = {tuple(s): i for i, s in enumerate(sites.tolist())}
    if mode == "center":
        src = _as_point((0,) * d if source is None else source, d)
        if src not in index:
            raise InvalidParameterError(f"source {src} is not in the volume")
        starts = [src]
    elif mode == "translate":
        starts = [tuple(s) for s in sites.tolist()]
    else:
        raise InvalidParameterError(f"mode must be 'center' or 'translate', got {mode!r}")
    out = []
    for r in separations:
        ii, jj = [], []
        for s in starts:
            t = list(s)
            t[axis] += int(r)
            j = index.get(tuple(t))
            if j is not None:
                ii.append(index[s])
                jj.append(j)
        if not ii:
            raise InvalidParameterError(f"no site pairs at separation {r}")
        out.append((np.asarray(ii, dtype=np.int64), np.asarray(jj, dtype=np.int64)))
    return out
