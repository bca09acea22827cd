"""Disorder-ensemble means and decay-law fits.

Fits act on the ensemble *mean* at each separation (log taken afterwards).
A fitted stretched exponent is a summary of the data in the fit window; it
does not certify decay faster than every stretched exponential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FitInfeasibleError, InvalidParameterError

__all__ = [
    "EnsembleEstimate", "DecayFit", "ensemble_mean", "fit_decay", "default_window",
    "MODELS", "ZETA_GRID",
]

MODELS = ("EXP", "STRETCHED", "LOGPOW")
ZETA_GRID = np.round(np.arange(1, 21) * 0.05, 10)
ZETA_REFINE_STEP = 0.005
MIN_POINTS = 4


@dataclass(frozen=True, eq=False)
class EnsembleEstimate:
    """Mean and standard error (``std(ddof=1)/sqrt(N)``; 0 when N = 1) per separation."""

    quantity: str
    separations: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    count: np.ndarray

    def rows(self):
        return [(int(r) if float(r).is_integer() else float(r), float(m), float(s), int(n))
                for r, m, s, n in zip(self.separations, self.mean, self.stderr, self.count)]


def ensemble_mean(samples, quantity="quantity"):
    """Aggregate samples grouped by separation.

    Parameters
    ----------
    samples : mapping ``separation -> sequence of values``, or a 2-D array of
        shape ``(n_realizations, n_separations)`` together with ``separations``
        passed as ``samples=(separations, array)``.
    """
    if isinstance(samples, tuple):
        seps, arr = samples
        arr = np.asarray(arr, dtype=float)
        samples = {r: arr[:, k] for k, r in enumerate(seps)}
    seps = sorted(samples)
    means, errs, counts = [], [], []
    for r in seps:
        vals = np.asarray(samples[r], dtype=float)
        if vals.size == 0:
            raise InvalidParameterError(f"no samples at separation {r}")
        # sort makes the floating-point sum independent of input order
        vals = np.sort(vals)
        means.append(float(np.sum(vals) / vals.size))
        errs.append(float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0)
        counts.append(vals.size)
    return EnsembleEstimate(quantity=quantity, separations=np.asarray(seps, dtype=float),
                            mean=np.asarray(means), stderr=np.asarray(errs),
                            count=np.asarray(counts))


@dataclass(frozen=True, eq=False)
class DecayFit:
    """Fitted decay law.

    ``EXP``: ``log y = log C - m r``.  ``STRETCHED``: ``log y = log C - s r^ζ``
    (``s`` is reported as ``rate``).  ``LOGPOW``: ``log y = log C + o(r) - m r``
    with the fixed offset ``o(r) = (log<r0>)^{1+ε} + (log<r0 + r>)^{1+ε}``.
    """

    model: str
    C: float
    rate: float
    zeta: float | None
    epsilon: float | None
    r2: float
    window: tuple
    n_points: int
    residuals: np.ndarray = field(repr=False)
    r2_floor: float = 0.0

    @property
    def m(self):
        return self.rate

    @property
    def reliable(self):
        return self.r2 >= self.r2_floor

    def to_dict(self):
        params = {"C": self.C, "rate": self.rate}
        if self.model == "STRETCHED":
            params["zeta"] = self.zeta if self.reliable else None
        if self.model == "LOGPOW":
            params["epsilon"] = self.epsilon
        return {"model": self.model, "params": params, "r2": self.r2,
                "window": list(self.window), "n_points": self.n_points}


def default_window(L):
    """Separations ``1 .. L/2 - L/6`` measured from the box centre."""
    return (1, max(1, L // 2 - L // 6))


def _ols(x, y):
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return coef[0], coef[1], r2, resid


def _select(estimate, window):
    r = np.asarray(estimate.separations, dtype=float)
    y = np.asarray(estimate.mean, dtype=float)
    lo, hi = window
    keep = (r >= lo) & (r <= hi)
    r, y = r[keep], y[keep]
    if len(r) < MIN_POINTS:
        raise FitInfeasibleError(f"need >= {MIN_POINTS} separations in window {window}, got {len(r)}")
    if np.any(y <= 0):
        # shrink from the far end until the window is positive
        bad = np.flatnonzero(y <= 0)[0]
        r, y = r[:bad], y[:bad]
        if len(r) < MIN_POINTS:
            raise FitInfeasibleError("non-positive means in fit window; shrinking leaves too few points")
    return r, y


def fit_decay(estimate, model="EXP", window=None, epsilon=0.1, source_radius=0.0, r2_floor=0.5):
    """Least-squares fit of a decay law to ``log(mean)`` versus separation.

    ``STRETCHED`` scans ``ζ ∈ {0.05, ..., 1.00}``, keeps the ζ with the best R²,
    then rescans ``±0.05`` around it with step 0.005.
    """
    if model not in MODELS:
        raise InvalidParameterError(f"model must be one of {MODELS}, got {model!r}")
    if window is None:
        window = (float(np.min(estimate.separations)), float(np.max(estimate.separations)))
    r, y = _select(estimate, window)
    logy = np.log(y)
    used = (float(r[0]), float(r[-1]))
    if model == "EXP":
        a, b, r2, resid = _ols(r, logy)
        return DecayFit("EXP", float(np.exp(a)), float(-b), None, None, r2, used, len(r), resid,
                        r2_floor)
    if model == "LOGPOW":
        lb = lambda t: np.log(np.sqrt(1.0 + t * t)) ** (1 + epsilon)
        offset = lb(source_radius) + lb(source_radius + r)
        a, b, r2, resid = _ols(r, logy - offset)
        return DecayFit("LOGPOW", float(np.exp(a)), float(-b), None, float(epsilon), r2, used,
                        len(r), resid, r2_floor)

    def scan(grid):
        best = None
        for z in grid:
            a, b, r2, resid = _ols(r ** z, logy)
            if best is None or r2 > best[3]:
                best = (float(z), a, b, r2, resid)
        return best

    z0 = scan(ZETA_GRID)[0]
    fine = np.round(np.arange(z0 - 0.05, z0 + 0.05 + 1e-12, ZETA_REFINE_STEP), 10)
    fine = fine[(fine > 0) & (fine <= 1.0)]
    z, a, b, r2, resid = scan(fine)
    return DecayFit("STRETCHED", float(np.exp(a)), float(-b), z, None, r2, used, len(r), resid,
                    r2_floor)
