"""Experiment drivers: sample realizations, write CSV tables, a JSON summary and a manifest.

Every experiment writes into ``<outdir>/<experiment>/``.  ``manifest.json`` is
written last (atomically) so a directory without it is an incomplete run.
Floats are written with ``repr`` so reruns are byte-comparable.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import LoclabError
from .fermi_dynamics import fermi_kernel_profile, smooth_bump, transport_moment
from .localization import (correlation_tables, count_NL, multiplicity_histogram,
                           sule_centers, sup_product_profile, w_bound)
from .model import (Box, DisorderSpec, build_hamiltonian, chain_hamiltonian, default_kappa,
                    separation_pairs)
from .msa import ScaleSequence, run_scale_sequence
from .spectral import cluster_eigenvalues, eigendecompose, spectral_measure
from .stats import MODELS, default_window, ensemble_mean, fit_decay

__all__ = ["RunManifest", "run_experiment", "verify_manifest", "sha256_file"]

MANIFEST = "manifest.json"
SUMMARY = "summary.json"


@dataclass
class RunManifest:
    config: dict
    version: str
    timestamp: str
    status: str
    files: dict = field(default_factory=dict)
    error: str | None = None
    directory: Path | None = None

    @property
    def exit_code(self):
        return 0 if self.status == "ok" else 1

    def to_dict(self):
        return {"software": "loclab", "version": self.version, "timestamp": self.timestamp,
                "status": self.status, "error": self.error, "exit_code": self.exit_code,
                "config": self.config, "files": self.files}


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


class _Writer:
    def __init__(self, directory):
        self.directory = Path(directory)
        self.files = {}

    def table(self, name, header, rows):
        path = self.directory / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(header)
            for row in rows:
                out.writerow([_cell(v) for v in row])
        self.files[path.name] = sha256_file(path)

    def json(self, name, payload):
        path = self.directory / name
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
        self.files[path.name] = sha256_file(path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# --- realization plumbing ------------------------------------------------------

def _kappa(cfg):
    return default_kappa(cfg.dim) if cfg.kappa is None else cfg.kappa


def _spec(cfg, k=0):
    return DisorderSpec(distribution=cfg.distribution, coupling=cfg.coupling,
                        master_seed=cfg.seed, realization_index=k, p=cfg.bernoulli_p)


def _hamiltonians(cfg):
    """``(realization, H)`` in realization order; a fixture potential gives one realization."""
    if cfg.potential is not None:
        pot = cfg.potential
        yield 0, chain_hamiltonian(pot, hopping=cfg.hopping, start=-(len(pot) // 2))
        return
    box = Box((0,) * cfg.dim, cfg.side)
    for k in range(cfg.realizations):
        yield k, build_hamiltonian(box, _spec(cfg, k), hopping=cfg.hopping)


def _solutions(cfg):
    for k, H in _hamiltonians(cfg):
        yield k, eigendecompose(H, tol=cfg.eig_tol)


def _linear_extent(cfg):
    return len(cfg.potential) if cfg.potential is not None else cfg.side


def _separations(cfg):
    lo, hi = cfg.window if cfg.window is not None else default_window(_linear_extent(cfg))
    return list(range(lo, hi + 1))


def _fits(estimate, cfg, models=MODELS):
    out = {}
    for model in models:
        try:
            out[model] = fit_decay(estimate, model, r2_floor=cfg.r2_floor).to_dict()
        except LoclabError as exc:
            out[model] = {"error": str(exc)}
    return out


def _fit_errors(fits):
    return [f"{m}: {f['error']}" for m, f in fits.items() if "error" in f]


def _mean_rows(estimate):
    return [(r, m, s, n) for r, m, s, n in estimate.rows()]


def _site_header(prefix, d):
    return [f"{prefix}_{i}" for i in range(d)]


# --- experiments ---------------------------------------------------------------

def _run_spectrum(cfg, out):
    rows, per_real, hist = [], [], {}
    kappa = _kappa(cfg)
    mu_max = 0.0
    for k, sol in _solutions(cfg):
        clusters = cluster_eigenvalues(sol, cfg.cluster_tol)
        mu_I = sum(a.mass for a in spectral_measure(sol, kappa, tuple(cfg.interval), clusters=clusters))
        mu_max = max(mu_max, mu_I)
        for c_id, c in enumerate(clusters):
            for j in range(c.multiplicity):
                rows.append((k, c.start + j, sol.eigenvalues[c.start + j], c_id, c.multiplicity))
        for c in clusters:
            hist[c.multiplicity] = hist.get(c.multiplicity, 0) + 1
        per_real.append({"realization": k, "n": sol.n, "residual": sol.residual,
                         "orthonormality": sol.orthonormality, "n_clusters": len(clusters),
                         "mu_interval": mu_I})
    out.table("eigenvalues", ["realization", "index", "eigenvalue", "cluster", "multiplicity"], rows)
    summary = {"multiplicity_histogram": dict(sorted(hist.items())), "kappa": kappa,
               "max_mu_interval": mu_max, "realizations": per_real}
    return summary, []


def _run_msa(cfg, out):
    params = ScaleSequence(cfg.L0, cfg.alpha, cfg.zeta)
    scales = params.scales(cfg.n_scales)
    rows = run_scale_sequence(params, cfg.mass, tuple(cfg.interval), cfg.realizations, _spec(cfg),
                              n_scales=cfg.n_scales, dim=cfg.dim, eta=cfg.eta,
                              max_refine=cfg.max_refine, hopping=cfg.hopping, bound=cfg.cert_bound)
    out.table("scales", ["k", "L_k", "n", "p_hat", "stderr", "bound", "consistent"],
              [(r.k, r.L, r.n, r.p_hat, r.stderr, r.bound, r.consistent) for r in rows])
    p = [r.p_hat for r in rows]
    se = [r.stderr for r in rows]
    # empirical monotonicity, reported and never asserted
    monotone = all(p[i + 1] >= p[i] - 2 * max(se[i], se[i + 1]) for i in range(len(p) - 1))
    summary = {
        "scales": scales,
        "sampled_scales": [r.L for r in rows],
        "all_consistent": all(r.consistent for r in rows),
        "consistency_rule": "p_hat >= bound - 2*stderr",
        "p_hat_nondecreasing_within_errors": monotone,
        "eta": cfg.eta, "max_refine": cfg.max_refine, "certification_bound": cfg.cert_bound,
        "rows": [{"k": r.k, "L": r.L, "p_hat": r.p_hat, "stderr": r.stderr, "bound": r.bound,
                  "consistent": r.consistent} for r in rows],
    }
    return summary, []


def _run_sudec(cfg, out):
    kappa = _kappa(cfg)
    interval = tuple(cfg.interval)
    seps = _separations(cfg)
    pairs = None
    wz_rows, sup_rows, profiles = [], [], []
    max_w, z_over_w, n_clusters = 0.0, 0, 0
    for k, sol in _solutions(cfg):
        if pairs is None:
            pairs = separation_pairs(sol.sites, seps, mode=cfg.pairs)
        clusters, tables = correlation_tables(sol, kappa, interval, cfg.cluster_tol)
        W, Z = tables["W"], tables["Z"]
        for c_id, c in enumerate(clusters):
            for s_id, site in enumerate(sol.sites):
                wz_rows.append((k, c_id, c.value, c.multiplicity, *site.tolist(),
                                W[c_id, s_id], Z[c_id, s_id]))
        if clusters:
            max_w = max(max_w, float(W.max()))
            z_over_w += int(np.sum(Z > W + 1e-9))
        n_clusters += len(clusters)
        prof = sup_product_profile(W, pairs)
        profiles.append(prof)
        sup_rows.extend((k, r, v) for r, v in zip(seps, prof))
    out.table("correlations", ["realization", "cluster", "energy", "multiplicity",
                               *_site_header("site", cfg.dim), "W", "Z"], wz_rows)
    out.table("sudec", ["realization", "separation", "sup_product"], sup_rows)
    est = ensemble_mean((seps, np.asarray(profiles)), quantity="sudec")
    out.table("sudec_mean", ["separation", "mean", "stderr", "count"], _mean_rows(est))
    fits = _fits(est, cfg)
    bound = w_bound(cfg.dim, kappa)
    summary = {
        "kappa": kappa, "pairs": cfg.pairs, "separations": [seps[0], seps[-1]],
        "fits": fits,
        "zeta_note": "fitted zeta summarizes the window; it does not certify decay for every zeta",
        "bound_check": {"W_bound": bound, "max_W": max_w, "W_within_bound": max_w <= bound + 1e-9,
                        "Z_exceeds_W_count": z_over_w, "clusters": n_clusters},
    }
    return summary, _fit_errors(fits)


def _run_sule(cfg, out):
    kappa = _kappa(cfg)
    interval = tuple(cfg.interval)
    d = cfg.dim
    rec_rows, nl_rows, hist = [], [], {}
    max_sum_err, max_prod = 0.0, 0.0
    extent = _linear_extent(cfg) // 2
    ratios = {L: [] for L in range(1, extent + 1)}
    for k, sol in _solutions(cfg):
        clusters = cluster_eigenvalues(sol, cfg.cluster_tol)
        records = sule_centers(sol, kappa, interval, clusters=clusters)
        atoms = spectral_measure(sol, kappa, interval, clusters=clusters)
        for rec, atom in zip(records, atoms):
            max_sum_err = max(max_sum_err, abs(rec.mass - atom.mass))
            rec_rows.append((k, rec.index, rec.energy, rec.multiplicity, *rec.center, atom.mass,
                             ";".join(repr(a) for a in rec.alphas)))
        report = multiplicity_histogram(sol, kappa=kappa, interval=interval,
                                        cluster_tol=cfg.cluster_tol)
        for nu, count in report.histogram.items():
            hist[nu] = hist.get(nu, 0) + count
        max_prod = max(max_prod, report.max_mass_times_multiplicity)
        for L in ratios:
            nl = count_NL(records, L)
            nl_rows.append((k, L, nl, L ** d))
            ratios[L].append(nl / L ** d)
    out.table("sule", ["realization", "cluster", "energy", "multiplicity",
                       *_site_header("center", d), "mu", "alphas"], rec_rows)
    out.table("nl", ["realization", "L", "N_L", "L_pow_d"], nl_rows)
    mean_ratio = {L: float(np.mean(v)) for L, v in ratios.items() if v}
    summary = {
        "kappa": kappa,
        "multiplicity_histogram": dict(sorted(hist.items())),
        "max_mu_times_multiplicity": max_prod,
        "sum_rule_max_error": max_sum_err,
        "mean_NL_over_Ld": mean_ratio,
        "max_mean_NL_over_Ld": max(mean_ratio.values(), default=0.0),
    }
    return summary, []


def _run_fermi(cfg, out):
    interval = tuple(cfg.interval)
    seps = _separations(cfg)
    pairs, rows, profiles = None, [], []
    for k, sol in _solutions(cfg):
        if pairs is None:
            pairs = separation_pairs(sol.sites, seps, mode=cfg.pairs)
        prof = fermi_kernel_profile(sol, interval, pairs)
        profiles.append(prof)
        rows.extend((k, r, v) for r, v in zip(seps, prof))
    out.table("fermi", ["realization", "separation", "sup_value"], rows)
    est = ensemble_mean((seps, np.asarray(profiles)), quantity="fermi")
    out.table("fermi_mean", ["separation", "mean", "stderr", "count"], _mean_rows(est))
    fits = _fits(est, cfg)
    return {"pairs": cfg.pairs, "separations": [seps[0], seps[-1]], "fits": fits}, _fit_errors(fits)


def _run_transport(cfg, out):
    bump = smooth_bump(tuple(cfg.interval))
    rows, table = [], {T: [] for T in cfg.times}
    for k, sol in _solutions(cfg):
        for T in cfg.times:
            value = transport_moment(sol, cfg.moment_order, bump, T)
            rows.append((k, cfg.moment_order, T, value))
            table[T].append(value)
    out.table("transport", ["realization", "n", "T", "moment"], rows)
    means = []
    for T, vals in table.items():
        v = np.sort(np.asarray(vals))
        se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
        means.append((cfg.moment_order, T, float(np.sum(v) / v.size), se, v.size))
    out.table("transport_mean", ["n", "T", "mean", "stderr", "count"], means)
    first, last = means[0][2], means[-1][2]
    # finite boxes saturate the moment near the box scale; report it for comparison
    box_scale = (1 + (_linear_extent(cfg) / 2) ** 2) ** (cfg.moment_order / 2)
    summary = {
        "times": list(cfg.times),
        "box_scale_moment": box_scale,
        "largest_mean_over_box_scale": max(m[2] for m in means) / box_scale,
        "mean_moment": {repr(float(m[1])): m[2] for m in means},
        "growth_ratio_last_over_first": (last / first) if first > 0 else None,
    }
    return summary, []


_RUNNERS = {
    "spectrum": _run_spectrum, "msa": _run_msa, "sudec": _run_sudec, "sule": _run_sule,
    "fermi": _run_fermi, "transport": _run_transport,
}


def run_experiment(cfg: RunConfig, outdir=None):
    """Run ``cfg.experiment`` and write its outputs; never raises for model-level failures.

    Resource limits, solver failures and infeasible fits are recorded in the
    manifest (``status = "failed"``) and give a nonzero :attr:`RunManifest.exit_code`.
    """
    directory = Path(cfg.outdir if outdir is None else outdir) / cfg.experiment
    directory.mkdir(parents=True, exist_ok=True)
    stale = directory / MANIFEST
    if stale.exists():
        stale.unlink()
    writer = _Writer(directory)
    errors = []
    try:
        summary, errors = _RUNNERS[cfg.experiment](cfg, writer)
    except LoclabError as exc:
        summary = {}
        errors = [f"{type(exc).__name__}: {exc}"]
    summary = {"experiment": cfg.experiment, "errors": errors, **summary}
    writer.json(SUMMARY, summary)
    manifest = RunManifest(
        config=cfg.to_dict(), version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        status="failed" if errors else "ok", files=dict(sorted(writer.files.items())),
        error="; ".join(errors) or None, directory=directory)
    tmp = directory / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    os.replace(tmp, directory / MANIFEST)
    return manifest


def verify_manifest(path):
    """Recompute checksums listed in a manifest; returns the names that do not match."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    data = json.loads(path.read_text())
    bad = []
    for name, digest in data["files"].items():
        target = path.parent / name
        if not target.exists() or sha256_file(target) != digest:
            bad.append(name)
    return bad
