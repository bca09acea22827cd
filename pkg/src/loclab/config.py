"""Run configuration: flat ``key = value`` files, command-line overrides, lossless round trip."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigError
from .model import DISTRIBUTIONS

__all__ = [
    "EXPERIMENTS", "RunConfig", "parse_config", "parse_config_text", "load_config_file",
    "config_keys",
]

EXPERIMENTS = ("spectrum", "msa", "sudec", "sule", "fermi", "transport")
PAIR_MODES = ("translate", "center")
CERT_BOUNDS = ("spectral", "resolvent")


# --- value codecs ------------------------------------------------------------

def _fmt_float(x):
    return repr(float(x))


def _fmt_opt(fmt, missing="auto"):
    return lambda x: missing if x is None else fmt(x)


def _parse_opt(parse):
    def inner(text):
        return None if text.strip().lower() in ("auto", "none", "") else parse(text)
    return inner


def _parse_int(text):
    return int(text.strip())


def _parse_float(text):
    return float(text.strip())


def _parse_floats(text):
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _parse_ints(text):
    return tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip())


def _fmt_floats(xs):
    return ",".join(repr(float(x)) for x in xs)


def _fmt_ints(xs):
    return ",".join(str(int(x)) for x in xs)


def _parse_str(text):
    return text.strip()


# key -> (field name, parser, formatter, help)
_KEYS = {
    "experiment": ("experiment", _parse_str, str, "experiment to run"),
    "dim": ("dim", _parse_int, str, "lattice dimension (1 or 2)"),
    "lambda": ("coupling", _parse_float, _fmt_float, "disorder coupling λ >= 0"),
    "distribution": ("distribution", _parse_str, str, "uniform | uniform01 | bernoulli"),
    "p": ("bernoulli_p", _parse_float, _fmt_float, "Bernoulli probability of +1"),
    "hopping": ("hopping", _parse_float, _fmt_float, "hopping amplitude t"),
    "L": ("side", _parse_int, str, "box side (even; multiple of 6 for msa)"),
    "potential": ("potential", _parse_opt(_parse_floats), _fmt_opt(_fmt_floats, "none"),
                  "fixed 1-D chain potential, comma separated (replaces disorder sampling)"),
    "interval": ("interval", _parse_floats, _fmt_floats, "energy interval lo,hi"),
    "kappa": ("kappa", _parse_opt(_parse_float), _fmt_opt(_fmt_float), "weight exponent κ > d/2"),
    "m": ("mass", _parse_float, _fmt_float, "regularity decay rate m"),
    "zeta": ("zeta", _parse_float, _fmt_float, "scale exponent ζ in (0, 1)"),
    "alpha": ("alpha", _parse_float, _fmt_float, "scale growth α in (1, 1/ζ)"),
    "L0": ("L0", _parse_int, str, "initial scale"),
    "scales": ("n_scales", _parse_int, str, "number of scales"),
    "realizations": ("realizations", _parse_int, str, "number of disorder realizations"),
    "seed": ("seed", _parse_int, str, "master seed"),
    "eig_tol": ("eig_tol", _parse_opt(_parse_float), _fmt_opt(_fmt_float), "eigensolver residual tolerance"),
    "cluster_tol": ("cluster_tol", _parse_opt(_parse_float), _fmt_opt(_fmt_float), "eigenvalue clustering tolerance"),
    "pivot_tol": ("pivot_tol", _parse_opt(_parse_float), _fmt_opt(_fmt_float), "near-eigenvalue guard"),
    "eta": ("eta", _parse_opt(_parse_float), _fmt_opt(_fmt_float), "certification cell half-width"),
    "max_refine": ("max_refine", _parse_int, str, "certification refinement depth"),
    "bound": ("cert_bound", _parse_str, str, "certification increment: spectral | resolvent"),
    "window": ("window", _parse_opt(_parse_ints), _fmt_opt(_fmt_ints), "separations r_min,r_max"),
    "pairs": ("pairs", _parse_str, str, "translate | center"),
    "r2_floor": ("r2_floor", _parse_float, _fmt_float, "minimum R² for reporting ζ"),
    "n": ("moment_order", _parse_float, _fmt_float, "transport moment order n > 0"),
    "times": ("times", _parse_floats, _fmt_floats, "transport times T, comma separated"),
    "outdir": ("outdir", _parse_str, str, "output directory"),
}
_FIELD_TO_KEY = {v[0]: k for k, v in _KEYS.items()}


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines an experiment's numeric output.

    ``None`` for a tolerance means the documented automatic default.
    """

    experiment: str = "spectrum"
    dim: int = 1
    coupling: float = 5.0
    distribution: str = "uniform"
    bernoulli_p: float = 0.5
    hopping: float = 1.0
    side: int = 60
    potential: tuple | None = None
    interval: tuple = (-0.5, 0.5)
    kappa: float | None = None
    mass: float = 0.2
    zeta: float = 0.5
    alpha: float = 1.5
    L0: int = 6
    n_scales: int = 3
    realizations: int = 10
    seed: int = 0
    eig_tol: float | None = None
    cluster_tol: float | None = None
    pivot_tol: float | None = None
    eta: float | None = None
    max_refine: int = 6
    cert_bound: str = "spectral"
    window: tuple | None = None
    pairs: str = "translate"
    r2_floor: float = 0.5
    moment_order: float = 2.0
    times: tuple = (10.0, 50.0)
    outdir: str = "loclab-out"

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------
    def validate(self):
        def bad(field, msg):
            raise ConfigError(f"{_FIELD_TO_KEY[field]}: {msg}", key=_FIELD_TO_KEY[field])

        if self.experiment not in EXPERIMENTS:
            bad("experiment", f"must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.dim not in (1, 2):
            bad("dim", f"must be 1 or 2, got {self.dim}")
        if not (math.isfinite(self.coupling) and self.coupling >= 0):
            bad("coupling", f"must be finite and >= 0, got {self.coupling}")
        if self.distribution not in DISTRIBUTIONS:
            bad("distribution", f"must be one of {DISTRIBUTIONS}, got {self.distribution!r}")
        if not 0 <= self.bernoulli_p <= 1:
            bad("bernoulli_p", f"must lie in [0, 1], got {self.bernoulli_p}")
        if not math.isfinite(self.hopping):
            bad("hopping", "must be finite")
        if self.side < 2 or self.side % 2:
            bad("side", f"must be an even integer >= 2, got {self.side}")
        if self.potential is not None:
            if self.dim != 1:
                bad("potential", "fixture potentials are one-dimensional; set dim=1")
            if len(self.potential) < 1 or not all(math.isfinite(v) for v in self.potential):
                bad("potential", "must be a non-empty list of finite reals")
        if len(self.interval) != 2:
            bad("interval", f"needs exactly two values lo,hi, got {len(self.interval)}")
        lo, hi = self.interval
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
            bad("interval", f"needs finite lo < hi, got {lo}, {hi}")
        if self.kappa is not None and not self.kappa > self.dim / 2:
            bad("kappa", f"must exceed d/2 = {self.dim / 2}, got {self.kappa}")
        if not self.mass > 0:
            bad("mass", f"must be > 0, got {self.mass}")
        if not 0 < self.zeta < 1:
            bad("zeta", f"must lie in (0, 1), got {self.zeta}")
        if not 1 < self.alpha < 1 / self.zeta:
            bad("alpha", f"must lie in (1, 1/zeta), got {self.alpha}")
        if self.L0 < 6 or self.L0 % 6:
            bad("L0", f"must be a positive multiple of 6, got {self.L0}")
        if self.n_scales < 1:
            bad("n_scales", f"must be >= 1, got {self.n_scales}")
        if self.realizations < 1:
            bad("realizations", f"must be >= 1, got {self.realizations}")
        if self.experiment == "msa" and self.realizations < 2:
            bad("realizations", "msa needs at least 2 realizations for a standard error")
        if not 0 <= self.seed < 2 ** 64:
            bad("seed", "must be a 64-bit unsigned integer")
        for name in ("eig_tol", "cluster_tol", "pivot_tol", "eta"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0):
                bad(name, f"must be a positive number or 'auto', got {value}")
        if self.max_refine < 0:
            bad("max_refine", f"must be >= 0, got {self.max_refine}")
        if self.cert_bound not in CERT_BOUNDS:
            bad("cert_bound", f"must be one of {CERT_BOUNDS}, got {self.cert_bound!r}")
        if self.window is not None:
            if len(self.window) != 2 or not 1 <= self.window[0] < self.window[1]:
                bad("window", f"needs 1 <= r_min < r_max, got {self.window}")
        if self.pairs not in PAIR_MODES:
            bad("pairs", f"must be one of {PAIR_MODES}, got {self.pairs!r}")
        if not 0 <= self.r2_floor <= 1:
            bad("r2_floor", f"must lie in [0, 1], got {self.r2_floor}")
        if not self.moment_order > 0:
            bad("moment_order", f"must be > 0, got {self.moment_order}")
        if not self.times or any(not (math.isfinite(t) and t >= 0) for t in self.times):
            bad("times", f"needs one or more finite T >= 0, got {self.times}")
        if not self.outdir:
            bad("outdir", "must be non-empty")

    # -- serialization -------------------------------------------------------
    def to_dict(self):
        """Ordered ``key -> text`` mapping; :meth:`from_dict` inverts it exactly."""
        return {key: fmt(getattr(self, name)) for key, (name, _, fmt, _) in _KEYS.items()}

    @classmethod
    def from_dict(cls, mapping):
        return cls(**_convert(mapping))

    def to_text(self):
        return "".join(f"{k} = {v}\n" for k, v in self.to_dict().items())

    @classmethod
    def from_text(cls, text):
        return parse_config_text(text)

    def updated(self, **overrides):
        return replace(self, **overrides)


def _convert(mapping):
    out = {}
    for key, text in mapping.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown configuration key {key!r}", key=key)
        name, parse, _, _ = _KEYS[key]
        try:
            out[name] = parse(str(text))
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {text!r} ({exc})", key=key) from None
    return out


def _read_pairs(text):
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return pairs


def parse_config_text(text, overrides=None):
    """Build a config from flat ``key = value`` text; ``overrides`` (same keys) win."""
    mapping = _read_pairs(text)
    mapping.update(overrides or {})
    return RunConfig.from_dict(mapping)


def load_config_file(path):
    """Read ``key = value`` text, or the ``config`` block of a ``manifest.json``."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        block = data.get("config", data)
        return {str(k): str(v) for k, v in block.items()}
    return _read_pairs(text)


def parse_config(file=None, overrides=None, experiment=None):
    """Merge defaults, an optional config file and flag overrides (flags win)."""
    mapping = {} if file is None else dict(load_config_file(file))
    mapping.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if experiment is not None:
        mapping["experiment"] = experiment
    return RunConfig.from_dict(mapping)


def config_keys():
    """``(key, help)`` for every recognised configuration key."""
    return [(k, v[3]) for k, v in _KEYS.items()]

