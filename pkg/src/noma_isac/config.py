"""Experiment configuration: INI parsing, overrides, validation and hashing.

Units at this boundary are the engineering ones (dBm, dB, m, Hz); they are
converted to linear SI once, in :meth:`ExperimentConfig.system_params`.
"""

from __future__ import annotations

import ast
import configparser
import dataclasses
import hashlib
import json
import math
import operator
import os
from dataclasses import dataclass, field

from .channel import SystemParams, dbm_to_watt
from .errors import ConfigError, DomainError

__all__ = [
    "ExperimentConfig",
    "DEFAULT_CONFIG_TEXT",
    "ANALYSES",
    "load_config",
    "parse_config_text",
    "default_workers",
]

ANALYSES = ("mc_ber", "semi_ber", "upper_zf", "upper_jml", "mc_outage", "outage_zf", "outage_jml")
RECEIVERS = ("zf", "jml")
WORKERS_ENV = "NOMA_ISAC_WORKERS"

DEFAULT_CONFIG_TEXT = """\
# Link and radar constants. Powers in dBm, gains in dB, distances in m.
[system]
alpha = 3.5
f_c = 5.8e9
bandwidth = 10e6
T = 10e-6
noise_density_dbm_hz = -174
M = 5
K = 2
G_t_db = 2
G_r_db = 2
rcs_dbsm = 0
theta_o = pi/4
theta_r = pi/2
d1 = 50
d2 = 60
R = 30
v = 10
p_r_dbm = 0
power_split = 0.5

[experiment]
# comma list or start:stop:step (inclusive)
sweep_dbm = -40:-20:5
receivers = zf, jml
# analyses default to the subcommand's preset; list them here to narrow it
# analyses = mc_ber, semi_ber, upper_zf, upper_jml
C_list = 5, 7, 9
trials = 100000
seed = 20240101
distance_mode = fixed
rotation_convention = differential
jml_bound_mode = as_printed
drift_mode = false
"""

_BIN_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_expr(text):
    """Arithmetic on numbers and ``pi`` only."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BIN_OPS:
            return _BIN_OPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError("unsupported expression")

    return ev(ast.parse(text.strip(), mode="eval"))


def _float(text):
    t = text.strip().lower()
    if t in ("-inf", "inf", "+inf"):
        return float(t)
    return _eval_expr(text)


def _int(text):
    return int(text.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _list(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _float_list(text):
    return tuple(_float(p) for p in _list(text))


def _sweep(text):
    t = text.strip()
    if ":" in t and "," not in t:
        parts = [_float(p) for p in t.split(":")]
        if len(parts) != 3 or parts[2] == 0:
            raise ValueError("range must be start:stop:step with non-zero step")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            raise ValueError("empty range")
        return tuple(round(start + i * step, 12) for i in range(n))
    return _float_list(t)


# key -> (section, parser)
_SCHEMA = {
    "alpha": ("system", _float),
    "f_c": ("system", _float),
    "bandwidth": ("system", _float),
    "T": ("system", _float),
    "noise_density_dbm_hz": ("system", _float),
    "M": ("system", _int),
    "K": ("system", _int),
    "G_t_db": ("system", _float),
    "G_r_db": ("system", _float),
    "rcs_dbsm": ("system", _float),
    "theta_o": ("system", _float),
    "theta_r": ("system", _float),
    "d1": ("system", _float),
    "d2": ("system", _float),
    "R": ("system", _float),
    "v": ("system", _float),
    "p_r_dbm": ("system", _float),
    "power_split": ("system", _float),
    "sweep_dbm": ("experiment", _sweep),
    "receivers": ("experiment", _list),
    "analyses": ("experiment", _list),
    "C_list": ("experiment", _float_list),
    "trials": ("experiment", _int),
    "seed": ("experiment", _int),
    "workers": ("experiment", _int),
    "distance_mode": ("experiment", str.strip),
    "rotation_convention": ("experiment", str.strip),
    "jml_bound_mode": ("experiment", str.strip),
    "drift_mode": ("experiment", _bool),
    "block_size": ("experiment", _int),
}
_CANON = {k.lower(): k for k in _SCHEMA}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one run."""

    alpha: float = 3.5
    f_c: float = 5.8e9
    bandwidth: float = 10e6
    T: float = 10e-6
    noise_density_dbm_hz: float = -174.0
    M: int = 5
    K: int = 2
    G_t_db: float = 2.0
    G_r_db: float = 2.0
    rcs_dbsm: float = 0.0
    theta_o: float = math.pi / 4
    theta_r: float = math.pi / 2
    d1: float = 50.0
    d2: float = 60.0
    R: float = 30.0
    v: float = 10.0
    p_r_dbm: float = 0.0
    power_split: float = 0.5
    sweep_dbm: tuple = (-40.0, -35.0, -30.0, -25.0, -20.0)
    receivers: tuple = RECEIVERS
    analyses: tuple = ("mc_ber", "semi_ber", "upper_zf", "upper_jml")
    C_list: tuple = (5.0, 7.0, 9.0)
    trials: int = 100_000
    seed: int | None = None
    workers: int = 1
    distance_mode: str = "fixed"
    rotation_convention: str = "differential"
    jml_bound_mode: str = "as_printed"
    drift_mode: bool = False
    block_size: int = 10_000
    # where each key was set, for diagnostics; not part of the identity
    origins: dict = field(default_factory=dict, compare=False, repr=False)

    def where(self, key):
        return self.origins.get(key)

    def system_params(self, p_com_dbm=None, **changes):
        """Linear-unit :class:`SystemParams` at one sweep point."""
        p_com = dbm_to_watt(p_com_dbm if p_com_dbm is not None else self.sweep_dbm[0])
        try:
            kw = dict(
                alpha=self.alpha, f_c=self.f_c, bandwidth=self.bandwidth, T=self.T,
                noise_density=self.noise_density_dbm_hz, M=self.M, K=self.K,
                G_t=self.G_t_db, G_r=self.G_r_db, rcs=self.rcs_dbsm,
                theta_o=self.theta_o, theta_r=self.theta_r, d1=self.d1, d2=self.d2,
                R=self.R, v=self.v, P_com=p_com, power_split=self.power_split,
                P_r=dbm_to_watt(self.p_r_dbm),
            )
            kw.update(changes)
            return SystemParams(**kw)
        except DomainError as exc:
            raise ConfigError(f"invalid system parameters: {exc}") from exc

    def validate(self, need_mc=False):
        def bad(msg, key):
            raise ConfigError(msg, key=key, line=self.where(key))

        if not self.sweep_dbm:
            bad("sweep must not be empty", "sweep_dbm")
        for r in self.receivers:
            if r not in RECEIVERS:
                bad(f"unknown receiver {r!r}", "receivers")
        for a in self.analyses:
            if a not in ANALYSES:
                bad(f"unknown analysis {a!r}", "analyses")
        if self.distance_mode not in ("fixed", "randomized"):
            bad("distance_mode must be 'fixed' or 'randomized'", "distance_mode")
        if self.rotation_convention not in ("differential", "as_printed"):
            bad("rotation_convention must be 'differential' or 'as_printed'", "rotation_convention")
        if self.jml_bound_mode not in ("as_printed", "averaged"):
            bad("jml_bound_mode must be 'as_printed' or 'averaged'", "jml_bound_mode")
        if any(C < 0 for C in self.C_list):
            bad("rate thresholds must be >= 0", "C_list")
        if self.workers < 1:
            bad("workers must be >= 1", "workers")
        if self.block_size < 1:
            bad("block_size must be >= 1", "block_size")
        if self.M < self.K:
            bad(f"M must be >= K (M={self.M}, K={self.K})", "M")
        if self.K != 2:
            bad("only K = 2 users are supported", "K")
        if need_mc:
            if self.trials < 10_000:
                bad("Monte-Carlo runs need trials >= 10000", "trials")
            if self.seed is None:
                bad("Monte-Carlo runs need a seed", "seed")
            if not 0 <= self.seed < 2**64:
                bad("seed must be a 64-bit unsigned integer", "seed")
        self.system_params()
        return self

    def identity(self):
        """Canonical dict of the result-determining fields."""
        d = dataclasses.asdict(self)
        for k in ("workers", "origins"):
            d.pop(k)
        return d

    def config_hash(self):
        blob = json.dumps(self.identity(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class _LineTracker(configparser.ConfigParser):
    """ConfigParser that remembers the line number of every option."""

    def __init__(self):
        super().__init__(interpolation=None, inline_comment_prefixes=("#", ";"))
        self.optionxform = str
        self.lines = {}

    def _read(self, fp, fpname):
        lines = list(fp)
        section = None
        for no, raw in enumerate(lines, 1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                section = s[1:-1].strip()
            elif s and not s.startswith(("#", ";")) and "=" in s and section:
                self.lines[(section, s.split("=", 1)[0].strip())] = no
        return super()._read(iter(lines), fpname)


def _apply(values, key, text, origin):
    canon = _CANON.get(key.lower())
    if canon is None:
        raise ConfigError(f"unknown key '{key}'", line=origin if isinstance(origin, int) else None)
    _, conv = _SCHEMA[canon]
    try:
        values[canon] = conv(text)
    except (ValueError, SyntaxError, TypeError) as exc:
        line = origin if isinstance(origin, int) else None
        raise ConfigError(f"cannot parse value {text.strip()!r}: {exc}", key=canon, line=line) from None


def parse_config_text(text, overrides=(), source="<config>"):
    """Build an :class:`ExperimentConfig` from INI text plus ``key=value`` overrides."""
    cp = _LineTracker()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"malformed config: {exc.message.splitlines()[0]}", line=line) from None
    values, origins = {}, {}
    for section in cp.sections():
        if section not in ("system", "experiment"):
            raise ConfigError(f"unknown section [{section}]")
        for key, text_value in cp.items(section):
            line = cp.lines.get((section, key))
            canon = _CANON.get(key.lower())
            if canon is not None and _SCHEMA[canon][0] != section:
                raise ConfigError(f"key belongs in [{_SCHEMA[canon][0]}]", key=key, line=line)
            _apply(values, key, text_value, line)
            origins[_CANON[key.lower()]] = line
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, text_value = item.split("=", 1)
        key = key.strip().split(".")[-1]
        _apply(values, key, text_value, None)
        origins[_CANON[key.lower()]] = None
    return ExperimentConfig(**values, origins=origins)


def load_config(path=None, overrides=()):
    """Read a config file (or the built-in defaults) and apply overrides."""
    if path is None:
        return parse_config_text(DEFAULT_CONFIG_TEXT, overrides, "<defaults>")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    # unspecified keys fall back to the defaults
    base = parse_config_text(DEFAULT_CONFIG_TEXT, (), "<defaults>")
    user = parse_config_text(text, overrides, str(path))
    merged = {f.name: getattr(base, f.name) for f in dataclasses.fields(base) if f.name != "origins"}
    for key in user.origins:
        merged[key] = getattr(user, key)
    return ExperimentConfig(**merged, origins=dict(user.origins))


def default_workers():
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n
