"""
Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored, lists are comma separated and
unknown keys are rejected. Every constraint of the downstream modules is
checked here so that a bad file fails before any computation starts.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

from .channel import ChannelParams, ScalarMode
from .errors import AircompIAError, InvalidParams, ParseError, ValidationError
from .exact import DEFAULT_EXACT_MAX_COLUMNS
from .oracles import LEMMA_MAX_L
from .precoding import DEFAULT_MAX_COLUMNS
from .topology import Scheme, Topology, build_topology, scheme_selector
from .transceiver import TrialSpec, _is_prime


@dataclass
class SimConfig:
    K: int
    r: int
    overlaps: list = field(default_factory=list)
    n: int = 1
    mode: ScalarMode = ScalarMode.COMPLEX
    p: int = 5
    P: float = 1.0
    snr: list = field(default_factory=lambda: [math.inf])
    trials: int = 10
    seed: int = 0
    scheme: str = "auto"
    svd_tol: float = 1e-9
    containment_tol: float = 1e-9
    out: str = "."
    max_columns: int = DEFAULT_MAX_COLUMNS
    exact_max_columns: int = DEFAULT_EXACT_MAX_COLUMNS
    h_min: float = 0.5
    h_max: float = 2.0
    n_list: list = field(default_factory=list)
    lemma_L: list = field(default_factory=lambda: [2, 4, 6])
    lemma_trials: int = 200
    lemma_seeds: list = field(default_factory=lambda: [0, 1, 2])
    baseline_trials: int = 20
    independent_payloads: bool = False
    reps: int = 1
    sample_rows: int = 0
    column_sample: int = 64
    dump: bool = False

    @property
    def topology(self) -> Topology:
        return build_topology(self.K, self.r, self.overlaps)

    @property
    def scheme_enum(self) -> Scheme:
        return scheme_selector(self.topology) if self.scheme == "auto" else Scheme(self.scheme)

    @property
    def params(self) -> ChannelParams:
        return ChannelParams(self.h_min, self.h_max)

    def trial_spec(self) -> TrialSpec:
        return TrialSpec(topology=self.topology, n=self.n, mode=self.mode, p=self.p, P=self.P,
                         scheme=self.scheme_enum, params=self.params, svd_tol=self.svd_tol, reps=self.reps,
                         independent=self.independent_payloads, max_columns=self.max_columns)

    def canonical(self) -> str:
        d = dataclasses.asdict(self)
        d["mode"] = self.mode.value
        d["snr"] = [repr(float(s)) for s in self.snr]
        d.pop("out")
        return json.dumps(d, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _int(text):
    return int(text, 0)


def _float(text):
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan")
    return v


def _bool(text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _list(conv):
    def parse(text):
        text = text.strip()
        return [conv(x.strip()) for x in text.split(",")] if text else []
    return parse


def _snr(text):
    t = text.strip().lower()
    if t in ("inf", "+inf", "none", "noiseless"):
        return math.inf
    return _float(t)


_PARSERS = {
    "K": _int, "r": _int, "overlaps": _list(_int), "n": _int, "mode": ScalarMode.parse, "p": _int,
    "P": _float, "snr": _list(_snr), "trials": _int, "seed": _int, "scheme": lambda s: s.strip().lower(),
    "svd_tol": _float, "containment_tol": _float, "out": str, "max_columns": _int,
    "exact_max_columns": _int, "h_min": _float, "h_max": _float, "n_list": _list(_int),
    "lemma_L": _list(_int), "lemma_trials": _int, "lemma_seeds": _list(_int), "baseline_trials": _int,
    "independent_payloads": _bool, "reps": _int, "sample_rows": _int, "column_sample": _int, "dump": _bool,
}


def parse_config(text: str, overrides: dict | None = None) -> SimConfig:
    """Parse and validate a configuration.

    Raises :class:`ParseError` (with a line number) on malformed lines,
    unknown or repeated keys and unparseable values, and
    :class:`ValidationError` when a value violates a constraint.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ParseError(f"unknown key {key!r}", line=lineno)
        if key in values:
            raise ParseError(f"key {key!r} given twice", line=lineno)
        try:
            values[key] = _PARSERS[key](value)
        except (ValueError, InvalidParams) as exc:
            raise ParseError(f"bad value for {key!r}: {value!r} ({exc})", line=lineno) from None
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in ("K", "r"):
        if key not in values:
            raise ValidationError(f"missing required key {key!r}")
    cfg = SimConfig(**values)
    validate(cfg)
    return cfg


def _require(cond: bool, message: str):
    if not cond:
        raise ValidationError(message)


def validate(cfg: SimConfig) -> None:
    try:
        topo = cfg.topology
    except AircompIAError as exc:
        raise ValidationError(f"topology: {exc}") from None
    _require(cfg.n >= 1, "n >= 1 required")
    _require(all(n >= 1 for n in cfg.n_list), "every entry of n_list must be >= 1")
    _require(_is_prime(cfg.p), f"p must be prime, got {cfg.p}")
    _require(cfg.P > 0 and math.isfinite(cfg.P), "P must be a positive finite power")
    _require(len(cfg.snr) >= 1, "snr needs at least one value")
    _require(cfg.trials >= 1, "trials >= 1 required")
    _require(0 <= cfg.seed < 2 ** 64, "seed must fit in an unsigned 64-bit integer")
    _require(cfg.scheme in ("auto", "single_v", "two_v"), "scheme must be auto, single_v or two_v")
    if cfg.scheme == "single_v":
        _require(scheme_selector(topo) is Scheme.SINGLE_V,
                 "scheme single_v needs every overlap to be at most 1")
    _require(0 < cfg.svd_tol < 1, "svd_tol must lie in (0, 1)")
    _require(cfg.containment_tol >= 0, "containment_tol must be non-negative")
    _require(cfg.max_columns >= 1 and cfg.exact_max_columns >= 1, "column caps must be positive")
    try:
        cfg.params
    except InvalidParams as exc:
        raise ValidationError(str(exc)) from None
    _require(all(1 <= L <= LEMMA_MAX_L for L in cfg.lemma_L), f"lemma_L entries must lie in [1, {LEMMA_MAX_L}]")
    _require(cfg.lemma_trials >= 1, "lemma_trials >= 1 required")
    _require(cfg.baseline_trials >= 0, "baseline_trials >= 0 required")
    _require(cfg.reps >= 1, "reps >= 1 required")
    _require(cfg.sample_rows >= 0 and cfg.column_sample >= 1, "sample_rows >= 0 and column_sample >= 1 required")
