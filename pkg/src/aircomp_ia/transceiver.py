"""
Messages, modulation, encoding, zero-forcing decoding and Monte Carlo trials.

Every transmitter holds symbols in ``{0, ..., p-1}``; each receiver wants the
modulo-p sum of the symbols of the ``r`` transmitters in its group, one sum
per useful stream. Symbols are sent as centred integers, so the aligned
useful coordinates carry integer sums that rounding maps back to the field.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import exact
from .alignment import DEFAULT_SVD_TOL, assemble_lambda, blocklength, rank_check_float
from .channel import TAG_MESSAGE, ChannelParams, ScalarMode, apply_channel, draw_channels
from .errors import DimensionError, InvalidParams, RankDeficient, UnsupportedMode
from .precoding import DEFAULT_MAX_COLUMNS, PrecoderSet, build_precoders, power_scale, tx_signal
from .topology import Scheme, Topology


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, math.isqrt(p) + 1))


# --------------------------------------------------------------------------
# modulation
# --------------------------------------------------------------------------
def modulate(w, p: int, exact_values: bool = False):
    """Centred lattice amplitude ``w - (p-1)/2``."""
    if p < 2:
        raise InvalidParams("p must be at least 2")
    w = np.asarray(w)
    if exact_values:
        half = Fraction(p - 1, 2)
        return np.vectorize(lambda v: Fraction(int(v)) - half, otypes=[object])(w) if w.ndim else Fraction(int(w)) - half
    return w - (p - 1) / 2


def demodulate_sum(y, m: int, p: int):
    """Field symbol ``round(y + m (p-1)/2) mod p`` of a (noisy) sum of ``m`` amplitudes.

    Works on scalars or arrays, float or exact. Complex inputs use their real part.
    """
    arr = np.asarray(y)
    if arr.dtype == object:
        shift = Fraction(m * (p - 1), 2)
        f = np.vectorize(lambda v: int(math.floor(Fraction(v) + shift + Fraction(1, 2))) % p, otypes=[np.int64])
        out = f(arr)
    else:
        out = np.mod(np.rint(np.real(arr) + m * (p - 1) / 2).astype(np.int64), p)
    return out if arr.ndim else int(out)


# --------------------------------------------------------------------------
# messages
# --------------------------------------------------------------------------
@dataclass
class MessageSet:
    """Per-transmitter symbols.

    ``symbols[(q, dest)]`` has shape ``(streams, reps)``; ``dest`` is ``None``
    in the single-V scheme. Unless ``independent`` is set, a transmitter
    sends the same message to both clusters it belongs to, the shorter
    payload being a prefix of the longer one.
    """

    p: int
    reps: int
    symbols: dict
    independent: bool = False

    def __post_init__(self):
        if not _is_prime(self.p):
            raise InvalidParams(f"p={self.p} is not prime")
        for w in self.symbols.values():
            if np.any(w < 0) or np.any(w >= self.p):
                raise InvalidParams("symbols must lie in [0, p-1]")

    def payload(self, q: int, dest) -> np.ndarray:
        return self.symbols[(q, dest)]


def draw_messages(precoders: PrecoderSet, p: int, seed: int, reps: int = 1, independent: bool = False) -> MessageSet:
    if reps < 1:
        raise InvalidParams("reps must be positive")
    rng = np.random.default_rng([int(seed) & (2 ** 64 - 1), TAG_MESSAGE])
    symbols = {}
    for q in precoders.topology.transmitters:
        terms = precoders.terms(q)
        if independent:
            for dest, key in terms:
                symbols[(q, dest)] = rng.integers(0, p, size=(precoders.blocks[key].v_columns, reps))
        else:
            longest = max(precoders.blocks[key].v_columns for _, key in terms)
            base = rng.integers(0, p, size=(longest, reps))
            for dest, key in terms:
                symbols[(q, dest)] = base[: precoders.blocks[key].v_columns]
    return MessageSet(p=p, reps=reps, symbols=symbols, independent=independent)


def zero_messages(precoders: PrecoderSet, p: int, reps: int = 1) -> MessageSet:
    symbols = {(q, dest): np.zeros((precoders.blocks[key].v_columns, reps), dtype=np.int64)
               for q in precoders.topology.transmitters for dest, key in precoders.terms(q)}
    return MessageSet(p=p, reps=reps, symbols=symbols)


def _dest_at(precoders: PrecoderSet, ell: int):
    return None if precoders.scheme is Scheme.SINGLE_V else ell


def true_sums(messages: MessageSet, precoders: PrecoderSet) -> dict[int, np.ndarray]:
    """Target ``sum_{q in group} w_q mod p`` at every receiver."""
    out = {}
    for ell in precoders.topology.clusters:
        dest = _dest_at(precoders, ell)
        acc = sum(messages.payload(q, dest).astype(np.int64) for q in precoders.topology.group(ell))
        out[ell] = np.mod(acc, messages.p)
    return out


def true_amplitude_sums(messages: MessageSet, precoders: PrecoderSet) -> dict[int, np.ndarray]:
    """Noise-free values of the useful coordinates: sums of centred amplitudes."""
    half = (messages.p - 1) / 2
    out = {}
    for ell in precoders.topology.clusters:
        dest = _dest_at(precoders, ell)
        out[ell] = sum(messages.payload(q, dest) - half for q in precoders.topology.group(ell))
    return out


# --------------------------------------------------------------------------
# encoding / decoding
# --------------------------------------------------------------------------
def encode_all(messages: MessageSet, precoders: PrecoderSet, P, scale=None) -> tuple[dict[int, np.ndarray], object]:
    """Transmit blocks ``X_q`` (shape ``T x reps``) and the common power scale used.

    The scale keeps ``(1/T) ||X_q[:, j]||^2 <= P`` for every transmitter and
    every message; pass ``scale`` to override it.
    """
    if P <= 0:
        raise InvalidParams("power must be positive")
    is_exact = precoders.mode.is_exact
    if scale is None:
        scale = power_scale(precoders, Fraction(P) if is_exact else P, (messages.p - 1) / 2)
    out = {}
    for q in precoders.topology.transmitters:
        payload = {}
        for dest, key in precoders.terms(q):
            w = messages.payload(q, dest)
            if w.shape[0] != precoders.blocks[key].v_columns:
                raise DimensionError(f"tx {q} payload for {dest} has {w.shape[0]} streams, "
                                     f"expected {precoders.blocks[key].v_columns}")
            payload[dest] = modulate(w, messages.p, exact_values=is_exact)
        out[q] = tx_signal(precoders, q, payload, scale)
    return out, scale


@dataclass
class Decoded:
    sums: np.ndarray
    amplitudes: np.ndarray


def zf_decode(Y: np.ndarray, lam: np.ndarray, useful_count: int, m: int, p: int, scale=1,
              svd_tol: float = DEFAULT_SVD_TOL) -> Decoded:
    """Zero-forcing decode of the aligned amplitude sums.

    Solves ``lam z = Y / scale`` (least squares in float mode, exact in
    rational mode). The useful block of ``lam`` already includes the common
    in-cluster gain, so ``z[:useful_count]`` are the amplitude sums
    themselves. Raises :class:`RankDeficient` when ``lam`` lacks full
    column rank.
    """
    if lam.shape[0] != Y.shape[0]:
        raise DimensionError("received block and receiver matrix differ in length")
    if lam.dtype == object:
        rhs = np.vectorize(lambda v: Fraction(v) / Fraction(scale), otypes=[object])(Y)
        try:
            z = exact.solve_modular(lam, rhs)
        except RankDeficient:
            raise
        amp = z[:useful_count]
    else:
        rank, ratio = rank_check_float(lam, svd_tol)
        if rank < lam.shape[1]:
            raise RankDeficient(f"receiver matrix has numerical rank {rank} < {lam.shape[1]} "
                                f"(sigma ratio {ratio:.3e})")
        z, *_ = np.linalg.lstsq(lam, Y / scale, rcond=None)
        amp = z[:useful_count]
    return Decoded(sums=demodulate_sum(amp, m, p), amplitudes=amp)


# --------------------------------------------------------------------------
# trials
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class TrialSpec:
    """Everything a trial needs besides the seed and SNR."""

    topology: Topology
    n: int = 1
    mode: ScalarMode = ScalarMode.COMPLEX
    p: int = 5
    P: float = 1.0
    scheme: Scheme | None = None
    params: ChannelParams = field(default_factory=ChannelParams)
    svd_tol: float = DEFAULT_SVD_TOL
    reps: int = 1
    independent: bool = False
    max_columns: int = DEFAULT_MAX_COLUMNS


@dataclass
class TrialResult:
    seed: int
    snr_db: float | None
    mode: str
    streams: dict[int, int]
    decoded: dict[int, np.ndarray]
    truth: dict[int, np.ndarray]
    errors: dict[int, int]
    max_deviation: float
    failure: str | None = None

    @property
    def symbol_error_count(self) -> int:
        return sum(self.errors.values())

    @property
    def any_error(self) -> bool:
        return self.failure is not None or self.symbol_error_count > 0

    def to_json(self) -> str:
        return json.dumps({
            "seed": self.seed, "snr_db": self.snr_db, "mode": self.mode,
            "streams": {str(k): v for k, v in self.streams.items()},
            "decoded": {str(k): v.tolist() for k, v in self.decoded.items()},
            "truth": {str(k): v.tolist() for k, v in self.truth.items()},
            "errors": {str(k): v for k, v in self.errors.items()},
            "max_deviation": repr(self.max_deviation), "failure": self.failure,
        }, sort_keys=True)


@dataclass
class _Prepared:
    precoders: PrecoderSet
    messages: MessageSet
    X: dict
    scale: object
    lams: dict


def _prepare(spec: TrialSpec, seed: int) -> _Prepared:
    T = blocklength(spec.topology, spec.n, spec.scheme, spec.max_columns)
    channels = draw_channels(spec.topology, T, spec.mode, spec.params, seed)
    precoders = build_precoders(spec.topology, channels, spec.n, seed, spec.scheme, spec.max_columns)
    messages = draw_messages(precoders, spec.p, seed, spec.reps, spec.independent)
    X, scale = encode_all(messages, precoders, spec.P)
    lams = {ell: assemble_lambda(ell, precoders) for ell in spec.topology.clusters}
    return _Prepared(precoders, messages, X, scale, lams)


def noise_variance(P: float, snr_db) -> float:
    """``sigma^2 = P / 10^(snr/10)``; ``None`` or ``inf`` means noise-free."""
    if snr_db is None or math.isinf(snr_db):
        return 0.0
    return float(P) * 10 ** (-float(snr_db) / 10)


def _run_prepared(spec: TrialSpec, prep: _Prepared, seed: int, snr_db) -> TrialResult:
    pre = prep.precoders
    sigma2 = noise_variance(spec.P, snr_db)
    if sigma2 > 0 and spec.mode.is_exact:
        raise UnsupportedMode("noisy trials need a float mode")
    Y = apply_channel(pre.channels, prep.X, sigma2, seed)
    truth = true_sums(prep.messages, pre)
    amp_truth = true_amplitude_sums(prep.messages, pre)
    decoded, errors, streams = {}, {}, {}
    deviation = 0.0
    for ell in spec.topology.clusters:
        useful = pre.streams(ell)
        streams[ell] = useful
        dec = zf_decode(Y[ell], prep.lams[ell], useful, spec.topology.r, spec.p, prep.scale, spec.svd_tol)
        decoded[ell] = dec.sums
        errors[ell] = int(np.count_nonzero(dec.sums != truth[ell]))
        diff = np.abs((dec.amplitudes - amp_truth[ell]).astype(complex))
        deviation = max(deviation, float(diff.max()) if diff.size else 0.0)
    return TrialResult(seed=seed, snr_db=snr_db, mode=spec.mode.value, streams=streams, decoded=decoded,
                       truth=truth, errors=errors, max_deviation=deviation)


def run_trial(spec: TrialSpec, seed: int, snr_db=None) -> TrialResult:
    """One trial: draw channels, precoders and messages from ``seed``, transmit, decode."""
    return _run_prepared(spec, _prepare(spec, seed), seed, snr_db)


def trial_seed(master: int, index: int) -> int:
    """Counter-derived seed of trial ``index``."""
    return int(np.random.SeedSequence([int(master) & (2 ** 64 - 1), index]).generate_state(1, np.uint64)[0])


@dataclass
class CampaignPoint:
    snr_db: float | None
    trials: int
    error_events: int

    @property
    def sum_error_rate(self) -> float:
        return self.error_events / self.trials if self.trials else 0.0

    @property
    def standard_error(self) -> float:
        q = self.sum_error_rate
        return math.sqrt(q * (1 - q) / self.trials) if self.trials else 0.0

    @property
    def ci95(self) -> float:
        return 1.96 * self.standard_error


@dataclass
class Campaign:
    points: list[CampaignPoint]
    results: list[TrialResult]
    failures: list[tuple[int, str]]


def _campaign_chunk(args):
    spec, master, indices, snrs = args
    out = []
    for i in indices:
        seed = trial_seed(master, i)
        try:
            prep = _prepare(spec, seed)
        except Exception as exc:  # recorded, not fatal
            for snr in snrs:
                out.append((i, TrialResult(seed=seed, snr_db=snr, mode=spec.mode.value, streams={}, decoded={},
                                           truth={}, errors={}, max_deviation=float("nan"),
                                           failure=f"{type(exc).__name__}: {exc}")))
            continue
        for snr in snrs:
            try:
                res = _run_prepared(spec, prep, seed, snr)
            except Exception as exc:
                res = TrialResult(seed=seed, snr_db=snr, mode=spec.mode.value, streams={}, decoded={}, truth={},
                                  errors={}, max_deviation=float("nan"), failure=f"{type(exc).__name__}: {exc}")
            out.append((i, res))
    return out


def run_campaign(spec: TrialSpec, trials: int, snr_list: Sequence, master_seed: int = 0,
                 workers: int = 1) -> Campaign:
    """Run ``trials`` counter-seeded trials at every SNR point.

    The same seeds (channels, messages and noise shape) are reused at every
    SNR point, so points differ only by the noise level. Failed trials are
    recorded and counted as error events. Results are ordered by
    ``(snr index, trial index)`` regardless of ``workers``.
    """
    snrs = list(snr_list) or [None]
    indices = list(range(trials))
    if workers > 1 and trials > 1:
        from concurrent.futures import ProcessPoolExecutor
        chunks = [indices[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_campaign_chunk, [(spec, master_seed, c, snrs) for c in chunks if c]))
        flat = [item for part in parts for item in part]
    else:
        flat = _campaign_chunk((spec, master_seed, indices, snrs))
    order = {None if s is None else float(s): k for k, s in enumerate(snrs)}
    flat.sort(key=lambda item: (order[None if item[1].snr_db is None else float(item[1].snr_db)], item[0]))
    results = [r for _, r in flat]
    points = []
    for snr in snrs:
        at = [r for r in results if r.snr_db == snr]
        points.append(CampaignPoint(snr_db=snr, trials=len(at), error_events=sum(r.any_error for r in at)))
    failures = [(i, r.failure) for i, r in flat if r.failure]
    return Campaign(points=points, results=results, failures=failures)


def results_digest(results: Sequence[TrialResult]) -> str:
    h = hashlib.sha256()
    for r in results:
        h.update(r.to_json().encode())
    return h.hexdigest()
