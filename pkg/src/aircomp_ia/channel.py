"""
Diagonal random channels and the superposition channel.

All random quantities are generated row by row: the values at time index
``t`` come from a generator seeded with ``(seed, stream tag, key, t)``.
Drawing a subset of rows therefore reproduces exactly the same numbers as
drawing the full block, which is what lets huge blocklengths be spot-checked
on a handful of rows.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, InvalidParams, UnsupportedMode
from .topology import Topology

# Stream tags keep the channel, precoder, noise and message generators apart.
TAG_CHANNEL = 1
TAG_SEED_MATRIX = 2
TAG_XI = 3
TAG_NOISE = 4
TAG_MESSAGE = 5

EXACT_MAX_DENOMINATOR = 2 ** 16


class ScalarMode(enum.Enum):
    """Scalar field of every channel and precoder entry.

    ``COMPLEX`` draws on an annulus (log-uniform magnitude, uniform phase),
    ``REAL`` draws signed reals with log-uniform magnitude, ``EXACT`` draws
    signed rationals and keeps all arithmetic exact. Float modes carry the
    unit roundoff of IEEE double precision (about 1.1e-16).
    """

    COMPLEX = "float"
    REAL = "real"
    EXACT = "exact"

    @property
    def is_exact(self) -> bool:
        return self is ScalarMode.EXACT

    @classmethod
    def parse(cls, text) -> "ScalarMode":
        if isinstance(text, ScalarMode):
            return text
        aliases = {"float": cls.COMPLEX, "complex": cls.COMPLEX, "real": cls.REAL, "exact": cls.EXACT,
                   "rational": cls.EXACT}
        try:
            return aliases[str(text).strip().lower()]
        except KeyError:
            raise InvalidParams(f"unknown scalar mode {text!r}") from None


@dataclass(frozen=True)
class ChannelParams:
    """Magnitude bounds of every drawn scalar, ``0 < h_min <= h_max``."""

    h_min: float = 0.5
    h_max: float = 2.0

    def __post_init__(self):
        if not (self.h_min > 0 and self.h_min <= self.h_max):
            raise InvalidParams(f"need 0 < h_min <= h_max, got h_min={self.h_min}, h_max={self.h_max}")


def row_rng(seed: int, tag: int, key: int, t: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & (2 ** 64 - 1), tag, key, t])


def _draw_exact(rng: np.random.Generator, count: int, lo: Fraction, hi: Fraction) -> list[Fraction]:
    out = []
    while len(out) < count:
        den = int(rng.integers(1, EXACT_MAX_DENOMINATOR + 1))
        nmin = -((-lo.numerator * den) // lo.denominator)  # ceil(lo * den)
        nmax = (hi.numerator * den) // hi.denominator
        if nmax < nmin:
            continue
        num = int(rng.integers(nmin, nmax + 1))
        sign = 1 if rng.random() < 0.5 else -1
        out.append(Fraction(sign * num, den))
    return out


def draw_row(rng: np.random.Generator, count: int, mode: ScalarMode, params: ChannelParams):
    """``count`` independent nonzero scalars with magnitudes in ``[h_min, h_max]``."""
    if mode.is_exact:
        return _draw_exact(rng, count, Fraction(params.h_min), Fraction(params.h_max))
    log_lo, log_hi = math.log(params.h_min), math.log(params.h_max)
    mag = np.exp(rng.uniform(log_lo, log_hi, size=count))
    if mode is ScalarMode.COMPLEX:
        return mag * np.exp(2j * np.pi * rng.random(count))
    return mag * np.where(rng.random(count) < 0.5, -1.0, 1.0)


def dtype_for(mode: ScalarMode):
    return {ScalarMode.COMPLEX: np.complex128, ScalarMode.REAL: np.float64, ScalarMode.EXACT: object}[mode]


def draw_rows(seed: int, tag: int, key: int, rows: Sequence[int], count: int,
              mode: ScalarMode, params: ChannelParams) -> np.ndarray:
    """Array of shape ``(count, len(rows))``; column ``i`` depends only on ``rows[i]``."""
    out = np.empty((count, len(rows)), dtype=dtype_for(mode))
    for i, t in enumerate(rows):
        out[:, i] = draw_row(row_rng(seed, tag, key, int(t)), count, mode, params)
    return out


def ones(n: int, mode: ScalarMode) -> np.ndarray:
    if mode.is_exact:
        return np.array([Fraction(1)] * n, dtype=object)
    return np.ones(n, dtype=dtype_for(mode))


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Diagonals of every ``H[l, q]`` on the rows ``rows`` of a length-``T`` block.

    ``gains`` has shape ``(K, M, len(rows))``; ``rows`` holds 0-based time
    indices and equals ``range(T)`` unless the set was drawn on a subset.
    """

    topology: Topology
    T: int
    mode: ScalarMode
    params: ChannelParams
    seed: int
    rows: tuple[int, ...]
    gains: np.ndarray

    def gain(self, ell: int, q: int) -> np.ndarray:
        """Diagonal of ``H[ell, q]`` (1-based indices)."""
        return self.gains[ell - 1, q - 1]

    @property
    def length(self) -> int:
        return len(self.rows)

    @property
    def is_full(self) -> bool:
        return len(self.rows) == self.T

    def ones(self) -> np.ndarray:
        return ones(self.length, self.mode)


def draw_channels(topology: Topology, T: int, mode=ScalarMode.COMPLEX, params: ChannelParams | None = None,
                  seed: int = 0, rows: Sequence[int] | None = None) -> ChannelSet:
    """Draw all ``K * M`` diagonal channels of blocklength ``T``.

    Parameters
    ----------
    topology : Topology
    T : int
        Blocklength.
    mode : ScalarMode or str
    params : ChannelParams, optional
        Magnitude bounds; defaults to ``[0.5, 2.0]``.
    seed : int
        Master seed; identical ``(seed, params, mode)`` give bit-identical gains.
    rows : sequence of int, optional
        0-based subset of time indices to materialise. Values on those rows
        equal the corresponding rows of the full draw.
    """
    mode = ScalarMode.parse(mode)
    params = params or ChannelParams()
    if T < 1:
        raise InvalidParams(f"blocklength must be positive, got {T}")
    rows = tuple(range(T)) if rows is None else tuple(int(t) for t in rows)
    if any(not 0 <= t < T for t in rows):
        raise InvalidParams("row indices must lie in [0, T)")
    K, M = topology.K, topology.M
    flat = draw_rows(seed, TAG_CHANNEL, 0, rows, K * M, mode, params)
    gains = flat.reshape(K, M, len(rows))
    gains.flags.writeable = False
    return ChannelSet(topology=topology, T=T, mode=mode, params=params, seed=int(seed), rows=rows, gains=gains)


def complex_noise(seed: int, ell: int, shape, variance: float) -> np.ndarray:
    """Circularly-symmetric Gaussian samples with ``E|z|^2 = variance``."""
    rng = np.random.default_rng([int(seed) & (2 ** 64 - 1), TAG_NOISE, ell])
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(channels: ChannelSet, inputs: Mapping[int, np.ndarray], noise_variance: float = 0.0,
                  seed: int = 0) -> dict[int, np.ndarray]:
    """Received blocks ``Y[l] = sum_q H[l, q] X[q] + Z[l]``.

    ``inputs`` maps every tx ``1..M`` to a length-``T`` vector (or a
    ``T x reps`` array of independent uses). Noise is complex Gaussian with
    ``E|Z(t)|^2 = noise_variance`` and is only available in float modes.
    """
    topo = channels.topology
    if noise_variance < 0:
        raise InvalidParams("noise variance must be non-negative")
    if noise_variance > 0 and channels.mode.is_exact:
        raise UnsupportedMode("exact arithmetic is noise-free; use a float mode for noisy channels")
    missing = set(topo.transmitters) - set(inputs)
    if missing:
        raise DimensionError(f"no input for transmitters {sorted(missing)}")
    shape = None
    for q in topo.transmitters:
        x = np.asarray(inputs[q])
        if x.shape[0] != channels.length:
            raise DimensionError(f"input of tx {q} has length {x.shape[0]}, expected {channels.length}")
        if shape is None:
            shape = x.shape
        elif x.shape != shape:
            raise DimensionError("all inputs must share one shape")

    out = {}
    for ell in topo.clusters:
        y = None
        for q in topo.transmitters:
            x = np.asarray(inputs[q])
            g = channels.gain(ell, q)
            term = (g[:, None] * x) if x.ndim == 2 else g * x
            y = term if y is None else y + term
        if noise_variance > 0:
            y = y + complex_noise(seed, ell, y.shape, noise_variance)
        out[ell] = y
    return out
