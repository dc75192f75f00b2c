"""
Precoder construction for the single-V and two-V alignment schemes.

All precoders act on length-``T`` blocks and every channel is diagonal, so a
"matrix" here is usually its diagonal stored as a vector. Alongside each
numeric diagonal we keep a :class:`~aircomp_ia.monomial.Monomial` giving its
closed form in terms of the independent random diagonals.

Column order of every exponent-product matrix is the lexicographic order of
its exponent vectors, first generator most significant.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import monomial as mono
from .channel import (TAG_SEED_MATRIX, TAG_XI, ChannelParams, ChannelSet, ScalarMode, draw_rows)
from .errors import DimensionError, SchemeError, SingularChannel, SizeOverflow
from .monomial import Monomial
from .topology import (Scheme, Topology, gamma_single, interference_pairs, interference_triples, parity,
                       scheme_selector)

DEFAULT_MAX_COLUMNS = 2 ** 24
XI_PARAMS = ChannelParams(0.5, 2.0)


# --------------------------------------------------------------------------
# exponent bookkeeping
# --------------------------------------------------------------------------
def column_count(dimension: int, bound: int, cap: int | None = DEFAULT_MAX_COLUMNS) -> int:
    count = (bound + 1) ** dimension
    if cap is not None and count > cap:
        raise SizeOverflow(
            f"{bound + 1}^{dimension} = {count} columns exceeds the cap of {cap}; "
            f"lower n or use a topology with fewer interfering pairs"
        )
    return count


def enumerate_exponents(dimension: int, bound: int, cap: int | None = DEFAULT_MAX_COLUMNS) -> list[tuple[int, ...]]:
    """Every vector of ``[0, bound]^dimension`` in lexicographic order."""
    if dimension < 0 or bound < 0:
        raise DimensionError("dimension and bound must be non-negative")
    column_count(dimension, bound, cap)
    return list(itertools.product(range(bound + 1), repeat=dimension))


def exponent_index(alpha: Sequence[int], bound: int) -> int:
    """Position of ``alpha`` in :func:`enumerate_exponents` order."""
    idx = 0
    for a in alpha:
        if not 0 <= a <= bound:
            raise DimensionError(f"exponent {a} outside [0, {bound}]")
        idx = idx * (bound + 1) + a
    return idx


def exponent_vector(index: int, dimension: int, bound: int) -> tuple[int, ...]:
    base = bound + 1
    out = []
    for _ in range(dimension):
        index, a = divmod(index, base)
        out.append(a)
    if index:
        raise DimensionError("index out of range")
    return tuple(reversed(out))


def exponent_product_matrix(diags: Sequence[np.ndarray], bound: int, basis: np.ndarray,
                            cap: int | None = DEFAULT_MAX_COLUMNS) -> np.ndarray:
    """Matrix whose column ``j`` is ``prod_i diags[i] ** alpha_j[i] * basis``."""
    column_count(len(diags), bound, cap)
    basis = np.asarray(basis)
    out = np.ones((basis.shape[0], 1), dtype=basis.dtype)
    for d in diags:
        powers = np.stack([d ** e for e in range(bound + 1)], axis=1)
        out = (out[:, :, None] * powers[:, None, :]).reshape(basis.shape[0], -1)
    return out * basis[:, None]


def exponent_column(diags: Sequence[np.ndarray], alpha: Sequence[int], basis: np.ndarray) -> np.ndarray:
    """Single column of :func:`exponent_product_matrix`, computed on demand."""
    if len(alpha) != len(diags):
        raise DimensionError("exponent vector length differs from generator count")
    col = np.asarray(basis)
    for d, a in zip(diags, alpha):
        if a:
            col = col * d ** a
    return col


# --------------------------------------------------------------------------
# generator sets
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Generator:
    """Effective interference matrix ``H[rx, tx] C`` pre-multiplying a V block.

    ``dest`` is the cluster whose C-chain supplies ``C`` (two-V scheme);
    it is ``None`` in the single-V scheme where each tx has one ``C``.
    """

    rx: int
    tx: int
    dest: int | None
    diag: np.ndarray
    monomial: Monomial

    @property
    def label(self) -> tuple:
        return (self.rx, self.tx, self.dest)


class GeneratorSet(Sequence):
    """Ordered, label-unique collection of :class:`Generator`."""

    def __init__(self, generators: Iterable[Generator]):
        self._gens = tuple(generators)
        self._index = {g.label: i for i, g in enumerate(self._gens)}
        if len(self._index) != len(self._gens):
            raise ValueError("generator labels must be distinct")

    def __getitem__(self, i):
        return self._gens[i]

    def __len__(self):
        return len(self._gens)

    @property
    def labels(self) -> list[tuple]:
        return [g.label for g in self._gens]

    @property
    def diags(self) -> list[np.ndarray]:
        return [g.diag for g in self._gens]

    def index_of(self, label) -> int | None:
        return self._index.get(tuple(label))

    def without(self, label) -> "GeneratorSet":
        """Copy missing one generator (used for negative controls)."""
        return GeneratorSet(g for g in self._gens if g.label != tuple(label))


# --------------------------------------------------------------------------
# IA blocks (V, W pairs)
# --------------------------------------------------------------------------
@dataclass(eq=False)
class IABlock:
    """One IA precoder ``V`` and its interference span ``W``.

    ``key`` is 0 for the single-V scheme and the parity (1 or 2) for the
    two-V scheme. ``V`` and ``W`` are materialised lazily and cached;
    single columns can always be obtained with :meth:`v_column` and
    :meth:`w_column` without building the whole matrix.
    """

    key: int
    generators: GeneratorSet
    basis: np.ndarray
    basis_symbol: tuple | None
    n: int
    cap: int | None = DEFAULT_MAX_COLUMNS
    _v: np.ndarray | None = field(default=None, repr=False)
    _w: np.ndarray | None = field(default=None, repr=False)

    @property
    def gamma(self) -> int:
        return len(self.generators)

    @property
    def v_columns(self) -> int:
        return self.n ** self.gamma

    @property
    def w_columns(self) -> int:
        return (self.n + 1) ** self.gamma

    @property
    def v(self) -> np.ndarray:
        if self._v is None:
            self._v = build_iav(self.generators, self.n, self.basis, self.cap)
        return self._v

    @property
    def w(self) -> np.ndarray:
        if self._w is None:
            self._w = build_iaw(self.generators, self.n, self.basis, self.cap)
        return self._w

    def v_column(self, alpha) -> np.ndarray:
        if any(a > self.n - 1 for a in alpha):
            raise DimensionError("V exponents are bounded by n - 1")
        return exponent_column(self.generators.diags, alpha, self.basis)

    def w_column(self, alpha) -> np.ndarray:
        if any(a > self.n for a in alpha):
            raise DimensionError("W exponents are bounded by n")
        return exponent_column(self.generators.diags, alpha, self.basis)

    def column_monomial(self, alpha) -> Monomial:
        """Closed form of the column with exponent vector ``alpha``."""
        out = mono.product(g.monomial ** a for g, a in zip(self.generators, alpha))
        if self.basis_symbol is not None:
            out = out * Monomial({self.basis_symbol: 1})
        return out


def build_iav(generators: GeneratorSet, n: int, basis_vector: np.ndarray,
              cap: int | None = DEFAULT_MAX_COLUMNS) -> np.ndarray:
    """IA precoder with exponents in ``[0, n-1]``: shape ``T x n^gamma``."""
    if n < 1:
        raise DimensionError("n must be at least 1")
    return exponent_product_matrix(list(generators.diags), n - 1, basis_vector, cap)


def build_iaw(generators: GeneratorSet, n: int, basis_vector: np.ndarray,
              cap: int | None = DEFAULT_MAX_COLUMNS) -> np.ndarray:
    """Interference span with exponents in ``[0, n]``: shape ``T x (n+1)^gamma``."""
    if n < 1:
        raise DimensionError("n must be at least 1")
    return exponent_product_matrix(list(generators.diags), n, basis_vector, cap)


# --------------------------------------------------------------------------
# C-chains
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class CChain:
    """AirComp precoders and their closed forms.

    Keys are tx indices ``q`` (single-V) or ``(cluster, q)`` pairs (two-V).
    ``seeds`` maps each freely drawn seed symbol to its diagonal.
    """

    matrices: dict
    monomials: dict
    seeds: dict


def _check_invertible(channels: ChannelSet):
    if channels.mode.is_exact:
        bad = any(x == 0 for x in channels.gains.ravel())
    else:
        bad = bool(np.any(channels.gains == 0))
    if bad:
        raise SingularChannel("a diagonal channel entry is zero")


def _draw_seed(seed: int, ell: int, channels: ChannelSet) -> np.ndarray:
    return draw_rows(seed, TAG_SEED_MATRIX, ell, channels.rows, 1, channels.mode, channels.params)[0]


def _equalise(topology: Topology, channels: ChannelSet, ell: int, matrices, monomials, key):
    """Fill the chain of cluster ``ell`` from the precoder of its first tx."""
    grp = topology.group(ell)
    t1 = grp[0]
    ref = channels.gain(ell, t1) * matrices[key(t1)]
    ref_mono = mono.H(ell, t1) * monomials[key(t1)]
    for q in grp[1:]:
        matrices[key(q)] = ref / channels.gain(ell, q)
        monomials[key(q)] = ref_mono / mono.H(ell, q)


def build_c_chain(topology: Topology, channels: ChannelSet, seed: int) -> CChain:
    """Single-V AirComp precoders ``C_q`` keyed by tx.

    A seed is drawn for the first tx of every cluster that shares nothing
    with its predecessor; the other precoders follow from
    ``H[l, q] C_q = H[l, t_l1] C_{t_l1}``. With one shared tx between
    neighbours, the chain of cluster ``l`` continues into cluster ``l + 1``.
    """
    if scheme_selector(topology) is not Scheme.SINGLE_V:
        raise SchemeError("the single C-chain needs every overlap to be at most 1")
    _check_invertible(channels)
    matrices, monomials, seeds = {}, {}, {}
    for ell in topology.clusters:
        t1 = topology.first_tx(ell)
        if topology.overlap_before(ell) == 0:
            sym = mono.seed_symbol(ell, t1)
            seeds[sym] = _draw_seed(seed, ell, channels)
            matrices[t1] = seeds[sym]
            monomials[t1] = Monomial({sym: 1})
        _equalise(topology, channels, ell, matrices, monomials, key=lambda q: q)
    return CChain(matrices=matrices, monomials=monomials, seeds=seeds)


def build_cluster_chains(topology: Topology, channels: ChannelSet, seed: int) -> CChain:
    """Two-V AirComp precoders ``C_l^(q)`` keyed by ``(l, q)``, one free seed per cluster."""
    _check_invertible(channels)
    matrices, monomials, seeds = {}, {}, {}
    for ell in topology.clusters:
        t1 = topology.first_tx(ell)
        sym = mono.seed_symbol(ell, t1)
        seeds[sym] = _draw_seed(seed, ell, channels)
        matrices[(ell, t1)] = seeds[sym]
        monomials[(ell, t1)] = Monomial({sym: 1})
        _equalise(topology, channels, ell, matrices, monomials, key=lambda q, ell=ell: (ell, q))
    return CChain(matrices=matrices, monomials=monomials, seeds=seeds)


def build_generator_set_single(topology: Topology, channels: ChannelSet, chain: CChain) -> GeneratorSet:
    """One generator ``H[l, k] C_k`` per interfering pair, in pair order."""
    return GeneratorSet(
        Generator(rx=ell, tx=q, dest=None, diag=channels.gain(ell, q) * chain.matrices[q],
                  monomial=mono.H(ell, q) * chain.monomials[q])
        for ell, q in interference_pairs(topology)
    )


def build_generator_sets_two(topology: Topology, channels: ChannelSet, chain: CChain) -> dict[int, GeneratorSet]:
    """Generators ``H[a, k] C_b^(k)`` split by the parity of the destination ``b``."""
    split = {1: [], 2: []}
    for a, k, b in interference_triples(topology):
        split[parity(b)].append(
            Generator(rx=a, tx=k, dest=b, diag=channels.gain(a, k) * chain.matrices[(b, k)],
                      monomial=mono.H(a, k) * chain.monomials[(b, k)])
        )
    return {p: GeneratorSet(gens) for p, gens in split.items()}


# --------------------------------------------------------------------------
# precoder sets
# --------------------------------------------------------------------------
@dataclass(eq=False)
class PrecoderSet:
    """Everything a transmitter needs: C-chains, IA blocks and basis vectors."""

    scheme: Scheme
    topology: Topology
    channels: ChannelSet
    n: int
    chain: CChain
    blocks: dict[int, IABlock]
    xi: dict[int, np.ndarray]

    @property
    def mode(self) -> ScalarMode:
        return self.channels.mode

    @property
    def T(self) -> int:
        return self.channels.T

    @property
    def seeds(self) -> dict:
        return self.chain.seeds

    def block_key(self, ell: int) -> int:
        """IA block carrying the codewords intended for cluster ``ell``."""
        return 0 if self.scheme is Scheme.SINGLE_V else parity(ell)

    def block_of(self, ell: int) -> IABlock:
        return self.blocks[self.block_key(ell)]

    def streams(self, ell: int) -> int:
        """Useful streams (aligned sums) decoded by receiver ``ell``."""
        return self.block_of(ell).v_columns

    @property
    def payload_length(self) -> int:
        return max(b.v_columns for b in self.blocks.values())

    def c_key(self, dest: int | None, q: int):
        return q if self.scheme is Scheme.SINGLE_V else (dest, q)

    def precoder(self, dest: int | None, q: int) -> np.ndarray:
        """Diagonal ``C`` used by tx ``q`` for codewords destined to ``dest``."""
        return self.chain.matrices[self.c_key(dest, q)]

    def precoder_monomial(self, dest: int | None, q: int) -> Monomial:
        return self.chain.monomials[self.c_key(dest, q)]

    def terms(self, q: int) -> list[tuple[int | None, int]]:
        """``(destination, block key)`` of every term emitted by tx ``q``."""
        if self.scheme is Scheme.SINGLE_V:
            return [(None, 0)]
        return [(ell, parity(ell)) for ell in self.topology.clusters_of(q)]

    def lookup(self, symbol) -> np.ndarray:
        """Numeric diagonal of an independent symbol."""
        kind = symbol[0]
        if kind == "H":
            return self.channels.gain(symbol[1], symbol[2])
        if kind == "C":
            return self.chain.seeds[symbol]
        if kind == "Xi":
            return self.xi[symbol[1]]
        raise KeyError(symbol)

    def evaluate(self, monomial: Monomial) -> np.ndarray:
        return monomial.evaluate(self.lookup, self.channels.ones())


def build_single_v(topology: Topology, channels: ChannelSet, n: int, seed: int,
                   cap: int | None = DEFAULT_MAX_COLUMNS) -> PrecoderSet:
    chain = build_c_chain(topology, channels, seed)
    gens = build_generator_set_single(topology, channels, chain)
    block = IABlock(key=0, generators=gens, basis=channels.ones(), basis_symbol=None, n=n, cap=cap)
    return PrecoderSet(scheme=Scheme.SINGLE_V, topology=topology, channels=channels, n=n, chain=chain,
                       blocks={0: block}, xi={})


def build_two_v(topology: Topology, channels: ChannelSet, n: int, seed: int,
                cap: int | None = DEFAULT_MAX_COLUMNS) -> PrecoderSet:
    """Two-V precoders: per-cluster chains, parity-split generators, random bases."""
    chain = build_cluster_chains(topology, channels, seed)
    sets = build_generator_sets_two(topology, channels, chain)
    xi = {p: draw_rows(seed, TAG_XI, p, channels.rows, 1, channels.mode, XI_PARAMS)[0] for p in (1, 2)}
    blocks = {
        p: IABlock(key=p, generators=sets[p], basis=xi[p], basis_symbol=mono.xi_symbol(p), n=n, cap=cap)
        for p in (1, 2)
    }
    return PrecoderSet(scheme=Scheme.TWO_V, topology=topology, channels=channels, n=n, chain=chain,
                       blocks=blocks, xi=xi)


def build_precoders(topology: Topology, channels: ChannelSet, n: int, seed: int, scheme: Scheme | None = None,
                    cap: int | None = DEFAULT_MAX_COLUMNS) -> PrecoderSet:
    """Dispatch to the scheme chosen by :func:`scheme_selector` unless overridden."""
    if n < 1:
        raise DimensionError("n must be at least 1")
    scheme = scheme or scheme_selector(topology)
    if scheme is Scheme.SINGLE_V:
        return build_single_v(topology, channels, n, seed, cap)
    return build_two_v(topology, channels, n, seed, cap)


# --------------------------------------------------------------------------
# transmit signals
# --------------------------------------------------------------------------
def _payload_for(x, dest, length):
    if isinstance(x, Mapping):
        payload = np.asarray(x[dest])
    else:
        payload = np.asarray(x)[:length] if np.asarray(x).shape[0] >= length else np.asarray(x)
    if payload.shape[0] != length:
        raise DimensionError(f"payload has {payload.shape[0]} entries, expected {length}")
    return payload


def tx_signal(precoders: PrecoderSet, q: int, x, scale=1) -> np.ndarray:
    """Transmit block of tx ``q``.

    Single-V: ``scale * C_q V x``. Two-V: ``scale * sum_l C_l^(q) V_parity(l) x``
    over the (one or two) clusters owning ``q``. ``x`` is either one payload
    (the first ``n^gamma_p`` entries feed block ``p``) or a mapping from
    destination cluster to payload. Payloads may be 2-D (streams x uses).
    """
    out = None
    for dest, key in precoders.terms(q):
        block = precoders.blocks[key]
        payload = _payload_for(x, dest, block.v_columns)
        c = precoders.precoder(dest, q)
        coded = block.v @ payload
        term = c[:, None] * coded if coded.ndim == 2 else c * coded
        out = term if out is None else out + term
    return out * scale


def power_scale(precoders: PrecoderSet, P, amplitude_max: float):
    """Largest common scale keeping ``(1/T) ||X_q||^2 <= P`` for every payload.

    A single scale is shared by all terms of all transmitters, otherwise the
    in-cluster gains would no longer be equal. The bound uses the spectral
    norm of each term and the worst-case payload norm
    ``sqrt(streams) * amplitude_max``. Exact mode returns a rational lower
    bound of the float value.
    """
    worst = 0.0
    for q in precoders.topology.transmitters:
        total = 0.0
        for dest, key in precoders.terms(q):
            block = precoders.blocks[key]
            m = precoders.precoder(dest, q)[:, None] * block.v
            if precoders.mode.is_exact:
                m = m.astype(float)
            total += np.linalg.norm(m, 2) * math.sqrt(block.v_columns) * amplitude_max
        worst = max(worst, total)
    if worst == 0:
        return 1
    s = math.sqrt(float(P) * precoders.T) / worst * (1 - 1e-12)
    if precoders.mode.is_exact:
        return Fraction(math.floor(s * 2 ** 40), 2 ** 40)
    return s


def precoder_rows(precoders: PrecoderSet) -> Iterable[tuple]:
    """Rows ``(kind, cluster, q, t, value)`` for ``precoders.csv``.

    ``kind`` is ``C`` for AirComp diagonals and ``Xi`` for two-V bases
    (cluster column holds the parity there). ``t`` is 1-based.
    """
    for key, vec in sorted(precoders.chain.matrices.items(), key=lambda kv: str(kv[0])):
        if precoders.scheme is Scheme.SINGLE_V:
            q = key
            cluster = next(ell for ell in precoders.topology.clusters_of(q))
        else:
            cluster, q = key
        for t, v in zip(precoders.channels.rows, vec):
            yield ("C", cluster, q, t + 1, v)
    for p, vec in sorted(precoders.xi.items()):
        for t, v in zip(precoders.channels.rows, vec):
            yield ("Xi", p, 0, t + 1, v)


def exponent_rows(precoders: PrecoderSet, max_rows: int = 2 ** 16) -> Iterable[tuple]:
    """Rows ``(matrix, column, e1..e_gamma)`` for ``exponents.csv`` (1-based columns)."""
    emitted = 0
    for key, block in sorted(precoders.blocks.items()):
        suffix = "" if key == 0 else str(key)
        for name, bound in (("V" + suffix, block.n - 1), ("W" + suffix, block.n)):
            for j, alpha in enumerate(itertools.product(range(bound + 1), repeat=block.gamma)):
                if emitted >= max_rows:
                    return
                emitted += 1
                yield (name, j + 1) + tuple(alpha)
