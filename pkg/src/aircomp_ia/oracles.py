"""
Independent oracles: generic full rank of power-product matrices and the
two reference schemes (cluster-wise time sharing and IA-only time sharing).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import exact
from .alignment import assemble_lambda, blocklength, dof_accounting
from .channel import ChannelParams, ChannelSet, ScalarMode, apply_channel, draw_channels, draw_row
from .errors import InvalidParams
from .precoding import build_cluster_chains, build_precoders
from .topology import Topology, build_topology
from .transceiver import MessageSet, demodulate_sum, encode_all, modulate, trial_seed, zf_decode

LEMMA_MAX_L = 8
TAG_LEMMA = 6


# --------------------------------------------------------------------------
# generic rank of power-product matrices
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class LemmaInstance:
    """``L`` random vectors ``s_k`` of length ``L`` and ``L`` exponent vectors.

    ``allow_duplicates`` is a test hook for negative controls; regular
    instances require pairwise distinct exponent vectors.
    """

    L: int
    s: tuple
    alphas: tuple
    allow_duplicates: bool = False

    def __post_init__(self):
        if self.L < 1:
            raise InvalidParams("L must be positive")
        if len(self.s) != self.L or any(len(v) != self.L for v in self.s):
            raise InvalidParams("need L vectors of length L")
        if len(self.alphas) != self.L or any(len(a) != self.L for a in self.alphas):
            raise InvalidParams("need L exponent vectors of length L")
        if any(a < 0 for alpha in self.alphas for a in alpha):
            raise InvalidParams("exponents must be non-negative")
        if any(x == 0 for v in self.s for x in v):
            raise InvalidParams("entries of s must be nonzero")
        if not self.allow_duplicates and len(set(map(tuple, self.alphas))) != self.L:
            raise InvalidParams("exponent vectors must be pairwise distinct")


def lemma_matrix(instance: LemmaInstance) -> np.ndarray:
    """``M[i, j] = prod_k s_k[i] ** alpha_j[k]`` as an exact object array."""
    L = instance.L
    out = np.empty((L, L), dtype=object)
    for i in range(L):
        for j, alpha in enumerate(instance.alphas):
            v = Fraction(1)
            for k, a in enumerate(alpha):
                if a:
                    v *= Fraction(instance.s[k][i]) ** a
            out[i, j] = v
    return out


def draw_lemma_instance(L: int, rng: np.random.Generator, params: ChannelParams | None = None,
                        duplicate: bool = False) -> LemmaInstance:
    """Random rational ``s`` and distinct exponents from ``[0, L]^L``.

    ``duplicate=True`` copies the first exponent vector into the second
    column (negative control).
    """
    params = params or ChannelParams()
    s = tuple(tuple(draw_row(rng, L, ScalarMode.EXACT, params)) for _ in range(L))
    alphas = []
    seen = set()
    while len(alphas) < L:
        a = tuple(int(x) for x in rng.integers(0, L + 1, size=L))
        if a not in seen:
            seen.add(a)
            alphas.append(a)
    if duplicate and L >= 2:
        alphas[1] = alphas[0]
    return LemmaInstance(L=L, s=s, alphas=tuple(alphas), allow_duplicates=duplicate)


@dataclass(frozen=True)
class LemmaCampaign:
    L: int
    trials: int
    full_rank: int
    seed: int

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.full_rank, self.trials) if self.trials else Fraction(0)


def lemma_trial_campaign(L: int, trials: int, seed: int, duplicate_control: bool = False) -> LemmaCampaign:
    """Fraction of random instances whose exact determinant is nonzero."""
    if not 1 <= L <= LEMMA_MAX_L:
        raise InvalidParams(f"L must lie in [1, {LEMMA_MAX_L}]")
    if trials < 1:
        raise InvalidParams("trials must be positive")
    full = 0
    for t in range(trials):
        rng = np.random.default_rng([int(seed) & (2 ** 64 - 1), TAG_LEMMA, L, t])
        inst = draw_lemma_instance(L, rng, duplicate=duplicate_control)
        if exact.exact_det(lemma_matrix(inst)) != 0:
            full += 1
    return LemmaCampaign(L=L, trials=trials, full_rank=full, seed=seed)


# --------------------------------------------------------------------------
# baselines
# --------------------------------------------------------------------------
@dataclass
class BaselineReport:
    scheme: str
    K: int
    r: int
    per_cluster: list
    alignment_bound: Fraction
    simulated: int = 0
    recovered: int = 0
    notes: list = field(default_factory=list)

    @property
    def sum_dof(self) -> Fraction:
        return sum(self.per_cluster, Fraction(0))

    @property
    def gain_vs_theorem(self) -> Fraction:
        return self.alignment_bound / self.sum_dof

    @property
    def recovery_rate(self) -> float | None:
        return self.recovered / self.simulated if self.simulated else None


def alignment_bound(topology: Topology) -> Fraction:
    """Asymptotic sum-DoF of the alignment scheme selected for ``topology``."""
    return dof_accounting(topology, 1).sum_limit


def _draw_field(rng, p, shape):
    return rng.integers(0, p, size=shape)


def baseline_tdma(topology: Topology, simulate: int = 0, seed: int = 0, p: int = 5,
                  mode=ScalarMode.COMPLEX, params: ChannelParams | None = None) -> BaselineReport:
    """Clusters take turns; each runs plain over-the-air computation in its slot.

    Per-cluster DoF ``1/K``, sum ``1``. With ``simulate > 0`` that many
    noise-free rounds of ``K`` one-symbol slots are run: in slot ``l`` only
    the transmitters of cluster ``l`` are active and use the cluster's
    equalising precoders, so receiver ``l`` sees the plain sum of amplitudes
    scaled by one known gain.
    """
    K = topology.K
    report = BaselineReport(scheme="TDMA_AirComp", K=K, r=topology.r, per_cluster=[Fraction(1, K)] * K,
                            alignment_bound=alignment_bound(topology))
    mode = ScalarMode.parse(mode)
    for trial in range(simulate):
        s = trial_seed(seed, trial)
        channels = draw_channels(topology, K, mode, params, s)
        chain = build_cluster_chains(topology, channels, s)
        rng = np.random.default_rng([s, 7])
        w = {q: int(x) for q, x in zip(topology.transmitters, _draw_field(rng, p, topology.M))}
        exact_values = mode.is_exact
        for ell in topology.clusters:
            t = ell - 1  # slot of cluster ell
            y = 0
            for q in topology.group(ell):
                y = y + channels.gain(ell, q)[t] * chain.matrices[(ell, q)][t] * modulate(w[q], p, exact_values)
            ref = channels.gain(ell, topology.first_tx(ell))[t] * chain.matrices[(ell, topology.first_tx(ell))][t]
            est = y / ref
            decoded = demodulate_sum(np.array([est], dtype=object if exact_values else None), topology.r, p)[0]
            truth = sum(w[q] for q in topology.group(ell)) % p
            report.simulated += 1
            report.recovered += int(decoded == truth)
    return report


def _slot_topology(K: int) -> Topology:
    return build_topology(K, 1, [0] * (K - 1))


def _slot_channels(topology: Topology, full: ChannelSet, slot: int, sub: Topology) -> ChannelSet:
    """Channels of the ``K``-user interference channel formed in ``slot``.

    Sub-transmitter ``k`` is the ``slot``-th member of cluster ``k``.
    """
    K = topology.K
    gains = np.empty((K, K, full.length), dtype=full.gains.dtype)
    for ell in topology.clusters:
        for k in topology.clusters:
            gains[ell - 1, k - 1] = full.gain(ell, topology.group(k)[slot])
    gains.flags.writeable = False
    return ChannelSet(topology=sub, T=full.T, mode=full.mode, params=full.params, seed=full.seed,
                      rows=full.rows, gains=gains)


def baseline_ia_only(topology: Topology, simulate: int = 0, seed: int = 0, n: int = 1, p: int = 5,
                     mode=ScalarMode.COMPLEX, params: ChannelParams | None = None) -> BaselineReport:
    """Alignment without computation: ``r`` slots of a ``K``-user interference channel.

    In slot ``j`` the ``j``-th transmitter of every cluster sends its own
    message to its receiver; receivers recover individual messages by
    alignment and add them after the ``r`` slots. Sum-DoF ``K / (2r)`` in
    the limit. With ``simulate > 0`` the slots are run noise-free with the
    single-V machinery on singleton clusters.
    """
    K, r = topology.K, topology.r
    report = BaselineReport(scheme="IA_only", K=K, r=r, per_cluster=[Fraction(1, 2 * r)] * K,
                            alignment_bound=alignment_bound(topology))
    mode = ScalarMode.parse(mode)
    sub = _slot_topology(K)
    T = blocklength(sub, n)
    for trial in range(simulate):
        s = trial_seed(seed, trial)
        rng = np.random.default_rng([s, 8])
        streams = None
        acc = {ell: 0 for ell in topology.clusters}
        w = None
        for slot in range(r):
            full = draw_channels(topology, T, mode, params, trial_seed(s, slot))
            ch = _slot_channels(topology, full, slot, sub)
            pre = build_precoders(sub, ch, n, s)
            if w is None:
                streams = pre.streams(1)
                w = {q: _draw_field(rng, p, (streams, 1)) for q in topology.transmitters}
            symbols = {(k, None): w[topology.group(k)[slot]] for k in sub.transmitters}
            msgs = MessageSet(p=p, reps=1, symbols=symbols)
            X, scale = encode_all(msgs, pre, 1.0)
            Y = apply_channel(ch, X)
            for ell in topology.clusters:
                dec = zf_decode(Y[ell], assemble_lambda(ell, pre), streams, 1, p, scale)
                acc[ell] = acc[ell] + dec.sums
        for ell in topology.clusters:
            truth = np.mod(sum(w[q] for q in topology.group(ell)), p)
            report.simulated += 1
            report.recovered += int(np.array_equal(np.mod(acc[ell], p), truth))
    return report
