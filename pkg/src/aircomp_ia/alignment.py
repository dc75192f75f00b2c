"""
Receiver-side verification: signal/interference matrices, containment,
rank and degrees-of-freedom accounting.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import exact
from . import monomial as mono
from .errors import ContainmentFailure, DimensionError, NumericalFailure, SizeOverflow
from .precoding import PrecoderSet, exponent_index
from .topology import Scheme, Topology, gamma_single, gamma_two, parity, scheme_selector

log = logging.getLogger(__name__)

DEFAULT_SVD_TOL = 1e-9
ENUMERATION_LIMIT = 2 ** 16


class RankVerdict(enum.Enum):
    FULL_RANK = "FullRank"
    DEFICIENT = "Deficient"
    NOT_RUN = "NotRun"


# --------------------------------------------------------------------------
# dimension counting
# --------------------------------------------------------------------------
def blocklength(topology: Topology, n: int, scheme: Scheme | None = None, cap: int | None = None) -> int:
    """Blocklength ``T`` of the scheme at integer parameter ``n``.

    Single-V: ``n^g + (n+1)^g``. Two-V: ``max_p n^g_p + (n+1)^g_1 + (n+1)^g_2``,
    which is ``n^g + 2 (n+1)^g`` when both parities have ``g`` generators.
    """
    if n < 1:
        raise DimensionError("n must be at least 1")
    scheme = scheme or scheme_selector(topology)
    if scheme is Scheme.SINGLE_V:
        g = gamma_single(topology)
        T = n ** g + (n + 1) ** g
    else:
        gs = gamma_two(topology)
        T = max(n ** gs[1], n ** gs[2]) + (n + 1) ** gs[1] + (n + 1) ** gs[2]
    if cap is not None and T > cap:
        raise SizeOverflow(f"blocklength {T} exceeds the cap of {cap}")
    return T


def _limit_per_rx(topology: Topology, scheme: Scheme, ell: int) -> Fraction:
    if scheme is Scheme.SINGLE_V:
        return Fraction(1, 2)
    gs = gamma_two(topology)
    top = max(gs.values())
    if gs[parity(ell)] < top:
        return Fraction(0)
    return Fraction(1, 1 + sum(1 for g in gs.values() if g == top))


@dataclass(frozen=True)
class DofSummary:
    """Exact per-receiver fractions ``useful / T`` and their ``n -> inf`` limits."""

    n: int
    T: int
    scheme: Scheme
    useful: dict[int, int]
    fractions: dict[int, Fraction]
    limits: dict[int, Fraction]
    asymmetric: bool

    @property
    def sum_fraction(self) -> Fraction:
        return sum(self.fractions.values(), Fraction(0))

    @property
    def sum_limit(self) -> Fraction:
        return sum(self.limits.values(), Fraction(0))


def dof_accounting(topology: Topology, n: int, scheme: Scheme | None = None) -> DofSummary:
    scheme = scheme or scheme_selector(topology)
    T = blocklength(topology, n, scheme)
    if scheme is Scheme.SINGLE_V:
        useful = {ell: n ** gamma_single(topology) for ell in topology.clusters}
        asymmetric = False
    else:
        gs = gamma_two(topology)
        useful = {ell: n ** gs[parity(ell)] for ell in topology.clusters}
        asymmetric = gs[1] != gs[2]
    return DofSummary(
        n=n, T=T, scheme=scheme, useful=useful,
        fractions={ell: Fraction(u, T) for ell, u in useful.items()},
        limits={ell: _limit_per_rx(topology, scheme, ell) for ell in topology.clusters},
        asymmetric=asymmetric,
    )


# --------------------------------------------------------------------------
# receiver matrices
# --------------------------------------------------------------------------
def useful_gain(ell: int, precoders: PrecoderSet) -> np.ndarray:
    """Common effective gain ``H[l, t_l1] C`` of every in-cluster transmission."""
    t1 = precoders.topology.first_tx(ell)
    dest = None if precoders.scheme is Scheme.SINGLE_V else ell
    return precoders.channels.gain(ell, t1) * precoders.precoder(dest, t1)


def interference_blocks(precoders: PrecoderSet) -> list:
    """IA blocks spanning interference at every receiver, in column order."""
    return [precoders.blocks[k] for k in sorted(precoders.blocks)]


def assemble_lambda(ell: int, precoders: PrecoderSet) -> np.ndarray:
    """``[useful block | W]`` (single-V) or ``[useful block | W_1 | W_2]`` (two-V)."""
    if ell not in precoders.topology.clusters:
        raise DimensionError(f"no receiver {ell}")
    block = precoders.block_of(ell)
    useful = useful_gain(ell, precoders)[:, None] * block.v
    return np.hstack([useful] + [b.w for b in interference_blocks(precoders)])


def interference_terms(ell: int, precoders: PrecoderSet) -> list[tuple[int, int | None, int]]:
    """``(tx, destination, block key)`` of every term that is interference at ``ell``."""
    topo = precoders.topology
    out = []
    for q in topo.transmitters:
        for dest, key in precoders.terms(q):
            if precoders.scheme is Scheme.SINGLE_V:
                if q not in topo.group(ell):
                    out.append((q, dest, key))
            elif dest != ell:
                out.append((q, dest, key))
    return out


@dataclass
class ContainmentResult:
    """Outcome of :func:`check_containment` for one receiver."""

    residual: float
    terms: int
    columns_checked: int
    bookkeeping: str  # "enumerated" or "closed-form"


def _sample_alphas(gamma: int, n: int, count: int, seed: int = 0) -> list[tuple[int, ...]]:
    rng = np.random.default_rng(seed)
    alphas = {(0,) * gamma, (n - 1,) * gamma}
    while len(alphas) < min(count, n ** gamma):
        alphas.add(tuple(int(a) for a in rng.integers(0, n, size=gamma)))
    return sorted(alphas)


def check_containment(precoders: PrecoderSet, column_sample: int | None = None,
                      enumeration_limit: int = ENUMERATION_LIMIT) -> dict[int, ContainmentResult]:
    """Verify ``span(G V) within span(W)`` for every interference term.

    For each term reaching receiver ``l`` the matching generator is located
    by label; each V column with exponent vector ``alpha`` must then equal
    the W column at ``alpha + e_G``. The index shift is checked for every
    column when V has at most ``enumeration_limit`` columns; beyond that the
    shift is checked coordinate-wise (every V coordinate ranges over
    ``[0, n-1]`` independently, so the shifted set stays inside ``[0, n]``).

    The numeric residual recomputes ``H[l, q] C`` from the channel and the
    chain, independently of the stored generator diagonal, and compares
    columns. All columns are compared when V is materialisable, otherwise a
    deterministic sample of ``column_sample`` columns (always including the
    all-zero and all-``n-1`` vectors).
    """
    out = {}
    topo = precoders.topology
    n = precoders.n
    for ell in topo.clusters:
        worst = 0.0
        checked = 0
        mode = "enumerated"
        terms = interference_terms(ell, precoders)
        for q, dest, key in terms:
            block = precoders.blocks[key]
            i = block.generators.index_of((ell, q, dest))
            if i is None:
                raise ContainmentFailure(
                    f"interference term (rx={ell}, tx={q}, dest={dest}) has no generator in block {key}")
            gamma = block.gamma
            if block.v_columns <= enumeration_limit:
                for j in range(block.v_columns):
                    beta = _shift(_alpha_of(j, gamma, n - 1), i)
                    if beta[i] > n:
                        raise ContainmentFailure(f"shifted exponent {beta[i]} exceeds n={n}")
            else:
                mode = "closed-form"
                if (n - 1) + 1 > n:  # pragma: no cover
                    raise ContainmentFailure("shift leaves the W exponent box")

            effective = precoders.channels.gain(ell, q) * precoders.precoder(dest, q)
            if column_sample is None:
                v, w = block.v, block.w
                pairs = ((v[:, j], w[:, _shifted_index(j, gamma, n, i)]) for j in range(block.v_columns))
            else:
                pairs = ((block.v_column(a), block.w_column(_shift(a, i)))
                         for a in _sample_alphas(gamma, n, column_sample))
            for v_col, w_col in pairs:
                worst = max(worst, _relative_difference(effective * v_col, w_col, precoders.mode.is_exact))
                checked += 1
        out[ell] = ContainmentResult(residual=worst, terms=len(terms), columns_checked=checked, bookkeeping=mode)
    return out


def _shift(alpha, i):
    beta = list(alpha)
    beta[i] += 1
    return tuple(beta)


def _shifted_index(j: int, gamma: int, n: int, i: int) -> int:
    return exponent_index(_shift(_alpha_of(j, gamma, n - 1), i), n)


def _alpha_of(j: int, gamma: int, bound: int) -> tuple[int, ...]:
    base = bound + 1
    digits = [0] * gamma
    for k in range(gamma - 1, -1, -1):
        j, digits[k] = divmod(j, base)
    return tuple(digits)


def _relative_difference(a: np.ndarray, b: np.ndarray, is_exact: bool) -> float:
    if is_exact:
        if all(x == y for x, y in zip(a, b)):
            return 0.0
        a = a.astype(float)
        b = b.astype(float)
    denom = np.linalg.norm(b)
    diff = np.linalg.norm(a - b)
    return float(diff / denom) if denom else float(diff)


# --------------------------------------------------------------------------
# rank
# --------------------------------------------------------------------------
def rank_check_float(matrix: np.ndarray, tol: float = DEFAULT_SVD_TOL) -> tuple[int, float]:
    """Numerical rank (singular values above ``tol * sigma_max``) and ``sigma_min / sigma_max``."""
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    a = np.asarray(matrix)
    if a.dtype == object:
        a = a.astype(float)
    if a.size == 0:
        return 0, 0.0
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    smax = s[0] if s.size else 0.0
    if smax == 0:
        return 0, 0.0
    return int(np.sum(s > tol * smax)), float(s[-1] / smax)


def rank_check_exact(matrix, max_columns: int | None = exact.DEFAULT_EXACT_MAX_COLUMNS) -> RankVerdict:
    """Exact full-column-rank verdict by fraction-free elimination."""
    a = np.asarray(matrix, dtype=object)
    if a.ndim != 2:
        raise DimensionError("expected a matrix")
    rows, cols = a.shape
    rank = exact.exact_rank(a, max_columns=max_columns)
    return RankVerdict.FULL_RANK if rank == min(rows, cols) else RankVerdict.DEFICIENT


# --------------------------------------------------------------------------
# exponent signatures
# --------------------------------------------------------------------------
def column_signatures(ell: int, precoders: PrecoderSet, limit: int = ENUMERATION_LIMIT) -> list[mono.Monomial]:
    """Closed form of every column of the receiver matrix, in column order."""
    block = precoders.block_of(ell)
    t1 = precoders.topology.first_tx(ell)
    dest = None if precoders.scheme is Scheme.SINGLE_V else ell
    gain = mono.H(ell, t1) * precoders.precoder_monomial(dest, t1)
    blocks = interference_blocks(precoders)
    total = block.v_columns + sum(b.w_columns for b in blocks)
    if total > limit:
        raise SizeOverflow(f"{total} signatures exceed the limit of {limit}")
    sigs = [gain * block.column_monomial(_alpha_of(j, block.gamma, precoders.n - 1))
            for j in range(block.v_columns)]
    for b in blocks:
        sigs.extend(b.column_monomial(_alpha_of(j, b.gamma, precoders.n)) for j in range(b.w_columns))
    return sigs


def useful_channel_degree(sig: mono.Monomial, topology: Topology) -> int:
    """Sum of exponents of in-cluster channel gains ``H[l, q]`` with ``q`` in group ``l``."""
    return sig.degree(lambda s: s[0] == "H" and s[2] in topology.group(s[1]))


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------
@dataclass
class ReceiverAlignment:
    ell: int
    T: int
    useful_columns: int
    interference_columns: int
    containment_residual: float
    rank_float: int
    sigma_ratio: float
    rank_exact: RankVerdict
    dof_fraction: Fraction

    @property
    def full_rank_float(self) -> bool:
        return self.rank_float == self.useful_columns + self.interference_columns


@dataclass
class AlignmentReport:
    receivers: list[ReceiverAlignment]
    dof: DofSummary
    conditioning_events: list[str] = field(default_factory=list)

    @property
    def sum_dof_fraction(self) -> Fraction:
        return sum((r.dof_fraction for r in self.receivers), Fraction(0))

    @property
    def asymptotic_limit(self) -> Fraction:
        return self.dof.sum_limit

    @property
    def ok(self) -> bool:
        for r in self.receivers:
            if r.rank_exact is RankVerdict.DEFICIENT:
                return False
            if r.rank_exact is RankVerdict.NOT_RUN and not r.full_rank_float:
                return False
        return True

    def rows(self) -> Iterable[tuple]:
        for r in self.receivers:
            yield (r.ell, r.T, r.useful_columns, r.interference_columns, repr(r.containment_residual),
                   r.rank_float, repr(r.sigma_ratio), r.rank_exact.value, str(r.dof_fraction))


REPORT_HEADER = ("ell", "T", "useful_cols", "interf_cols", "containment_residual", "rank_float",
                 "sigma_ratio", "rank_exact", "dof_fraction")


def verify_alignment(precoders: PrecoderSet, svd_tol: float = DEFAULT_SVD_TOL, run_exact: bool | None = None,
                     exact_max_columns: int | None = exact.DEFAULT_EXACT_MAX_COLUMNS) -> AlignmentReport:
    """Containment, float rank and (in exact mode) exact rank for every receiver."""
    topo = precoders.topology
    run_exact = precoders.mode.is_exact if run_exact is None else run_exact
    dof = dof_accounting(topo, precoders.n, precoders.scheme)
    containment = check_containment(precoders)
    report = AlignmentReport(receivers=[], dof=dof)
    for ell in topo.clusters:
        lam = assemble_lambda(ell, precoders)
        rank, ratio = rank_check_float(lam, svd_tol)
        verdict = rank_check_exact(lam, exact_max_columns) if run_exact else RankVerdict.NOT_RUN
        useful = precoders.streams(ell)
        rec = ReceiverAlignment(
            ell=ell, T=precoders.T, useful_columns=useful, interference_columns=lam.shape[1] - useful,
            containment_residual=containment[ell].residual, rank_float=rank, sigma_ratio=ratio,
            rank_exact=verdict, dof_fraction=dof.fractions[ell],
        )
        if verdict is RankVerdict.FULL_RANK and not rec.full_rank_float:
            msg = f"receiver {ell}: exact FullRank but float rank {rank} (sigma ratio {ratio:.3e})"
            log.warning(msg)
            report.conditioning_events.append(msg)
        report.receivers.append(rec)
    return report
