"""
Overlapping multi-cluster network combinatorics.

Clusters are laid out on a line. Cluster ``l`` owns ``r`` transmitters and
shares ``overlaps[l-1]`` of them with cluster ``l+1``. All indices exposed by
this module are 1-based (clusters ``1..K``, transmitters ``1..M``).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConstraintViolation, DimensionError


class Scheme(enum.Enum):
    """Precoding scheme family."""

    SINGLE_V = "single_v"
    TWO_V = "two_v"


@dataclass(frozen=True)
class Topology:
    """Immutable description of a line of ``K`` overlapping clusters.

    Use :func:`build_topology` to construct a validated instance.
    """

    K: int
    r: int
    overlaps: tuple[int, ...]
    cum_overlaps: tuple[int, ...] = field(repr=False)
    M: int = field(repr=False)
    groups: tuple[tuple[int, ...], ...] = field(repr=False)

    def group(self, ell: int) -> tuple[int, ...]:
        """Ordered transmitter set of cluster ``ell`` (1-based)."""
        return self.groups[ell - 1]

    def first_tx(self, ell: int) -> int:
        return self.groups[ell - 1][0]

    def overlap_before(self, ell: int) -> int:
        """Number of transmitters cluster ``ell`` shares with ``ell - 1``."""
        return 0 if ell == 1 else self.overlaps[ell - 2]

    def overlap_after(self, ell: int) -> int:
        return 0 if ell == self.K else self.overlaps[ell - 1]

    def clusters_of(self, q: int) -> tuple[int, ...]:
        """Clusters whose group contains transmitter ``q`` (at most two)."""
        return tuple(ell for ell in range(1, self.K + 1) if q in self.groups[ell - 1])

    @property
    def clusters(self) -> range:
        return range(1, self.K + 1)

    @property
    def transmitters(self) -> range:
        return range(1, self.M + 1)


def build_topology(K: int, r: int, overlaps: Sequence[int]) -> Topology:
    """Build and validate a cluster line.

    Parameters
    ----------
    K : int
        Number of clusters.
    r : int
        Transmitters per cluster.
    overlaps : sequence of int
        ``K - 1`` entries; entry ``l`` (0-based) is the number of transmitters
        shared by clusters ``l + 1`` and ``l + 2``.

    Raises
    ------
    DimensionError
        ``overlaps`` does not have ``K - 1`` entries.
    ConstraintViolation
        An overlap is negative or larger than ``r``, or a cluster would share
        more than ``r`` transmitters with its two neighbours combined.
    """
    K, r = int(K), int(r)
    if K < 1 or r < 1:
        raise ConstraintViolation(f"K and r must be positive, got K={K}, r={r}")
    overlaps = tuple(int(o) for o in overlaps)
    if len(overlaps) != K - 1:
        raise DimensionError(f"overlaps must have K-1={K - 1} entries, got {len(overlaps)}")
    for i, o in enumerate(overlaps):
        if not 0 <= o <= r:
            raise ConstraintViolation(f"overlap between clusters {i + 1} and {i + 2} is {o}, must lie in [0, {r}]")
    padded = (0,) + overlaps + (0,)
    for ell in range(1, K + 1):
        before, after = padded[ell - 1], padded[ell]
        if before + after > r:
            raise ConstraintViolation(
                f"cluster {ell} shares {before} + {after} > r={r} transmitters with its neighbours"
            )

    cum = []
    total = 0
    for ell in range(1, K + 1):
        total += padded[ell - 1]
        cum.append(total)
    M = K * r - cum[-1]
    groups = tuple(
        tuple(range((ell - 1) * r + 1 - cum[ell - 1], ell * r - cum[ell - 1] + 1)) for ell in range(1, K + 1)
    )
    return Topology(K=K, r=r, overlaps=overlaps, cum_overlaps=tuple(cum), M=M, groups=groups)


def gamma_single(topology: Topology) -> int:
    """Generator count ``K (M - r)`` of the single-V scheme."""
    return topology.K * (topology.M - topology.r)


def interference_pairs(topology: Topology) -> list[tuple[int, int]]:
    """All ``(receiver, tx)`` pairs where the tx is outside the receiver's group."""
    return [
        (ell, q)
        for ell in topology.clusters
        for q in topology.transmitters
        if q not in topology.groups[ell - 1]
    ]


def interference_triples(topology: Topology) -> list[tuple[int, int, int]]:
    """Cross-cluster terms ``(receiver a, tx k, destination b)`` with ``a != b``.

    Every transmission of tx ``k`` intended for cluster ``b`` reaches every
    other receiver ``a`` as interference, including the receiver of a
    neighbouring cluster that also owns ``k``. Ordered by ``(a, k, b)``.
    """
    triples = [
        (a, k, b)
        for b in topology.clusters
        for k in topology.groups[b - 1]
        for a in topology.clusters
        if a != b
    ]
    return sorted(triples)


def scheme_selector(topology: Topology) -> Scheme:
    """Single-V when no two adjacent clusters share more than one tx."""
    if all(o <= 1 for o in topology.overlaps):
        return Scheme.SINGLE_V
    return Scheme.TWO_V


def parity(ell: int) -> int:
    """IA block used by cluster ``ell`` in the two-V scheme: 1 for odd, 2 for even."""
    return 1 if ell % 2 == 1 else 2


def gamma_two(topology: Topology) -> dict[int, int]:
    """Generator counts ``{1: gamma_1, 2: gamma_2}`` of the two-V scheme."""
    counts = {1: 0, 2: 0}
    for _, _, b in interference_triples(topology):
        counts[parity(b)] += 1
    return counts
