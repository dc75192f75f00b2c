"""
Symbolic products of diagonal matrices.

Every diagonal matrix built by the precoders is a product of integer powers
of independent random diagonals: channel gains ``("H", l, q)``, freely drawn
chain seeds ``("C", l, q)`` and basis vectors ``("Xi", p)``. A
:class:`Monomial` records those exponents so that closed forms, containment
and column distinctness can be checked by bookkeeping instead of by floating
comparison.
"""
from __future__ import annotations

from typing import Callable, Hashable, Iterator, Mapping

import numpy as np

Symbol = tuple


def H(ell: int, q: int) -> "Monomial":
    return Monomial({("H", ell, q): 1})


def seed_symbol(ell: int, q: int) -> Symbol:
    return ("C", ell, q)


def xi_symbol(p: int) -> Symbol:
    return ("Xi", p)


class Monomial(Mapping):
    """Immutable map ``symbol -> non-zero integer exponent``."""

    __slots__ = ("_items", "_hash")

    def __init__(self, exponents: Mapping[Hashable, int] | None = None):
        items = {}
        for sym, e in (exponents or {}).items():
            e = int(e)
            if e:
                items[sym] = e
        self._items = tuple(sorted(items.items()))
        self._hash = hash(self._items)

    def __getitem__(self, sym):
        for s, e in self._items:
            if s == sym:
                return e
        raise KeyError(sym)

    def get(self, sym, default=0):
        try:
            return self[sym]
        except KeyError:
            return default

    def __iter__(self) -> Iterator:
        return (s for s, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, Monomial):
            return self._items == other._items
        return NotImplemented

    def __mul__(self, other: "Monomial") -> "Monomial":
        acc = dict(self._items)
        for s, e in other._items:
            acc[s] = acc.get(s, 0) + e
        return Monomial(acc)

    def __truediv__(self, other: "Monomial") -> "Monomial":
        return self * other ** -1

    def __pow__(self, k: int) -> "Monomial":
        return Monomial({s: e * k for s, e in self._items})

    def __repr__(self) -> str:
        if not self._items:
            return "Monomial(1)"
        parts = []
        for s, e in self._items:
            name = s[0] + "".join(f"[{x}]" for x in s[1:])
            parts.append(name if e == 1 else f"{name}^{e}")
        return "Monomial(" + " * ".join(parts) + ")"

    def degree(self, select: Callable[[Symbol], bool] | None = None) -> int:
        """Sum of exponents over symbols accepted by ``select``."""
        return sum(e for s, e in self._items if select is None or select(s))

    def evaluate(self, lookup: Callable[[Symbol], np.ndarray], like: np.ndarray) -> np.ndarray:
        """Entry-wise value of the product; ``like`` fixes length and dtype of 1."""
        out = np.ones_like(like)
        for s, e in self._items:
            out = out * lookup(s) ** e
        return out


ONE = Monomial()


def product(factors) -> Monomial:
    out = ONE
    for f in factors:
        out = out * f
    return out
