"""
Exact rational linear algebra.

Rows are first cleared of denominators (each row multiplied by the lcm of
its denominators, which changes neither rank nor solution set), then reduced
with Bareiss' fraction-free elimination: every intermediate value is an
integer and the division by the previous pivot is always exact, which keeps
coefficient growth linear in the step count. Pivots are chosen as the entry
with the largest bit length in the pivot column so the run is deterministic.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np

try:  # GMP integers are much faster for the multi-thousand-bit entries we produce.
    from gmpy2 import mpz as _int
except ImportError:  # pragma: no cover
    _int = int

from .errors import DimensionError, RankDeficient, SizeOverflow

DEFAULT_EXACT_MAX_COLUMNS = 256


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (complex, np.complexfloating)):
        if x.imag != 0:
            raise TypeError("exact routines accept real rationals only")
        x = x.real
    return Fraction(x)


def integer_rows(matrix) -> list[list]:
    """Scale each row of a rational matrix by the lcm of its denominators."""
    rows = []
    for row in matrix:
        fr = [as_fraction(x) for x in row]
        lcm = 1
        for f in fr:
            lcm = lcm * f.denominator // math.gcd(lcm, f.denominator)
        rows.append([_int(f.numerator * (lcm // f.denominator)) for f in fr])
    return rows


def _bitlen(x) -> int:
    return int(abs(x)).bit_length() if _int is int else x.bit_length()


def bareiss_eliminate(rows: list[list], ncols: int | None = None):
    """Fraction-free forward elimination in place.

    Only the first ``ncols`` columns are used for pivoting (the rest, e.g. a
    right-hand side, are carried along). Returns ``(pivot_columns, rows,
    sign)`` where ``rows`` is reordered so the first ``len(pivot_columns)``
    rows are the pivot rows and ``sign`` tracks row swaps.
    """
    m = len(rows)
    if m == 0:
        return [], rows, 1
    width = len(rows[0])
    ncols = width if ncols is None else ncols
    prev = _int(1)
    r = 0
    sign = 1
    pivots = []
    for c in range(ncols):
        if r == m:
            break
        best, best_bits = -1, -1
        for i in range(r, m):
            v = rows[i][c]
            if v != 0:
                b = _bitlen(v)
                if b > best_bits:
                    best, best_bits = i, b
        if best < 0:
            continue
        if best != r:
            rows[r], rows[best] = rows[best], rows[r]
            sign = -sign
        piv_row = rows[r]
        piv = piv_row[c]
        for i in range(r + 1, m):
            row = rows[i]
            f = row[c]
            if f == 0:
                for j in range(c + 1, width):
                    row[j] = (row[j] * piv) // prev
            else:
                for j in range(c + 1, width):
                    row[j] = (row[j] * piv - f * piv_row[j]) // prev
            row[c] = _int(0)
        prev = piv
        pivots.append(c)
        r += 1
    return pivots, rows, sign


def exact_rank(matrix, max_columns: int | None = DEFAULT_EXACT_MAX_COLUMNS) -> int:
    """Rank of a rational matrix (2-D array or nested sequence)."""
    rows = integer_rows(matrix)
    if not rows:
        return 0
    if max_columns is not None and len(rows[0]) > max_columns:
        raise SizeOverflow(f"{len(rows[0])} columns exceed the exact-mode cap of {max_columns}")
    pivots, _, _ = bareiss_eliminate(rows)
    return len(pivots)


def exact_det(matrix) -> Fraction:
    """Determinant of a square rational matrix."""
    fr = [[as_fraction(x) for x in row] for row in matrix]
    n = len(fr)
    if any(len(row) != n for row in fr):
        raise DimensionError("determinant needs a square matrix")
    if n == 0:
        return Fraction(1)
    scale = Fraction(1)
    rows = []
    for row in fr:
        lcm = 1
        for f in row:
            lcm = lcm * f.denominator // math.gcd(lcm, f.denominator)
        scale /= lcm
        rows.append([_int(f.numerator * (lcm // f.denominator)) for f in row])
    pivots, rows, sign = bareiss_eliminate(rows)
    if len(pivots) < n:
        return Fraction(0)
    return Fraction(sign * int(rows[n - 1][n - 1])) * scale


def solve_exact(matrix, rhs) -> np.ndarray:
    """Unique solution of a consistent full-column-rank rational system.

    ``rhs`` may be a vector or a ``rows x k`` array. Raises
    :class:`RankDeficient` when the columns are dependent and ``ValueError``
    when the system is inconsistent.
    """
    A = [[as_fraction(x) for x in row] for row in matrix]
    B = np.asarray(rhs, dtype=object)
    vector = B.ndim == 1
    if vector:
        B = B[:, None]
    m = len(A)
    if B.shape[0] != m:
        raise DimensionError("right-hand side length differs from row count")
    n = len(A[0]) if m else 0
    k = B.shape[1]
    aug = [list(A[i]) + [as_fraction(x) for x in B[i]] for i in range(m)]
    rows = integer_rows(aug)
    pivots, rows, _ = bareiss_eliminate(rows, ncols=n)
    if len(pivots) < n:
        raise RankDeficient(f"matrix has rank {len(pivots)} < {n} columns")
    for i in range(n, m):
        if any(v != 0 for v in rows[i][n:]):
            raise ValueError("inconsistent system")
    # back substitution on the upper-triangular integer system
    x = [[Fraction(0)] * k for _ in range(n)]
    for i in range(n - 1, -1, -1):
        row = rows[i]
        piv = int(row[i])
        for col in range(k):
            acc = Fraction(int(row[n + col]))
            for j in range(i + 1, n):
                if row[j] != 0:
                    acc -= int(row[j]) * x[j][col]
            x[i][col] = acc / piv
    out = np.empty((n, k), dtype=object)
    for i in range(n):
        for col in range(k):
            out[i, col] = x[i][col]
    return out[:, 0] if vector else out


# --------------------------------------------------------------------------
# multi-modular solver
# --------------------------------------------------------------------------
def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17):  # deterministic below 3.4e14
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _prime_stream(start: int = 2 ** 31):
    n = start - 1
    while True:
        if _is_prime(n):
            yield n
        n -= 2 if n % 2 else 1


def _solve_mod(rows: list[list], ncols: int, p: int):
    """Solve the integer system modulo ``p``; ``None`` if singular or inconsistent mod p."""
    a = np.array([[int(v % p) for v in row] for row in rows], dtype=np.int64)
    m = a.shape[0]
    r = 0
    for c in range(ncols):
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            return None
        i = r + int(nz[0])
        if i != r:
            a[[r, i]] = a[[i, r]]
        inv = pow(int(a[r, c]), -1, p)
        a[r] = (a[r] * inv) % p
        f = a[:, c].copy()
        f[r] = 0
        a = (a - (f[:, None] * a[r][None, :]) % p) % p
        r += 1
    if np.any(a[ncols:, ncols:]):
        return None
    return [[int(v) for v in a[i, ncols:]] for i in range(ncols)]


def _rational_reconstruct(u: int, m: int) -> Fraction | None:
    """Smallest ``a/b == u (mod m)`` with ``|a|, b <= sqrt(m/2)``."""
    bound = math.isqrt(m // 2)
    r0, r1 = m, u % m
    t0, t1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        t0, t1 = t1, t0 - q * t1
    if t1 == 0 or abs(t1) > bound or math.gcd(r1, abs(t1)) != 1:
        return None
    return Fraction(r1, t1)


def solve_modular(matrix, rhs, max_primes: int = 64) -> np.ndarray:
    """Exact solution of a consistent full-column-rank system by CRT lifting.

    The system is solved modulo a growing set of 31-bit primes; once every
    component has a rational reconstruction, ``A z == b`` is checked in exact
    integer arithmetic before returning. If no verified solution appears
    within ``max_primes`` primes, falls back to :func:`solve_exact`.
    """
    A = [[as_fraction(x) for x in row] for row in matrix]
    B = np.asarray(rhs, dtype=object)
    vector = B.ndim == 1
    if vector:
        B = B[:, None]
    m = len(A)
    if B.shape[0] != m:
        raise DimensionError("right-hand side length differs from row count")
    n = len(A[0]) if m else 0
    k = B.shape[1]
    rows = [[int(v) for v in row] for row in integer_rows([list(A[i]) + list(B[i]) for i in range(m)])]

    residues = None
    modulus = 1
    tried = 0
    for p in _prime_stream():
        if tried >= max_primes:
            break
        tried += 1
        sol = _solve_mod(rows, n, p)
        if sol is None:
            continue
        if residues is None:
            residues = sol
        else:
            inv = pow(modulus, -1, p)
            residues = [[r + modulus * (((s - r) * inv) % p) for r, s in zip(rr, ss)]
                        for rr, ss in zip(residues, sol)]
        modulus *= p
        cand = [[_rational_reconstruct(v, modulus) for v in row] for row in residues]
        if any(c is None for row in cand for c in row):
            continue
        if _verify(rows, n, cand):
            out = np.empty((n, k), dtype=object)
            for i in range(n):
                for j in range(k):
                    out[i, j] = cand[i][j]
            return out[:, 0] if vector else out
    return solve_exact(matrix, rhs)


def _verify(rows, n, cand) -> bool:
    k = len(cand[0]) if cand else 0
    for j in range(k):
        den = 1
        for i in range(n):
            d = cand[i][j].denominator
            den = den * d // math.gcd(den, d)
        z = [int(cand[i][j] * den) for i in range(n)]
        for row in rows:
            if sum(a * b for a, b in zip(row[:n], z)) != row[n + j] * den:
                return False
    return True
