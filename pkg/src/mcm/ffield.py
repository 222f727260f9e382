"""Linear algebra over prime fields F_q, scalar and batched.

Scalar routines work on lists of Python ints and are used by the form and
base-locus checks.  Batched routines work on int64 numpy arrays of shape
(batch, rows, cols) and power the point-counting oracle; they assume
q < 2**31 so that every product fits in int64.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from sympy import isprime

from .errors import InvalidConfig


def check_prime(q: int) -> int:
    if not isinstance(q, int) or q < 2 or q > 2**31 or not isprime(q):
        raise InvalidConfig(f"q={q!r} is not a prime <= 2^31")
    return q


# ---------------------------------------------------------------- scalar


def rank_mod(rows: list[list[int]], q: int) -> int:
    """Rank of a matrix (list of rows) over F_q."""
    m = [[x % q for x in row] for row in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = pow(m[rank][col], -1, q)
        prow = [x * inv % q for x in m[rank]]
        m[rank] = prow
        for i in range(len(m)):
            if i != rank and m[i][col]:
                f = m[i][col]
                m[i] = [(a - f * b) % q for a, b in zip(m[i], prow)]
        rank += 1
        if rank == len(m):
            break
    return rank


def det_mod(rows: list[list[int]], q: int) -> int:
    """Determinant of a square matrix over F_q."""
    n = len(rows)
    m = [[x % q for x in row] for row in rows]
    if any(len(row) != n for row in m):
        raise ValueError("square matrix required")
    det = 1
    for col in range(n):
        piv = next((i for i in range(col, n) if m[i][col]), None)
        if piv is None:
            return 0
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        pv = m[col][col]
        det = det * pv % q
        inv = pow(pv, -1, q)
        for i in range(col + 1, n):
            if m[i][col]:
                f = m[i][col] * inv % q
                m[i] = [(a - f * b) % q for a, b in zip(m[i], m[col])]
    return det % q


def solve_affine(rows: list[list[int]], rhs: list[int], q: int, base: list[int]) -> list[int] | None:
    """Return x with rows @ x = rhs, obtained by correcting ``base`` on pivot columns.

    If ``base`` is uniform on F_q^n, the result is uniform on the affine
    solution space.  Returns None when the system is inconsistent.
    """
    n = len(base)
    m = len(rows)
    resid = [(rhs[i] - sum(a * b for a, b in zip(rows[i], base))) % q for i in range(m)]
    aug = [[x % q for x in rows[i]] + [resid[i]] for i in range(m)]
    pivots: list[int] = []
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, m) if aug[i][col]), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        inv = pow(aug[r][col], -1, q)
        aug[r] = [x * inv % q for x in aug[r]]
        for i in range(m):
            if i != r and aug[i][col]:
                f = aug[i][col]
                aug[i] = [(a - f * b) % q for a, b in zip(aug[i], aug[r])]
        pivots.append(col)
        r += 1
        if r == m:
            break
    if any(aug[i][n] for i in range(r, m)):
        return None
    x = list(base)
    for i, col in enumerate(pivots):
        x[col] = (x[col] + aug[i][n]) % q
    return x


# ---------------------------------------------------------------- batched


@lru_cache(maxsize=64)
def inverse_table(q: int) -> np.ndarray:
    table = np.zeros(q, dtype=np.int64)
    for a in range(1, q):
        table[a] = pow(a, -1, q)
    return table


def batch_rank(mats: np.ndarray, q: int) -> np.ndarray:
    """Ranks of a stack of matrices over F_q; input shape (B, m, n)."""
    a = np.array(mats, dtype=np.int64) % q
    bsz, m, n = a.shape
    rank = np.zeros(bsz, dtype=np.int64)
    if bsz == 0 or m == 0 or n == 0:
        return rank
    inv = inverse_table(q)
    rows = np.arange(m)
    for col in range(n):
        cand = (a[:, :, col] != 0) & (rows[None, :] >= rank[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        idx = np.nonzero(has)[0]
        piv = cand[idx].argmax(axis=1)
        r = rank[idx]
        sub = a[idx]
        prow = sub[np.arange(idx.size), piv].copy()
        sub[np.arange(idx.size), piv] = sub[np.arange(idx.size), r]
        prow = prow * inv[prow[:, col]][:, None] % q
        sub[np.arange(idx.size), r] = prow
        factors = sub[:, :, col].copy()
        factors[np.arange(idx.size), r] = 0
        sub = (sub - factors[:, :, None] * prow[:, None, :]) % q
        a[idx] = sub
        rank[idx] += 1
    return rank


def batch_det(mats: np.ndarray, q: int) -> np.ndarray:
    """Determinants mod q of a stack of square matrices; closed form up to 3x3."""
    a = np.asarray(mats, dtype=np.int64) % q
    n = a.shape[1]
    if n == 1:
        return a[:, 0, 0] % q
    if n == 2:
        return (a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]) % q
    if n == 3:
        m1 = (a[:, 1, 1] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 1]) % q
        m2 = (a[:, 1, 0] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 0]) % q
        m3 = (a[:, 1, 0] * a[:, 2, 1] - a[:, 1, 1] * a[:, 2, 0]) % q
        return (a[:, 0, 0] * m1 - a[:, 0, 1] * m2 + a[:, 0, 2] * m3) % q
    # rank deficiency is all callers need beyond 3x3
    full = batch_rank(a, q) == n
    return full.astype(np.int64)


def batch_rank_at_most(mats: np.ndarray, bound: int, q: int) -> np.ndarray:
    """Boolean mask: rank of each matrix is <= bound."""
    mats = np.asarray(mats, dtype=np.int64)
    _, m, n = mats.shape
    if bound >= min(m, n):
        return np.ones(mats.shape[0], dtype=bool)
    if bound < 0:
        return np.zeros(mats.shape[0], dtype=bool)
    if m == n and bound == n - 1 and n <= 3:
        return batch_det(mats, q) == 0
    if bound == 0:
        return ~(mats % q).any(axis=(1, 2))
    return batch_rank(mats, q) <= bound


def count_full_rank(rows: int, k: int, q: int) -> int:
    """Number of rows x k matrices over F_q of rank k."""
    out = 1
    for i in range(k):
        out *= q**rows - q**i
    return out


def count_rank_exact(m: int, n: int, k: int, q: int) -> int:
    """Number of m x n matrices over F_q of rank exactly k."""
    if k > min(m, n):
        return 0
    num = 1
    for i in range(k):
        num *= (q**m - q**i) * (q**n - q**i)
    den = 1
    for i in range(k):
        den *= q**k - q**i
    return num // den


def rref_subspaces(dim: int, max_rank: int, q: int):
    """Yield (k, basis) for every subspace of F_q^dim of dimension k <= max_rank.

    ``basis`` is the reduced row echelon k x dim matrix as a list of rows.
    """
    from itertools import combinations, product

    for k in range(0, min(dim, max_rank) + 1):
        for pivots in combinations(range(dim), k):
            free = [
                (i, c)
                for i, p in enumerate(pivots)
                for c in range(p + 1, dim)
                if c not in pivots
            ]
            for vals in product(range(q), repeat=len(free)):
                basis = [[0] * dim for _ in range(k)]
                for i, p in enumerate(pivots):
                    basis[i][p] = 1
                for (i, c), v in zip(free, vals):
                    basis[i][c] = v
                yield k, basis
