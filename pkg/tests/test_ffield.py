import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import GF
from sympy.polys.matrices import DomainMatrix

from mcm.errors import InvalidConfig
from mcm.ffield import (
    batch_det,
    batch_rank,
    batch_rank_at_most,
    check_prime,
    count_full_rank,
    count_rank_exact,
    det_mod,
    rank_mod,
    rref_subspaces,
    solve_affine,
)

PRIMES = [2, 3, 5, 7, 101]


def oracle(rows, q):
    K = GF(q)
    M = DomainMatrix([[K(x) for x in row] for row in rows], (len(rows), len(rows[0])), K)
    return M


def matrices(q, max_rows=5, max_cols=6, square=False):
    def build(shape):
        r, c = shape
        return st.lists(st.lists(st.integers(0, q - 1), min_size=c, max_size=c), min_size=r, max_size=r)
    if square:
        return st.integers(1, max_rows).flatmap(lambda n: build((n, n)))
    return st.tuples(st.integers(1, max_rows), st.integers(1, max_cols)).flatmap(build)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_rank_matches_sympy(data):
    q = data.draw(st.sampled_from(PRIMES))
    m = data.draw(matrices(q))
    assert rank_mod(m, q) == oracle(m, q).rank()


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_det_matches_sympy(data):
    q = data.draw(st.sampled_from(PRIMES))
    m = data.draw(matrices(q, square=True))
    assert det_mod(m, q) == int(oracle(m, q).det()) % q


def test_batch_agrees_with_scalar():
    rng = np.random.default_rng(0)
    for q in (2, 5, 101):
        mats = rng.integers(0, q, size=(300, 3, 4))
        mats[::7, 2] = mats[::7, 0]
        ranks = batch_rank(mats, q)
        assert ranks.tolist() == [rank_mod(m.tolist(), q) for m in mats]
        assert batch_rank_at_most(mats, 2, q).tolist() == [r <= 2 for r in ranks]
        sq = rng.integers(0, q, size=(200, 3, 3))
        assert batch_det(sq, q).tolist() == [det_mod(m.tolist(), q) for m in sq]


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_solve_affine(data):
    q = 101
    n = data.draw(st.integers(1, 6))
    rows = data.draw(st.lists(st.lists(st.integers(0, q - 1), min_size=n, max_size=n), min_size=1, max_size=4))
    x0 = data.draw(st.lists(st.integers(0, q - 1), min_size=n, max_size=n))
    rhs = [sum(a * b for a, b in zip(r, x0)) % q for r in rows]
    base = data.draw(st.lists(st.integers(0, q - 1), min_size=n, max_size=n))
    x = solve_affine(rows, rhs, q, base)
    assert [sum(a * b for a, b in zip(r, x)) % q for r in rows] == rhs


def test_solve_affine_inconsistent():
    assert solve_affine([[1, 1], [2, 2]], [1, 3], 7, [0, 0]) is None


def test_rank_counts_partition_space():
    for q in (2, 3):
        for m, n in ((2, 3), (3, 3)):
            assert sum(count_rank_exact(m, n, k, q) for k in range(min(m, n) + 1)) == q ** (m * n)
    assert count_full_rank(2, 2, 2) == 6


def test_subspace_enumeration_counts():
    # Gaussian binomials [3 choose k]_2 = 1, 7, 7, 1
    counts = {}
    for k, _ in rref_subspaces(3, 3, 2):
        counts[k] = counts.get(k, 0) + 1
    assert counts == {0: 1, 1: 7, 2: 7, 3: 1}


@pytest.mark.parametrize("q", [1, 4, 2**31 + 11, "7"])
def test_check_prime_rejects(q):
    with pytest.raises(InvalidConfig):
        check_prime(q)
