import numpy as np
import pytest

from mcm.baselocus import (
    MAX_RETRIES,
    characterization_check,
    collapsed_matrix,
    duplicate_row_rank,
    forms_vanish_at,
    full_rank_H_check,
    generic_at,
    low_rank_member,
    merge_full_rank,
)
from mcm.codim import membership, spec_M
from mcm.errors import InvalidJet, SamplingFailed
from mcm.ffield import rank_mod
from mcm.symforms import JetPoint, pointed_sampler

Q = 10007


def test_collapsed_matrix_shape_and_column_sums(tight320):
    cfg = tight320.config
    smp = next(pointed_sampler(tight320, Q, seed=4, count=1))
    M = collapsed_matrix(smp.system, smp.jet)
    assert len(M) == 2 * cfg.c + cfg.r
    assert all(len(row) == 2 * (cfg.N + 1) for row in M)
    assert all(sum(row) % Q == 0 for row in M)


def test_invalid_jet_rejected(tight320):
    smp = next(pointed_sampler(tight320, Q, seed=4, count=1))
    bad = JetPoint(smp.jet.z, smp.jet.z, Q)
    with pytest.raises(InvalidJet):
        collapsed_matrix(smp.system, bad)
    off = JetPoint(tuple((v + 1) % Q for v in smp.jet.z), smp.jet.xi, Q)
    with pytest.raises(InvalidJet):
        forms_vanish_at(smp.system, off)


def test_low_rank_member_is_member():
    rng = np.random.default_rng(0)
    for width in (3, 4, 5):
        T = low_rank_member(rng, 4, width, width - 2, Q)
        assert rank_mod(T, Q) <= width - 2
        assert membership(T, spec_M(width - 1, 4), Q)


def test_characterization_small(tight320):
    rep = characterization_check(tight320, Q, samples=6, seed=2)
    assert rep.samples == 6 and rep.failures == 0
    assert rep.engineered == 3
    assert rep.vanish_and_member >= 3
    assert rep.to_dict()["verdict"] == "pass"


def test_degenerate_draws_logged_and_replaced(tight320):
    rep = characterization_check(tight320, Q, samples=6, seed=2, degenerate={1, 4})
    assert rep.filtered_out == 2
    assert [e["stream_index"] for e in rep.filtered_log] == [1 * (MAX_RETRIES + 1), 4 * (MAX_RETRIES + 1)]
    assert rep.failures == 0


def test_split_ranges_merge_to_whole(tight320):
    whole = characterization_check(tight320, Q, samples=6, seed=9).to_dict()
    a = characterization_check(tight320, Q, samples=3, seed=9)
    b = characterization_check(tight320, Q, samples=3, seed=9, start=3)
    assert a.merge(b).to_dict() == whole


def test_vset_arity_checked(mock420):
    with pytest.raises(SamplingFailed):
        characterization_check(mock420, Q, samples=1, seed=0, eta=1, vsets=[(0, 1)])


def test_full_rank_small_and_merge(tight320):
    whole = full_rank_H_check(tight320, Q, samples=8, seed=5)
    assert whole["column_sum_failures"] == 0
    assert whole["fraction_full_rank"]["all"] >= 0.99
    parts = [full_rank_H_check(tight320, Q, samples=4, seed=5, start=s) for s in (0, 4)]
    assert merge_full_rank(parts) == whole


def test_duplicate_row_drops_rank(tight320):
    cfg = tight320.config
    for seed in range(3):
        assert duplicate_row_rank(tight320, Q, seed) <= cfg.e - 1


def test_generic_at_detects_low_rank(tight320):
    cfg = tight320.config
    rng = np.random.default_rng(3)
    T = low_rank_member(rng, 2 * cfg.c + cfg.r, cfg.N + 1, cfg.e - 1, Q)
    assert not generic_at(T, cfg.e, Q)
