import json
from itertools import combinations

import pytest

from mcm.errors import CharacteristicTooSmall, InvalidConfig, InvalidSelection, ModeError
from mcm.hypersurfaces import (
    HypersurfaceSystem,
    all_rewrites,
    collapse,
    corrupt,
    improved_terms,
    improved_well_formed,
    residues_in_ideal,
    rewrite,
    rewrite_first_kind,
    rewrite_second_kind,
    row_layouts,
    sample_system,
    vanish_decompose,
    verify_rewrite,
)
from mcm.polyring import PolyRing, Ring, euler_residual
from mcm.schedule import MCMConfig, build_schedule

SUITE = [(2, 1, 0, "tight"), (3, 2, 0, "tight"), (3, 1, 1, "tight"), (4, 2, 0, "mock"),
         (5, 3, 0, "mock"), (5, 2, 1, "mock")]


def field_for(s):
    return Ring.prime_field(10007 if s.d < 10007 else 2**31 - 1)


def build(N, c, r, mode):
    return build_schedule(MCMConfig(N, c, r), mode)


def every_vanishing_set(s):
    cfg = s.config
    return [v for eta in range(cfg.n) for v in combinations(range(cfg.N + 1), eta)]


def test_sampling_is_deterministic(tight320):
    a = sample_system(tight320, Ring.prime_field(10007), seed=5)
    b = sample_system(tight320, Ring.prime_field(10007), seed=5)
    c = sample_system(tight320, Ring.prime_field(10007), seed=6)
    assert a.F == b.F and a.to_json() == b.to_json()
    assert a.F != c.F


@pytest.mark.parametrize("N,c,r,mode", SUITE)
def test_invariants_hold(N, c, r, mode):
    s = build(N, c, r, mode)
    system = sample_system(s, field_for(s), seed=2)
    assert system.check_invariants() == []
    for i, F in enumerate(system.F):
        assert F.is_homogeneous(s.d + s.config.epsilons[i])
        assert euler_residual(F).is_zero()


def test_rationals_sampling(tight320):
    system = sample_system(tight320, Ring.rationals(), seed=1)
    assert system.check_invariants() == []


def test_zero_moving_is_fermat(tight320):
    s = tight320
    system = sample_system(s, Ring.prime_field(10007), seed=1, zero_moving=True)
    full = sample_system(s, Ring.prime_field(10007), seed=1)
    N = s.config.N
    for i in range(s.config.e):
        assert system.A[i] == full.A[i]
        expect = sum((system.A[i][j].mul_z_power(j, s.d) for j in range(N + 1)), system.ring.zero())
        assert system.F[i] == expect
    col = collapse(system)
    for i in range(s.config.e):
        for j in range(N + 1):
            assert col.blocks["C"][(i, j)] == system.A[i][j].mul_z_power(j, s.delta[N])
    rw = rewrite_first_kind(system, 1)
    for i in range(s.config.e):
        C = col.blocks["C"][(i, 1)]
        assert rw.blocks["T"][(i, 1)] == C.mul_z_power(1, s.d - s.delta[N] - s.mu[N][0])
    for rw in all_rewrites(system):
        assert verify_rewrite(system, rw).ok


def test_small_characteristic(tight320):
    with pytest.raises(CharacteristicTooSmall):
        sample_system(tight320, Ring.prime_field(101))
    with pytest.warns(UserWarning):
        sample_system(tight320, Ring.prime_field(101), allow_small_q=True)


def test_ring_arity_checked(tight320):
    with pytest.raises(InvalidConfig):
        sample_system(tight320, PolyRing(Ring.prime_field(10007), 3))


@pytest.mark.parametrize("N,c,r,mode", SUITE)
def test_every_rewrite_reassembles(N, c, r, mode):
    s = build(N, c, r, mode)
    for seed in range(3):
        system = sample_system(s, field_for(s), seed=seed)
        for vset in every_vanishing_set(s):
            for rw in all_rewrites(system, vset):
                chk = verify_rewrite(system, rw)
                assert chk.ok, (rw.tag(), chk.residuals)
                assert residues_in_ideal(system, rw)


def test_collapse_blocks_homogeneous(tight320):
    s = tight320
    system = sample_system(s, Ring.prime_field(10007), seed=3)
    col = collapse(system)
    for (i, j), C in col.blocks["C"].items():
        assert C.is_homogeneous(s.config.epsilons[i] + s.delta[s.config.N])


def test_second_kind_boundary(tight320):
    system = sample_system(tight320, Ring.prime_field(10007), seed=3)
    N = tight320.config.N
    rw = rewrite_second_kind(system, N - 1, N)
    assert set(k[1] for k in rw.blocks["P"]) == {N}
    assert verify_rewrite(system, rw).ok


def test_vanish_decompose_residues(mock420):
    system = sample_system(mock420, Ring.prime_field(10007), seed=4)
    rw = vanish_decompose(system, (2,), ("second", 0, 2))
    assert rw.columns == (0, 1, 3, 4)
    assert all(lab.startswith("R") for row in rw.extra for lab, _, _ in row)
    assert residues_in_ideal(system, rw)
    assert verify_rewrite(system, rw).ok


def test_bad_selections(tight320, mock420):
    system = sample_system(tight320, Ring.prime_field(10007), seed=3)
    with pytest.raises(InvalidSelection):
        rewrite(system, ("first", 4))
    with pytest.raises(InvalidSelection):
        rewrite(system, ("second", 2, 2))
    with pytest.raises(InvalidSelection):
        rewrite(system, ("third", 0))
    with pytest.raises(InvalidSelection):
        rewrite(system, ("first", 0), vanishing=(1,))  # n = 1 leaves no room for eta = 1
    wide = sample_system(mock420, Ring.prime_field(10007), seed=3)
    with pytest.raises(InvalidSelection):
        rewrite(wide, ("first", 0), vanishing=(2, 1))


def test_corruption_detected(tight320):
    system = sample_system(tight320, Ring.prime_field(10007), seed=3)
    bad = corrupt(system, 1, 2, 5)
    chk = verify_rewrite(bad, collapse(system))
    assert not chk.ok
    assert chk.residuals[0] == "0" and chk.residuals[1] != "0"


def test_json_roundtrip_is_byte_identical(mock420):
    system = sample_system(mock420, Ring.prime_field(10007), seed=9)
    text = system.to_json()
    back = HypersurfaceSystem.from_dict(json.loads(text))
    assert back.to_json() == text
    assert back.F == system.F
    manifest = json.loads(text)["manifest"]
    assert manifest["rows"] == 2 and manifest["columns"] == 5


def test_layout_sizes(tight320):
    lays = row_layouts(tight320)
    # 4 dominant blocks + 4 top-level moving terms, each with 4 linear monomials
    assert [lay.size for lay in lays] == [32, 32]


@pytest.mark.parametrize("N,c,r", [(4, 2, 0), (5, 2, 1), (6, 3, 0)])
def test_improved_shapes(N, c, r):
    s = build(N, c, r, "mock" if N > 4 else "tight")
    assert improved_well_formed(s) == []
    for S, k, exps in improved_terms(s):
        assert sum(exps) == s.d
        assert all(exps[m] >= 2 for m in S)
    system = sample_system(s, field_for(s), seed=1, improved=True)
    assert system.check_invariants() == []
    with pytest.raises(ModeError):
        collapse(system)


def test_improved_needs_positive_count(tight320):
    with pytest.raises(InvalidConfig):
        improved_terms(tight320)
