import json
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcm.errors import InvalidConfig, InvalidSelection, ModeError
from mcm.schedule import (
    MCMConfig,
    MCMSchedule,
    admissible_cr,
    build_schedule,
    closed_form_S,
    degree_bound_report,
    delta_step_bound_holds,
    direct_S,
    lambda_profile,
    min_moving_terms,
    negativity_report,
    parameter_count,
    product_decompose,
    replay_delta,
    twist_degree,
    twist_value,
    validate_full,
    validate_structure,
    variants,
    very_ample_kappa,
)


def replay(cfg: MCMConfig, mode: str):
    """Equality form of the exponent recursions, written out independently."""
    lo = cfg.c + cfg.r + 1
    d0 = 2 if mode == "paper9" else max(cfg.epsilons)
    delta = {lo: d0}
    mu = {}
    for l in range(lo, cfg.N + 1):
        heart = (l if mode == "paper9" else l - cfg.c - cfg.r) * cfg.heart
        row = []
        for k in range(l + 1):
            row.append(l * sum(row) + (l - k) * delta[l] + l * (d0 + 1) + 1 + heart)
        mu[l] = row
        delta[l + 1] = l * row[-1]
    return mu, (cfg.N + 1) * mu[cfg.N][-1]


def small_configs(Nmax=6):
    return [(N, c, r) for N in range(2, Nmax + 1) for c, r in admissible_cr(N)]


def test_paper9_example():
    s = build_schedule(MCMConfig(3, 2, 0, 1, (2, 2)), "paper9")
    assert s.delta[3] == 2
    assert s.mu[3] == (19, 74, 294, 1174)
    assert s.d == 4696


def test_tight_example():
    s = build_schedule(MCMConfig(3, 2, 0, 1, (2, 2)), "tight")
    assert s.mu[3][0] == 3 * 2 + 3 * 3 + 1 + 1 == 17


def test_tight_unit_epsilon_values():
    s = build_schedule(MCMConfig(3, 2, 0), "tight")
    assert s.mu[3] == (11, 43, 171, 683)
    assert s.d == 2732
    assert build_schedule(MCMConfig(2, 1, 0), "tight").d == 204
    assert build_schedule(MCMConfig(4, 2, 0), "tight").d == 24048655


@pytest.mark.parametrize("N,c,r", small_configs())
@pytest.mark.parametrize("mode", ["tight", "paper9"])
def test_schedule_matches_replay_and_validators(N, c, r, mode):
    eps = tuple(1 + (i % 2) for i in range(c + r))
    cfg = MCMConfig(N, c, r, 2, eps)
    s = build_schedule(cfg, mode)
    mu, d = replay(cfg, mode)
    assert {l: list(v) for l, v in s.mu.items()} == mu
    assert s.d == d
    assert validate_structure(s) == []
    if mode == "tight":
        assert validate_full(s) == []


@pytest.mark.parametrize("N,c,r", small_configs())
def test_growth_and_separation(N, c, r):
    s = build_schedule(MCMConfig(N, c, r), "tight")
    for l in s.levels:
        assert all(a < b for a, b in zip(s.mu[l], s.mu[l][1:]))
        assert min(s.mu[l]) >= 2
    for l1, l2 in zip(s.levels, s.levels[1:]):
        assert max(s.mu[l1]) < min(s.mu[l2])
    assert (N + 1) * s.mu[N][N] <= s.d


@pytest.mark.parametrize("N,c,r", [(3, 2, 0), (4, 2, 0), (5, 3, 0), (5, 2, 1)])
def test_mock_passes_structure_only(N, c, r):
    s = build_schedule(MCMConfig(N, c, r), "mock")
    assert validate_structure(s) == []
    assert validate_full(s) != []
    assert s.d < 100


@pytest.mark.parametrize("bad", [(2, 0, 1), (3, 1, 0), (3, 3, 0), (1, 1, 0)])
def test_invalid_configs(bad):
    with pytest.raises(InvalidConfig):
        MCMConfig(*bad)


def test_paper9_rejects_large_epsilon():
    with pytest.raises(InvalidConfig):
        build_schedule(MCMConfig(3, 2, 0, 1, (3, 1)), "paper9")


def test_epsilon_count_and_positivity():
    with pytest.raises(InvalidConfig):
        MCMConfig(3, 2, 0, 1, (1,))
    with pytest.raises(InvalidConfig):
        MCMConfig(3, 2, 0, 1, (0, 1))


def test_json_roundtrip_keeps_big_integers_as_strings():
    s = build_schedule(MCMConfig(6, 3, 0), "paper9")
    obj = json.loads(s.to_json())
    assert isinstance(obj["d"], str) and int(obj["d"]) == s.d
    assert MCMSchedule.from_dict(obj) == s
    assert MCMSchedule.from_dict(obj).to_json() == s.to_json()


def test_closed_form_examples():
    s = build_schedule(MCMConfig(3, 2, 0, 1, (2, 2)), "paper9")
    assert closed_form_S(s, 3, 0) == 19
    assert direct_S(s, 3, 1) == 93
    assert closed_form_S(s, 3, 1) == 93
    with pytest.raises(ModeError):
        closed_form_S(build_schedule(MCMConfig(3, 2, 0), "tight"), 3, 0)
    with pytest.raises(InvalidSelection):
        closed_form_S(s, 3, 4)


@pytest.mark.parametrize("N", range(3, 14))
def test_closed_form_all_indices(N):
    for c, r in admissible_cr(N):
        s = build_schedule(MCMConfig(N, c, r), "paper9")
        for l in s.levels:
            for k in range(l + 1):
                assert closed_form_S(s, l, k) == direct_S(s, l, k)


def test_delta_replay_agrees():
    for N in range(3, 10):
        for c, r in admissible_cr(N):
            cfg = MCMConfig(N, c, r)
            s = build_schedule(cfg, "paper9")
            rep = replay_delta(cfg)
            assert all(rep[l] == s.delta[l] for l in rep)


def test_delta_step_example_is_computed():
    s = build_schedule(MCMConfig(3, 2, 0, 1, (2, 2)), "paper9")
    # 3 * 1174 = 3522 against 9 * 4^3 * 2 = 1152
    assert s.delta[4] == 3522
    assert delta_step_bound_holds(s.delta[3], s.delta[4], 3) is False


def test_degree_report_flags_small_N():
    rep = degree_bound_report(3, 8)
    by_N = {row["N"]: row for row in rep["rows"]}
    assert by_N[3]["N_pow_N2"] == str(3**9) == "19683"
    assert int(by_N[3]["top"]) == min(
        (N := 3) and (N + 1) * build_schedule(MCMConfig(3, c, r), "paper9").mu[3][3]
        for c, r in admissible_cr(3))
    assert rep["stated_range_failures"] == [3, 4]
    assert rep["threshold"] == 5
    for row in rep["rows"]:
        for pc in row["per_cr"]:
            assert pc["replay_agrees"]
            assert all(st["holds"] for st in pc["delta_steps"] if st["in_stated_range"])


def test_degree_report_range():
    with pytest.raises(InvalidConfig):
        degree_bound_report(2, 4)


def test_product_decompose_examples():
    assert product_decompose(1, 2) == (1, 0)
    assert product_decompose(3, 13) == (2, 1)
    assert product_decompose(3, 11) is None


def test_product_decompose_exhaustive():
    for d in range(1, 51):
        reachable = {p * (d + 1) + q * (d + 2) for p in range(60) for q in range(60)}
        for d0 in range(0, d * d + d + 1001):
            got = product_decompose(d, d0)
            if d0 >= d * d + d:
                assert got is not None
            if got is None:
                assert d0 not in reachable
            else:
                p, q = got
                assert p >= 0 and q >= 0 and p * (d + 1) + q * (d + 2) == d0


def test_kappa_examples():
    assert very_ample_kappa([5], [5]) == 1600
    assert very_ample_kappa([4], [4, 7]) == 3600
    with pytest.raises(InvalidConfig):
        very_ample_kappa([], [1])
    with pytest.raises(InvalidConfig):
        very_ample_kappa([2], [3, 2])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 50), min_size=1, max_size=5), st.integers(1, 6), st.integers(1, 5))
def test_kappa_scales_quadratically(degs, c, t):
    c = min(c, len(degs))
    assert very_ample_kappa([t * x for x in degs[:c]], [t * x for x in degs]) == \
        t * t * very_ample_kappa(degs[:c], degs)


def test_min_moving_terms():
    assert min_moving_terms(10, 5, 0) == 9
    assert min_moving_terms(10, 7, 0) == 0
    assert min_moving_terms(10, 5, 0, eta=3) == 3
    # the count is zero once 3N - 2(2c+r) - 2 - 2eta <= 0
    assert min_moving_terms(10, 5, 0, eta=4) == 0
    with pytest.raises(InvalidConfig):
        min_moving_terms(10, 5, 0, eta=5)


def test_parameter_count():
    assert parameter_count(MCMConfig(2, 1, 0)) == 18
    base = parameter_count(MCMConfig(4, 2, 0, 1, (1, 1)))
    assert parameter_count(MCMConfig(4, 2, 0, 1, (2, 1))) > base


def test_twist_value_fermat_examples():
    assert twist_value([2], [2], [2, 2, 2]) == 1
    d = 10
    assert twist_value([d + 1], [d + 1], [d] * 3) == -5 == -d + 2 * 1 + 2 + 1


def test_lambda_profile_shapes(tight320):
    s = tight320
    d, dL, m = s.d, s.delta[3], s.mu[3]
    assert lambda_profile(s, ("first", 1)) == [d - dL, m[0], d - dL, d - dL]
    assert lambda_profile(s, ("second", 1, 3)) == [d - 3 * m[0], d - 3 * m[1], d - dL, m[2]]
    with pytest.raises(InvalidSelection):
        lambda_profile(s, ("second", 2, 2))


def test_twist_degree_checks_selection(tight320):
    with pytest.raises(InvalidSelection):
        twist_degree(tight320, (3,), ("first", 0))
    with pytest.raises(InvalidSelection):
        twist_degree(tight320, (1,), ("first", 0), vanishing=(2, 1))


@pytest.mark.parametrize("N,c,r", small_configs(6))
@pytest.mark.parametrize("mode", ["tight", "paper9"])
def test_negativity_everywhere(N, c, r, mode):
    s = build_schedule(MCMConfig(N, c, r, 2), mode)
    rep = negativity_report(s)
    assert rep["failures"] == 0 and rep["all_negative"]
    n = N - c - r
    expected = sum(
        len(list(combinations(range(N + 1), eta))) * len(list(variants(N - eta))) *
        len(list(combinations(range(c), n - eta)))
        for eta in range(n))
    assert rep["checked"] == expected
