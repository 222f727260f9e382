"""Point-counting oracle for the determinantal rank-condition varieties.

Every family is a set of matrices over F_q cut out by conditions of two
kinds: a linear combination of columns must vanish, or the span of some
linear combinations of columns must have rank at most a bound.  Each
combination is stored as a coefficient matrix ``comb`` (cols x k), so the
condition reads ``rank(X @ comb) <= bound``.

All families are invariant under left multiplication by GL(rows).  Exact
counts exploit this: the matrices whose first block of columns has a given
row space W form one orbit class of size ``#{rows x dim W of full rank}``,
and it suffices to enumerate the remaining columns against one
representative of each W.  Monte-Carlo estimates are stratified the same
way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import BudgetExceeded, InvalidSelection, PivotRejected, ShapeError
from .ffield import (
    batch_rank_at_most,
    check_prime,
    count_full_rank,
    rank_mod,
    rref_subspaces,
)

DEFAULT_BUDGET = 2**30
SLOPE_BAND = 0.35
MIN_MC_HITS = 400
Z99 = 2.5758293035489004  # two-sided 99% normal quantile

FAMILIES = ("X", "X0", "Xpq", "M", "Mk", "Mminus", "JS")


@dataclass(frozen=True)
class Condition:
    kind: str  # "rank" or "zero"
    comb: tuple  # cols x k nested tuple (rank) or length-cols tuple (zero)
    bound: int = 0

    def matrix(self) -> np.ndarray:
        return np.array(self.comb, dtype=np.int64)


@dataclass(frozen=True)
class RankVarietySpec:
    """A rank-condition variety family with fixed numeric parameters."""

    family: str
    params: tuple
    rows: int
    cols: int
    conditions: tuple
    expected_codim: int
    expected_kind: str  # "equality" or "bound"
    strat: tuple = ()
    free: tuple = ()
    derived: tuple = ()  # ((col, coefficient tuple over all cols), ...)
    strat_max_rank: int | None = None
    fixed: tuple = ()  # ((row, col, value), ...) entries pinned for every q
    label: str = ""

    @property
    def ambient(self) -> int:
        return self.rows * self.cols - len(self.fixed)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": list(self.params), "label": self.label}


# ---------------------------------------------------------------- builders


def _unit(n: int, i: int) -> list[int]:
    v = [0] * n
    v[i] = 1
    return v


def _as_tuple(m) -> tuple:
    return tuple(tuple(int(x) for x in row) for row in m)


def _combo_nu(na: int, nb: int, nu: int, offset_b: int, cols: int) -> tuple:
    """alpha columns with alpha_nu replaced by alpha_nu + sum of all betas."""
    comb = np.zeros((cols, na), dtype=np.int64)
    for i in range(na):
        comb[i, i] = 1
    for b in range(nb):
        comb[offset_b + b, nu] = 1
    return _as_tuple(comb)


def _combo_tau_rho(na: int, nb: int, tau: int, rho: int, offset_b: int, cols: int) -> tuple:
    """alpha_j + beta_j for j <= tau (0-based j < tau_count), alpha_rho + trailing betas.

    ``tau`` counts how many leading columns absorb their beta; ``rho`` is
    the 0-based alpha column receiving beta_tau + ... + beta_{nb-1}.
    """
    comb = np.zeros((cols, na), dtype=np.int64)
    for i in range(na):
        comb[i, i] = 1
    for j in range(tau):
        comb[offset_b + j, j] = 1
    for b in range(tau, nb):
        comb[offset_b + b, rho] = 1
    return _as_tuple(comb)


def _sum_zero(cols: int) -> Condition:
    return Condition("zero", tuple([1] * cols))


def _x_conditions(p: int, m: int, ell: int, bound_ii: int, bound_iii: int) -> list[Condition]:
    cols = 2 * m
    conds = [Condition("rank", _as_tuple(np.eye(cols, m, dtype=np.int64)), ell)]
    for nu in range(m):
        conds.append(Condition("rank", _combo_nu(m, m, nu, m, cols), bound_ii))
    for tau in range(1, m):
        for rho in range(tau, m):
            conds.append(Condition("rank", _combo_tau_rho(m, m, tau, rho, m, cols), bound_iii))
    return conds


def spec_X(p: int, ell: int) -> RankVarietySpec:
    if p < 2 or not 0 <= ell <= p:
        raise InvalidSelection(f"X needs p >= 2 and 0 <= l <= p, got p={p}, l={ell}")
    expected = p if ell == p else ell + (p - ell) ** 2 + 1
    return RankVarietySpec(
        "X", (p, ell), p, 2 * p, tuple(_x_conditions(p, p, ell, p - 1, p - 1)),
        expected, "equality" if ell == p else "bound",
        strat=tuple(range(p)), free=tuple(range(p, 2 * p)), strat_max_rank=ell,
        label=f"X(p={p},l={ell})",
    )


def spec_X0(p: int, ell: int) -> RankVarietySpec:
    if p < 2 or not 0 <= ell <= p:
        raise InvalidSelection(f"X0 needs p >= 2 and 0 <= l <= p, got p={p}, l={ell}")
    cols = 2 * p
    conds = _x_conditions(p, p, ell, p - 1, p - 1)
    lin = [0] * cols
    lin[0] = lin[p] = 1
    conds.append(Condition("zero", tuple(lin)))
    expected = p + 2 if ell >= p - 1 else p + (p - ell) ** 2
    coef = [0] * cols
    coef[0] = -1
    return RankVarietySpec(
        "X0", (p, ell), p, cols, tuple(conds), expected, "equality",
        strat=tuple(range(p)), free=tuple(range(p + 1, cols)),
        derived=((p, tuple(coef)),), strat_max_rank=ell,
        label=f"X0(p={p},l={ell})",
    )


def spec_Xpq(p: int, m: int, ell: int) -> RankVarietySpec:
    if not (p >= m >= 2 and 0 <= ell <= m):
        raise InvalidSelection(f"Xpq needs p >= q >= 2 and 0 <= l <= q, got {p},{m},{ell}")
    expected = p if ell == m else (p - ell) * (m - ell) + p - m + ell + 1
    return RankVarietySpec(
        "Xpq", (p, m, ell), p, 2 * m, tuple(_x_conditions(p, m, ell, m - 1, m - 1)),
        expected, "equality" if ell == m else "bound",
        strat=tuple(range(m)), free=tuple(range(m, 2 * m)), strat_max_rank=ell,
        label=f"X(p={p},q={m},l={ell})",
    )


def _m_conditions(n_top: int, k: int, cols: int) -> list[Condition]:
    """Conditions (ii)-(iii) of the M families: alphas 0..n_top, betas 0..k."""
    na, nb = n_top + 1, k + 1
    conds = [_sum_zero(cols)]
    for nu in range(nb):
        conds.append(Condition("rank", _combo_nu(na, nb, nu, na, cols), n_top - 1))
    for tau in range(0, k):
        for rho in range(tau + 1, k + 1):
            conds.append(
                Condition("rank", _combo_tau_rho(na, nb, tau + 1, rho, na, cols), n_top - 1)
            )
    return conds


def _derived_last(cols: int, last: int) -> tuple:
    coef = [-1] * cols
    coef[last] = 0
    return ((last, tuple(coef)),)


def spec_M(N: int, R: int) -> RankVarietySpec:
    if N < 2 or R < N:
        raise InvalidSelection(f"M needs N >= 2 and 2c+r >= N, got N={N}, 2c+r={R}")
    cols = 2 * (N + 1)
    return RankVarietySpec(
        "M", (N, R), R, cols, tuple(_m_conditions(N, N, cols)), R + N + 1, "bound",
        strat=tuple(range(N + 1)), free=tuple(range(N + 1, cols - 1)),
        derived=_derived_last(cols, cols - 1), label=f"M(N={N},2c+r={R})",
    )


def spec_Mk(N: int, k: int, R: int) -> RankVarietySpec:
    if N < 2 or R < N or not 1 <= k <= N - 1:
        raise InvalidSelection(f"Mk needs 1 <= k <= N-1 and 2c+r >= N, got {N},{k},{R}")
    cols = N + 1 + k + 1
    return RankVarietySpec(
        "Mk", (N, k, R), R, cols, tuple(_m_conditions(N, k, cols)), 2 * R - N + k + 1, "bound",
        strat=tuple(range(N + 1)), free=tuple(range(N + 1, cols - 1)),
        derived=_derived_last(cols, cols - 1), label=f"M(N={N},k={k},2c+r={R})",
    )


def spec_Mminus(N: int, R: int) -> RankVarietySpec:
    if N < 2 or R < N:
        raise InvalidSelection(f"Mminus needs N >= 2 and 2c+r >= N, got N={N}, 2c+r={R}")
    cols = N + 1
    conds = [_sum_zero(cols)]
    for nu in range(cols):
        comb = np.zeros((cols, N), dtype=np.int64)
        for out, c in enumerate(c for c in range(cols) if c != nu):
            comb[c, out] = 1
        conds.append(Condition("rank", _as_tuple(comb), N - 1))
    return RankVarietySpec(
        "Mminus", (N, R), R, cols, tuple(conds), 2 * R - N + 1, "equality",
        strat=tuple(range(N)), free=(), derived=_derived_last(cols, N),
        label=f"Mminus(N={N},2c+r={R})",
    )


def default_J(p: int, ell: int) -> tuple:
    return _as_tuple([[1 if (i == j and i < ell) else 0 for j in range(p - 1)] for i in range(p - 1)])


def spec_JS(p: int, ell: int, j: int, J=None) -> RankVarietySpec:
    if p < 3 or not 0 <= ell <= p - 1 or j not in (ell, ell + 1):
        raise InvalidSelection(f"JS needs p >= 3, 0 <= l <= p-1, j in (l, l+1); got {p},{ell},{j}")
    J = default_J(p, ell) if J is None else _as_tuple(J)
    if len(J) != p - 1 or any(len(r) != p - 1 for r in J):
        raise ShapeError("J must be (p-1) x (p-1)")
    fixed = tuple((1 + a, 1 + b, J[a][b]) for a in range(p - 1) for b in range(p - 1))
    comb = _as_tuple(np.eye(p, dtype=np.int64))
    expected = 2 * (p - 1 - ell) + 1 if j == ell else p - 1 - ell
    return RankVarietySpec(
        "JS", (p, ell, j, J), p, p, (Condition("rank", comb, j),), expected, "equality",
        fixed=fixed, label=f"JS(p={p},l={ell},j={j})",
    )


def make_spec(family: str, **kw) -> RankVarietySpec:
    builders = {
        "X": lambda: spec_X(kw["p"], kw["l"]),
        "X0": lambda: spec_X0(kw["p"], kw["l"]),
        "Xpq": lambda: spec_Xpq(kw["p"], kw["cols"], kw["l"]),
        "M": lambda: spec_M(kw["N"], kw["R"]),
        "Mk": lambda: spec_Mk(kw["N"], kw["k"], kw["R"]),
        "Mminus": lambda: spec_Mminus(kw["N"], kw["R"]),
        "JS": lambda: spec_JS(kw["p"], kw["l"], kw["j"], kw.get("J")),
    }
    if family not in builders:
        raise InvalidSelection(f"unknown family {family!r}; expected one of {FAMILIES}")
    try:
        return builders[family]()
    except KeyError as exc:
        raise InvalidSelection(f"family {family} missing parameter {exc}") from None


# ---------------------------------------------------------------- membership


def _check_shape(matrix, spec: RankVarietySpec) -> list[list[int]]:
    rows = [list(r) for r in matrix]
    if len(rows) != spec.rows or any(len(r) != spec.cols for r in rows):
        raise ShapeError(f"{spec.label} expects {spec.rows}x{spec.cols} matrices")
    return rows


def membership(matrix, spec: RankVarietySpec, q: int) -> bool:
    """Exact membership test by Gaussian elimination over F_q."""
    rows = _check_shape(matrix, spec)
    for (r, c, v) in spec.fixed:
        if (rows[r][c] - v) % q:
            return False
    for cond in spec.conditions:
        comb = cond.comb
        if cond.kind == "zero":
            for row in rows:
                if sum(a * w for a, w in zip(row, comb)) % q:
                    return False
        else:
            prod = [
                [sum(row[c] * comb[c][t] for c in range(spec.cols)) % q for t in range(len(comb[0]))]
                for row in rows
            ]
            if rank_mod(prod, q) > cond.bound:
                return False
    return True


def batch_membership(mats: np.ndarray, spec: RankVarietySpec, q: int,
                     skip_rank_on: frozenset = frozenset()) -> np.ndarray:
    """Membership mask for a stack of matrices of shape (B, rows, cols).

    Rank conditions whose combination only touches columns in
    ``skip_rank_on`` are not evaluated (the caller has settled them).
    """
    mats = np.asarray(mats, dtype=np.int64)
    ok = np.ones(mats.shape[0], dtype=bool)
    for (r, c, v) in spec.fixed:
        ok &= (mats[:, r, c] - v) % q == 0
    for cond in spec.conditions:
        comb = cond.matrix()
        if cond.kind == "zero":
            ok &= ~((mats @ comb) % q).any(axis=1)
            continue
        used = frozenset(np.nonzero(comb.any(axis=1))[0].tolist())
        if used <= skip_rank_on:
            continue
        sel = np.nonzero(ok)[0]
        if sel.size == 0:
            break
        prod = (mats[sel] @ comb) % q
        ok[sel] &= batch_rank_at_most(prod, cond.bound, q)
    return ok


# ---------------------------------------------------------------- counting


def _digits(start: int, count: int, ndigits: int, q: int) -> np.ndarray:
    idx = np.arange(start, start + count, dtype=np.int64)
    out = np.empty((count, ndigits), dtype=np.int64)
    for d in range(ndigits):
        out[:, d] = idx % q
        idx //= q
    return out


def _strata(spec: RankVarietySpec, q: int):
    s = len(spec.strat)
    max_rank = min(spec.rows, s if spec.strat_max_rank is None else spec.strat_max_rank)
    for k, basis in rref_subspaces(s, max_rank, q):
        rep = np.zeros((spec.rows, s), dtype=np.int64)
        for i, row in enumerate(basis):
            rep[i, :] = row
        yield k, count_full_rank(spec.rows, k, q), rep


def _fill(spec: RankVarietySpec, base: np.ndarray, free_vals: np.ndarray, q: int) -> np.ndarray:
    """Assemble full matrices from a fixed strat block and free-column values."""
    bsz = free_vals.shape[0]
    mats = np.zeros((bsz, spec.rows, spec.cols), dtype=np.int64)
    mats[:, :, list(spec.strat)] = base[None, :, :]
    if spec.free:
        mats[:, :, list(spec.free)] = free_vals.reshape(bsz, len(spec.free), spec.rows).transpose(0, 2, 1)
    for col, coef in spec.derived:
        c = np.array(coef, dtype=np.int64)
        mats[:, :, col] = (mats @ c) % q
    return mats


def enumeration_work(spec: RankVarietySpec, q: int) -> int:
    """Number of matrices the exact counter will evaluate."""
    if spec.strat:
        n_strata = sum(1 for _ in rref_subspaces(len(spec.strat),
                                                 min(spec.rows, len(spec.strat) if spec.strat_max_rank is None
                                                     else spec.strat_max_rank), q))
        return n_strata * q ** (spec.rows * len(spec.free))
    return q ** spec.ambient


def count_points(spec: RankVarietySpec, q: int, budget: int = DEFAULT_BUDGET,
                 chunk: int = 1 << 18) -> int:
    """Exact number of F_q-points of the variety."""
    check_prime(q)
    work = enumeration_work(spec, q)
    if work > budget:
        raise BudgetExceeded(f"{spec.label} over F_{q} needs {work} evaluations > budget {budget}")
    if not spec.strat:
        return _count_plain(spec, q, chunk)
    total = 0
    nfree = spec.rows * len(spec.free)
    skip = frozenset(spec.strat)
    for _, orbit, rep in _strata(spec, q):
        n = q**nfree
        hits = 0
        for start in range(0, n, chunk):
            cnt = min(chunk, n - start)
            vals = _digits(start, cnt, nfree, q)
            mats = _fill(spec, rep, vals, q)
            hits += int(batch_membership(mats, spec, q, skip_rank_on=skip).sum())
        total += orbit * hits
    return total


def _free_positions(spec: RankVarietySpec) -> list[tuple[int, int]]:
    fixed = {(r, c) for r, c, _ in spec.fixed}
    return [(r, c) for r in range(spec.rows) for c in range(spec.cols) if (r, c) not in fixed]


def _plain_mats(spec: RankVarietySpec, vals: np.ndarray, q: int) -> np.ndarray:
    bsz = vals.shape[0]
    mats = np.zeros((bsz, spec.rows, spec.cols), dtype=np.int64)
    for (r, c, v) in spec.fixed:
        mats[:, r, c] = v % q
    pos = _free_positions(spec)
    rr = [p[0] for p in pos]
    cc = [p[1] for p in pos]
    mats[:, rr, cc] = vals
    return mats


def _count_plain(spec: RankVarietySpec, q: int, chunk: int) -> int:
    nfree = spec.ambient
    n = q**nfree
    hits = 0
    for start in range(0, n, chunk):
        cnt = min(chunk, n - start)
        mats = _plain_mats(spec, _digits(start, cnt, nfree, q), q)
        hits += int(batch_membership(mats, spec, q).sum())
    return hits


def count_points_plain(spec: RankVarietySpec, q: int, budget: int = DEFAULT_BUDGET) -> int:
    """Exact count by enumerating every matrix, without orbit reduction."""
    check_prime(q)
    if q**spec.ambient > budget:
        raise BudgetExceeded(f"{spec.label}: q^E = {q**spec.ambient} > budget {budget}")
    return _count_plain(spec, q, 1 << 18)


# ---------------------------------------------------------------- Monte-Carlo


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def monte_carlo_count(spec: RankVarietySpec, q: int, samples: int, seed: int,
                      chunk: int = 1 << 18, min_per_stratum: int = 2000) -> dict:
    """Stratified Monte-Carlo estimate of the point count with a 99% CI.

    The sample budget is split across row-space strata proportionally to
    stratum size, with a floor per stratum.  Chunk seeds are derived from
    (seed, q, stratum, chunk), so results do not depend on scheduling.
    """
    check_prime(q)
    nfree = spec.rows * len(spec.free) if spec.strat else spec.ambient
    space = q**nfree
    strata = list(_strata(spec, q)) if spec.strat else [(None, 1, None)]
    weights = [orbit for _, orbit, _ in strata]
    wsum = sum(weights)
    estimate = 0.0
    var = 0.0
    hits_total = 0
    drawn = 0
    skip = frozenset(spec.strat)
    for si, (_, orbit, rep) in enumerate(strata):
        n_s = max(min_per_stratum, int(round(samples * orbit / wsum)))
        hits = 0
        for ci, start in enumerate(range(0, n_s, chunk)):
            cnt = min(chunk, n_s - start)
            vals = _rng(seed, q, si, ci).integers(0, q, size=(cnt, nfree), dtype=np.int64)
            if spec.strat:
                mats = _fill(spec, rep, vals, q)
                hits += int(batch_membership(mats, spec, q, skip_rank_on=skip).sum())
            else:
                mats = _plain_mats(spec, vals, q)
                hits += int(batch_membership(mats, spec, q).sum())
        phat = hits / n_s
        w = orbit * space
        estimate += w * phat
        var += w * w * phat * (1 - phat) / n_s
        hits_total += hits
        drawn += n_s
    half = Z99 * math.sqrt(var)
    return {
        "estimate": estimate,
        "ci99": [max(0.0, estimate - half), estimate + half],
        "samples": drawn,
        "hits": hits_total,
        "strata": len(strata),
    }


# ---------------------------------------------------------------- estimates


@dataclass
class CodimEstimate:
    spec: RankVarietySpec
    counts: dict = field(default_factory=dict)
    fitted_dim: float | None = None
    fitted_codim: float | None = None
    verdict: str = "inconclusive"
    method: str = "exhaustive"
    notes: list = field(default_factory=list)

    @property
    def expected(self) -> int:
        return self.spec.expected_codim

    @property
    def bound_satisfied(self) -> bool | None:
        if self.fitted_codim is None or self.verdict == "inconclusive":
            return None
        return round(self.fitted_codim) >= self.expected

    @property
    def equality(self) -> bool | None:
        if self.fitted_codim is None or self.verdict == "inconclusive":
            return None
        return round(self.fitted_codim) == self.expected

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "ambient": self.spec.ambient,
            "counts": {str(q): v for q, v in sorted(self.counts.items())},
            "fitted_dim": None if self.fitted_dim is None else round(self.fitted_dim, 6),
            "fitted_codim": None if self.fitted_codim is None else round(self.fitted_codim, 6),
            "expected_codim": self.expected,
            "expected_kind": self.spec.expected_kind,
            "bound_satisfied": self.bound_satisfied,
            "equality": self.equality,
            "verdict": self.verdict,
            "method": self.method,
            "rounded_codim": None if self.fitted_codim is None else int(round(self.fitted_codim)),
            "notes": list(self.notes),
        }


def fit_dimension(points: dict[int, float]) -> float | None:
    """Least-squares slope of log(count) against log(q) over positive counts."""
    pts = [(math.log(q), math.log(c)) for q, c in sorted(points.items()) if c > 0]
    if len(pts) < 2:
        return None
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def verdict_for(fitted_codim: float | None, expected: int, band: float = SLOPE_BAND) -> str:
    if fitted_codim is None:
        return "inconclusive"
    nearest = round(fitted_codim)
    if abs(fitted_codim - nearest) > band:
        return "inconclusive"
    if nearest == expected:
        return "match"
    return "excess" if nearest > expected else "deficit"


def estimate_dimension(spec: RankVarietySpec, qs, budget: int = DEFAULT_BUDGET,
                       seed: int = 0, mc_samples: int = 10**7,
                       monte_carlo: tuple = ()) -> CodimEstimate:
    """Fit the dimension of the variety from point counts over several F_q.

    Counts are exact whenever the orbit-reduced enumeration fits in
    ``budget`` and q is not listed in ``monte_carlo``; otherwise they are
    stratified Monte-Carlo estimates with ``mc_samples`` draws.
    """
    qs = sorted(set(int(q) for q in qs))
    if len(qs) < 2:
        raise InvalidSelection("at least two primes are needed to fit a slope")
    est = CodimEstimate(spec)
    used_mc = False
    for q in qs:
        check_prime(q)
        if q not in monte_carlo and enumeration_work(spec, q) <= budget:
            est.counts[q] = {"method": "exhaustive", "count": str(count_points(spec, q, budget))}
        else:
            mc = monte_carlo_count(spec, q, mc_samples, seed)
            est.counts[q] = {"method": "monte_carlo", **mc}
            used_mc = True
    values = {
        q: (float(int(v["count"])) if v["method"] == "exhaustive" else v["estimate"])
        for q, v in est.counts.items()
    }
    est.method = "mixed" if used_mc and any(v["method"] == "exhaustive" for v in est.counts.values()) \
        else ("monte_carlo" if used_mc else "exhaustive")
    dim = fit_dimension(values)
    if dim is not None:
        est.fitted_dim = dim
        est.fitted_codim = spec.ambient - dim
    est.verdict = verdict_for(est.fitted_codim, spec.expected_codim)
    starved = [q for q, v in est.counts.items() if v["method"] == "monte_carlo" and v["hits"] < MIN_MC_HITS]
    if starved:
        est.verdict = "inconclusive"
        est.notes.append(f"fewer than {MIN_MC_HITS} Monte-Carlo hits at q={starved}")
    if est.fitted_codim is not None and abs(est.fitted_codim - round(est.fitted_codim)) > SLOPE_BAND:
        est.notes.append("slope outside the acceptance band")
    return est


# ---------------------------------------------------------------- slices


def slice_codim(p: int, ell: int, j: int, qs, J=None, budget: int = DEFAULT_BUDGET) -> CodimEstimate:
    """Codimension of the rank <= j locus among p x p matrices with a fixed lower-right block J."""
    if J is not None:
        for q in qs:
            if rank_mod([list(r) for r in J], q) != ell:
                raise InvalidSelection(f"J does not have rank {ell} over F_{q}")
    spec = spec_JS(p, ell, j, J)
    return estimate_dimension(spec, qs, budget=budget)


# ---------------------------------------------------------------- Gaussian elimination


def gaussian_stratify(matrix, q: int) -> list[list[int]]:
    """Eliminate below the pivot alpha_11 + beta_11 and drop row 1, columns 1 and p+1."""
    X = [[x % q for x in row] for row in matrix]
    p = len(X)
    if any(len(r) != 2 * p for r in X):
        raise ShapeError("p x 2p matrix required")
    piv = (X[0][0] + X[0][p]) % q
    if piv == 0:
        raise PivotRejected("alpha_11 + beta_11 = 0")
    inv = pow(piv, -1, q)
    GX = [X[0]]
    for i in range(1, p):
        f = (X[i][0] + X[i][p]) * inv % q
        GX.append([(a - f * b) % q for a, b in zip(X[i], X[0])])
    keep = [c for c in range(2 * p) if c not in (0, p)]
    return [[GX[i][c] for c in keep] for i in range(1, p)]


def elimination_pattern(p: int, tau: int, rho: int) -> list[list[int]]:
    """The 2p x p 0/1 matrix turning X_p into its (tau, rho) column collection.

    ``tau = 0`` gives the nu-type pattern with nu = rho; indices are 1-based
    as in the definitions of the families.
    """
    m = [[0] * p for _ in range(2 * p)]
    for i in range(p):
        m[i][i] = 1
    if tau == 0:
        for b in range(p):
            m[p + b][rho - 1] = 1
        return m
    for j in range(tau):
        m[p + j][j] = 1
    for b in range(tau, p):
        m[p + b][rho - 1] = 1
    return m


def check_pattern_reduction(pmax: int = 6) -> list[dict]:
    """Deleting column 1 and rows 1, p+1 of the (tau, rho) pattern gives the (tau-1, rho-1) pattern."""
    out = []
    for p in range(2, pmax + 1):
        for tau in range(1, p):
            for rho in range(tau + 1, p + 1):
                big = elimination_pattern(p, tau, rho)
                cut = [row[1:] for i, row in enumerate(big) if i not in (0, p)]
                small = elimination_pattern(p - 1, tau - 1, rho - 1)
                out.append({"p": p, "tau": tau, "rho": rho, "ok": cut == small})
    return out


def sample_members_X(p: int, ell: int, q: int, count: int, seed: int,
                     require_pivot: bool = True, batch: int = 1 << 16) -> np.ndarray:
    """Uniform random members of X(p, l) over F_q (optionally with nonzero pivot).

    The alpha block is drawn uniformly among matrices of rank <= l by
    drawing a rank class with its exact weight and forming U @ V; the beta
    block is uniform and the draw is kept when every condition holds.
    """
    from .ffield import count_rank_exact

    spec = spec_X(p, ell)
    rng = _rng(seed, q, p, ell)
    weights = np.array([count_rank_exact(p, p, k, q) for k in range(ell + 1)], dtype=float)
    weights /= weights.sum()
    found: list[np.ndarray] = []
    have = 0
    while have < count:
        ks = rng.choice(ell + 1, size=batch, p=weights)
        alpha = np.zeros((batch, p, p), dtype=np.int64)
        for k in range(1, ell + 1):
            sel = np.nonzero(ks == k)[0]
            if sel.size == 0:
                continue
            U = _full_rank(rng, sel.size, p, k, q)
            V = _full_rank(rng, sel.size, p, k, q).transpose(0, 2, 1)
            alpha[sel] = (U @ V) % q
        beta = rng.integers(0, q, size=(batch, p, p), dtype=np.int64)
        mats = np.concatenate([alpha, beta], axis=2)
        ok = batch_membership(mats, spec, q)
        if require_pivot:
            ok &= (mats[:, 0, 0] + mats[:, 0, p]) % q != 0
        found.append(mats[ok])
        have += int(ok.sum())
    return np.concatenate(found)[:count]


def _full_rank(rng: np.random.Generator, n: int, rows: int, k: int, q: int) -> np.ndarray:
    """n uniform rows x k matrices of full column rank k."""
    out = rng.integers(0, q, size=(n, rows, k), dtype=np.int64)
    from .ffield import batch_rank

    bad = np.nonzero(batch_rank(out, q) < k)[0]
    while bad.size:
        out[bad] = rng.integers(0, q, size=(bad.size, rows, k), dtype=np.int64)
        bad = bad[batch_rank(out[bad], q) < k]
    return out


def stratification_containment(p: int, ell: int, q: int, count: int, seed: int) -> dict:
    """Check that eliminated members of X(p, l) land in X(p-1, l)."""
    if not 0 <= ell <= p - 1:
        raise InvalidSelection("containment is stated for 0 <= l <= p-1")
    members = sample_members_X(p, ell, q, count, seed)
    small = spec_X(p - 1, ell)
    reduced = np.array([gaussian_stratify(m.tolist(), q) for m in members], dtype=np.int64)
    ok = batch_membership(reduced, small, q)
    failures = int((~ok).sum())
    witness = None if failures == 0 else members[np.nonzero(~ok)[0][0]].tolist()
    return {"p": p, "l": ell, "q": q, "samples": int(members.shape[0]),
            "failures": failures, "first_witness": witness}


# ---------------------------------------------------------------- equivalences


def predicate_equivalences(p: int, q: int, budget: int = DEFAULT_BUDGET) -> dict:
    """Exhaustively compare raw condition sets with their simplified characterizations.

    * top stratum: X(p,p) minus X(p,p-1) equals {all 2p columns sum to 0, det(alpha) != 0};
    * replacement lemma: for alpha_1..alpha_p, beta in F_q^p, all replacements
      alpha_nu -> alpha_nu + beta keep rank <= p-1 iff rank(alpha, beta) <= p-1
      or (rank(alpha) = p and alpha_1 + ... + alpha_p + beta = 0).
    """
    check_prime(q)
    total = q ** (2 * p * p)
    if total > budget:
        raise BudgetExceeded(f"q^(2p^2) = {total} > budget {budget}")
    top, below = spec_X(p, p), spec_X(p, p - 1)
    n_top = 0
    disc_top = 0
    witness = None
    chunk = 1 << 18
    for start in range(0, total, chunk):
        cnt = min(chunk, total - start)
        vals = _digits(start, cnt, 2 * p * p, q)
        mats = vals.reshape(cnt, p, 2 * p)
        raw = batch_membership(mats, top, q) & ~batch_membership(mats, below, q)
        alpha_full = ~batch_rank_at_most(mats[:, :, :p], p - 1, q)
        sums = ~(mats.sum(axis=2) % q).any(axis=1)
        simple = alpha_full & sums
        bad = raw != simple
        disc_top += int(bad.sum())
        n_top += cnt
        if witness is None and bad.any():
            witness = mats[np.nonzero(bad)[0][0]].tolist()

    nvec = q ** (p * (p + 1))
    vals = _digits(0, nvec, p * (p + 1), q).reshape(nvec, p, p + 1)
    alphas, beta = vals[:, :, :p], vals[:, :, p]
    lhs = np.ones(nvec, dtype=bool)
    for nu in range(p):
        rep = alphas.copy()
        rep[:, :, nu] = (rep[:, :, nu] + beta) % q
        lhs &= batch_rank_at_most(rep, p - 1, q)
    r_all = batch_rank_at_most(vals, p - 1, q)
    full = ~batch_rank_at_most(alphas, p - 1, q)
    zero = ~((alphas.sum(axis=2) + beta) % q).any(axis=1)
    rhs = r_all | (full & zero)
    disc_lemma = int((lhs != rhs).sum())
    return {
        "p": p, "q": q,
        "top_stratum": {"matrices": n_top, "discrepancies": disc_top, "first_witness": witness},
        "replacement_lemma": {"tuples": nvec, "discrepancies": disc_lemma},
    }


# ---------------------------------------------------------------- projection


def projection_containment(N: int, c: int, r: int, q: int, samples: int, seed: int,
                           batch: int = 1 << 15, max_batches: int = 2000) -> dict:
    """Members of M(N; 2c+r) project (first N rows, indices 1..N) into X(N, N-1)."""
    R = 2 * c + r
    spec = spec_M(N, R)
    target = spec_X(N, N - 1)
    rng = _rng(seed, q, N, R)
    cols = spec.cols
    got: list[np.ndarray] = []
    have = 0
    for _ in range(max_batches):
        if have >= samples:
            break
        mats = rng.integers(0, q, size=(batch, R, cols), dtype=np.int64)
        mats[:, :, cols - 1] = (-mats[:, :, : cols - 1].sum(axis=2)) % q
        ok = batch_membership(mats, spec, q)
        got.append(mats[ok])
        have += int(ok.sum())
    members = np.concatenate(got)[:samples] if got else np.zeros((0, R, cols), dtype=np.int64)
    keep_cols = list(range(1, N + 1)) + list(range(N + 2, 2 * N + 2))
    proj = members[:, :N, :][:, :, keep_cols]
    ok = batch_membership(proj, target, q)
    failures = int((~ok).sum())
    return {
        "N": N, "c": c, "r": r, "q": q, "samples": int(members.shape[0]),
        "failures": failures,
        "first_witness": None if failures == 0 else members[np.nonzero(~ok)[0][0]].tolist(),
    }


def all_matrices(spec: RankVarietySpec, q: int):
    """Iterate over every matrix of the ambient space (small cases only)."""
    pos = _free_positions(spec)
    for vals in product(range(q), repeat=len(pos)):
        m = [[0] * spec.cols for _ in range(spec.rows)]
        for (r, c, v) in spec.fixed:
            m[r][c] = v % q
        for (r, c), v in zip(pos, vals):
            m[r][c] = v
        yield m
