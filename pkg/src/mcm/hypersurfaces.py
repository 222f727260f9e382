"""Moving-coefficient hypersurface systems and their exact term regroupings.

A system holds, for each row i, dense random coefficient blocks A_i^j and
M_i^{S;j_k} (homogeneous of degree eps_i) and the assembled F_i.  Rows are
0-based in code.  A moving term is keyed by ``(S, k)`` with ``S`` a sorted
tuple of l+1 coordinates and ``k`` the position of the distinguished
coordinate, which carries exponent d - l*mu_{l,k}; the other members of S
carry mu_{l,k}.

Every rewrite returns a :class:`RewrittenSystem` whose column blocks times
z_j^{lambda_j}, plus its extra terms, reassemble F_i exactly.  Quotients are
computed by exact division, so a schedule that breaks divisibility surfaces
as :class:`DivisionNotExact`.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import (
    CharacteristicTooSmall,
    DivisionNotExact,
    InvalidConfig,
    InvalidSelection,
    ModeError,
)
from .polyring import MultiPoly, PolyRing, Ring, from_text, homogeneous_monomials, to_text
from .schedule import MCMSchedule, lambda_profile

QQ_RANGE = 9


def _sum(ring: PolyRing, polys) -> MultiPoly:
    cr = ring.coeff
    acc: dict = {}
    for p in polys:
        for e, c in p._terms.items():
            acc[e] = acc.get(e, 0) + c
    return MultiPoly(ring, {e: cr.coerce(c) for e, c in acc.items()})


def moving_exponents(s: MCMSchedule, N: int, S: tuple, k: int) -> tuple:
    """Exponent vector of the monomial attached to moving term (S, k) at full strength."""
    l = len(S) - 1
    mu = s.mu_(l, k)
    exps = [0] * (N + 1)
    for m in S:
        exps[m] = mu
    exps[S[k]] = s.d - l * mu
    return tuple(exps)


def improved_terms(s: MCMSchedule) -> list:
    """Shapes of the reduced moving-term families: list of (S, k, exponent vector).

    Defined when 3N - 2(2c+r) - 2 > 0.  For level L = N - eta the first
    t+1 members of S carry mu_{L,k} (distinguished one excepted), the rest
    carry 2, where t = 2p - 2eta (even case) or 2p + 1 - 2eta (odd case).
    """
    cfg = s.config
    N = cfg.N
    kk = 3 * N - 2 * (2 * cfg.c + cfg.r) - 2
    if kk <= 0:
        raise InvalidConfig(f"improved equations need 3N - 2(2c+r) - 2 > 0, got {kk}")
    p, odd = divmod(kk, 2)
    etas = range(0, p + 1) if odd else range(0, p)
    out = []
    for eta in etas:
        L = N - eta
        t = 2 * p + odd - 2 * eta
        n_sq = N + eta - 2 * p - odd
        for S in combinations(range(N + 1), L + 1):
            for k in range(t + 1):
                if L not in s.mu or k >= len(s.mu[L]):
                    raise InvalidConfig(f"schedule has no mu_({L},{k})")
                mu = s.mu_(L, k)
                exps = [0] * (N + 1)
                for m in S[: t + 1]:
                    exps[m] = mu
                for m in S[t + 1:]:
                    exps[m] = 2
                exps[S[k]] = s.d - t * mu - 2 * n_sq
                out.append((S, k, tuple(exps)))
    return out


def improved_well_formed(s: MCMSchedule) -> list[str]:
    """Problems with the reduced equation shapes (empty list when well formed)."""
    problems = []
    for S, k, exps in improved_terms(s):
        bad = [exps[m] for m in S if exps[m] < 2]
        if bad or sum(exps) != s.d:
            problems.append(f"term {S};{S[k]} has exponents {[exps[m] for m in S]}")
    return problems


# ---------------------------------------------------------------- systems


@dataclass(frozen=True)
class HypersurfaceSystem:
    schedule: MCMSchedule
    ring: PolyRing
    seed: int | None
    A: tuple  # A[i][j]
    M: tuple  # M[i] = dict {(S, k): poly}
    F: tuple
    term_exps: dict  # {(S, k): exponent vector}
    zero_moving: bool = False
    improved: bool = False

    @property
    def config(self):
        return self.schedule.config

    @property
    def N(self) -> int:
        return self.schedule.config.N

    @property
    def rows(self) -> int:
        return self.schedule.config.e

    def moving_term(self, i: int, key: tuple) -> MultiPoly:
        return self.M[i][key].mul_monomial(self.term_exps[key])

    def fermat_term(self, i: int, j: int) -> MultiPoly:
        return self.A[i][j].mul_z_power(j, self.schedule.d)

    def assemble(self, i: int) -> MultiPoly:
        parts = [self.fermat_term(i, j) for j in range(self.N + 1)]
        parts += [self.moving_term(i, key) for key in self.M[i]]
        return _sum(self.ring, parts)

    def check_invariants(self) -> list[str]:
        """Homogeneity, moving exponents >= 2 and reassembly; returns problems found."""
        cfg = self.config
        d = self.schedule.d
        problems = []
        for key, exps in self.term_exps.items():
            S = key[0]
            if any(exps[m] < 2 for m in S):
                problems.append(f"moving term {key} has an exponent below 2")
            if sum(exps) != d:
                problems.append(f"moving term {key} has degree {sum(exps)} != d")
        for i in range(self.rows):
            deg = d + cfg.epsilons[i]
            if not self.F[i].is_homogeneous(deg):
                problems.append(f"F_{i + 1} is not homogeneous of degree {deg}")
            if self.assemble(i) != self.F[i]:
                problems.append(f"F_{i + 1} does not reassemble from its blocks")
        return problems

    # -- serialization

    def to_dict(self) -> dict:
        N = self.N
        return {
            "schedule": self.schedule.to_dict(),
            "ring": self.ring.to_dict(),
            "seed": self.seed,
            "zero_moving": self.zero_moving,
            "improved": self.improved,
            "manifest": {
                "rows": self.rows,
                "columns": N + 1,
                "coefficient_degrees": list(self.config.epsilons),
                "moving_terms_per_row": len(self.term_exps),
            },
            "A": [[to_text(self.A[i][j]) for j in range(N + 1)] for i in range(self.rows)],
            "M": [
                [{"set": list(S), "k": k, "poly": to_text(P)} for (S, k), P in self.M[i].items()]
                for i in range(self.rows)
            ],
            "F": [to_text(f) for f in self.F],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_dict(obj: dict) -> "HypersurfaceSystem":
        s = MCMSchedule.from_dict(obj["schedule"])
        ring = PolyRing.from_dict(obj["ring"])
        N = s.config.N
        improved = obj.get("improved", False)
        exps = _term_exponents(s, improved)
        A = tuple(tuple(from_text(t, ring) for t in row) for row in obj["A"])
        M = tuple(
            {(tuple(t["set"]), t["k"]): from_text(t["poly"], ring) for t in row} for row in obj["M"]
        )
        for row in M:
            if set(row) != set(exps):
                raise InvalidConfig("moving blocks do not match the schedule")
        F = tuple(from_text(t, ring) for t in obj["F"])
        if len(A) != s.config.e or any(len(r) != N + 1 for r in A):
            raise InvalidConfig("A block shape does not match the configuration")
        return HypersurfaceSystem(s, ring, obj.get("seed"), A, M, F, exps,
                                  obj.get("zero_moving", False), improved)


def _term_exponents(s: MCMSchedule, improved: bool) -> dict:
    cfg = s.config
    if improved:
        return {(S, k): exps for S, k, exps in improved_terms(s)}
    out = {}
    for l in range(cfg.e + 1, cfg.N + 1):
        for S in combinations(range(cfg.N + 1), l + 1):
            for k in range(l + 1):
                out[(S, k)] = moving_exponents(s, cfg.N, S, k)
    return out


def _draw(rng, ring: Ring, size: int) -> list:
    if ring.kind == "fp":
        return [int(x) for x in rng.integers(0, ring.q, size=size)]
    return [int(x) for x in rng.integers(-QQ_RANGE, QQ_RANGE + 1, size=size)]


@dataclass(frozen=True)
class RowLayout:
    """Coordinates of one row's coefficient vector.

    ``blocks`` lists (key, attached exponent vector); key is ("A", j) or
    ("M", S, k).  Each block owns ``len(monomials)`` consecutive entries,
    one per degree-eps monomial in descending graded-lex order.
    """

    blocks: tuple
    monomials: tuple

    @property
    def size(self) -> int:
        return len(self.blocks) * len(self.monomials)

    def entries(self):
        """Yield (position, block key, full exponent vector of the resulting term)."""
        pos = 0
        for key, att in self.blocks:
            for m in self.monomials:
                yield pos, key, tuple(a + b for a, b in zip(m, att))
                pos += 1


def row_layouts(schedule: MCMSchedule, improved: bool = False) -> list:
    cfg = schedule.config
    n = cfg.N + 1
    exps = _term_exponents(schedule, improved)
    blocks = [(("A", j), tuple(schedule.d if t == j else 0 for t in range(n))) for j in range(n)]
    blocks += [(("M",) + key, att) for key, att in exps.items()]
    return [RowLayout(tuple(blocks), homogeneous_monomials(n, cfg.epsilons[i])) for i in range(cfg.e)]


def system_from_vectors(
    schedule: MCMSchedule,
    ring: PolyRing,
    vectors,
    seed=None,
    zero_moving: bool = False,
    improved: bool = False,
) -> HypersurfaceSystem:
    """Assemble a system from per-row coefficient vectors laid out as in :func:`row_layouts`."""
    cfg = schedule.config
    layouts = row_layouts(schedule, improved)
    exps = _term_exponents(schedule, improved)
    A_rows, M_rows = [], []
    for i, (lay, vec) in enumerate(zip(layouts, vectors)):
        if len(vec) != lay.size:
            raise InvalidConfig(f"row {i + 1}: expected {lay.size} coefficients, got {len(vec)}")
        k = len(lay.monomials)
        polys = {}
        for b, (key, _) in enumerate(lay.blocks):
            polys[key] = MultiPoly(ring, dict(zip(lay.monomials, vec[b * k:(b + 1) * k])))
        A_rows.append(tuple(polys[("A", j)] for j in range(cfg.N + 1)))
        M_rows.append({key: ring.zero() if zero_moving else polys[("M",) + key] for key in exps})
    draft = HypersurfaceSystem(schedule, ring, seed, tuple(A_rows), tuple(M_rows), (), exps,
                               zero_moving, improved)
    F = tuple(draft.assemble(i) for i in range(cfg.e))
    return HypersurfaceSystem(schedule, ring, seed, draft.A, draft.M, F, exps, zero_moving, improved)


def check_characteristic(schedule: MCMSchedule, cr: Ring, allow_small_q: bool = False) -> None:
    if cr.kind == "fp" and cr.q <= schedule.d:
        msg = f"q = {cr.q} does not exceed d = {schedule.d}"
        if not allow_small_q:
            raise CharacteristicTooSmall(msg)
        warnings.warn(msg, stacklevel=3)


def sample_system(
    schedule: MCMSchedule,
    ring: Ring | PolyRing,
    seed: int = 0,
    zero_moving: bool = False,
    improved: bool = False,
    allow_small_q: bool = False,
) -> HypersurfaceSystem:
    """Random system of the full-strength (or, with ``improved``, reduced) shape.

    Each row draws its whole coefficient vector (layout of
    :func:`row_layouts`) in one call, rows in order, from a generator
    seeded by ``seed``.  With ``zero_moving`` the moving blocks are still
    drawn and then discarded, so A blocks match the unrestricted system.
    """
    cfg = schedule.config
    pr = ring if isinstance(ring, PolyRing) else PolyRing(ring, cfg.N + 1)
    if pr.n != cfg.N + 1 or pr.forms:
        raise InvalidConfig(f"need a plain ring in {cfg.N + 1} variables")
    check_characteristic(schedule, pr.coeff, allow_small_q)
    if improved:
        bad = improved_well_formed(schedule)
        if bad:
            raise InvalidConfig("improved equations are not well formed: " + "; ".join(bad[:3]))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    vectors = [_draw(rng, pr.coeff, lay.size) for lay in row_layouts(schedule, improved)]
    return system_from_vectors(schedule, pr, vectors, seed, zero_moving, improved)


def corrupt(system: HypersurfaceSystem, i: int = 0, j: int = 0, delta: int = 1) -> HypersurfaceSystem:
    """Copy of ``system`` whose F_i has one coefficient of A_i^j shifted, blocks untouched."""
    A = system.A[i][j]
    e, c = A.leading_term()
    bumped = A + system.ring.monomial(e, delta)
    F = list(system.F)
    F[i] = F[i] + (bumped - A).mul_z_power(j, system.schedule.d)
    return HypersurfaceSystem(system.schedule, system.ring, system.seed, system.A, system.M,
                              tuple(F), system.term_exps, system.zero_moving, system.improved)


# ---------------------------------------------------------------- rewritten systems


@dataclass
class RewrittenSystem:
    """Regrouped F_i.

    ``columns`` lists the surviving coordinates; ``lambdas[p]`` is the
    exponent of z_{columns[p]}.  ``coeffs[i][p]`` is the block multiplying
    z_{columns[p]}^{lambdas[p]} in row i.  ``extra[i]`` holds remaining
    terms as (label, coefficient, exponent vector).  ``blocks`` names the
    same polynomials by their role: C, T, E, P, R, keyed (row, coordinate).
    """

    variant: tuple
    vanishing: tuple
    columns: tuple
    lambdas: tuple
    coeffs: list
    extra: list
    blocks: dict = field(default_factory=dict)

    def tag(self) -> str:
        base = ",".join(str(x) for x in self.variant)
        if self.vanishing:
            return f"vanish({','.join(map(str, self.vanishing))};{base})"
        return base

    def reassemble(self, system: HypersurfaceSystem, i: int) -> MultiPoly:
        parts = [P.mul_z_power(j, lam) for P, j, lam in zip(self.coeffs[i], self.columns, self.lambdas)]
        parts += [P.mul_monomial(ex) for _, P, ex in self.extra[i]]
        return _sum(system.ring, parts)

    def to_dict(self) -> dict:
        return {
            "variant": self.tag(),
            "columns": list(self.columns),
            "lambdas": [str(x) for x in self.lambdas],
            "coeffs": [[to_text(P) for P in row] for row in self.coeffs],
            "extra": [[{"label": lab, "poly": to_text(P), "exps": [str(x) for x in ex]}
                       for lab, P, ex in row] for row in self.extra],
        }


def _parse_variant(variant) -> tuple:
    if isinstance(variant, str):
        variant = (variant,)
    variant = tuple(variant)
    if not variant or variant[0] not in ("collapse", "first", "second"):
        raise InvalidSelection(f"unknown variant {variant!r}")
    want = {"collapse": 1, "first": 2, "second": 3}[variant[0]]
    if len(variant) != want:
        raise InvalidSelection(f"variant {variant!r} has the wrong number of indices")
    return variant


def rewrite(system: HypersurfaceSystem, variant=("collapse",), vanishing=()) -> RewrittenSystem:
    """General regrouping; ``variant`` indices refer to positions among surviving columns."""
    if system.improved:
        raise ModeError("rewrites are defined for the full-strength equations only")
    variant = _parse_variant(variant)
    cfg = system.config
    s = system.schedule
    N, d = cfg.N, s.d
    vanishing = tuple(vanishing)
    eta = len(vanishing)
    if any(b <= a for a, b in zip(vanishing, vanishing[1:])):
        raise InvalidSelection("vanishing indices must be strictly increasing")
    if any(not 0 <= v <= N for v in vanishing):
        raise InvalidSelection("vanishing index out of range")
    if eta and not 1 <= eta <= cfg.n - 1:
        raise InvalidSelection(f"eta = {eta} outside 1..{cfg.n - 1}")
    r = tuple(j for j in range(N + 1) if j not in vanishing)
    L = N - eta
    lam = tuple(lambda_profile(s, variant if variant[0] != "collapse" else ("collapse",), eta))
    dL = s.delta_(L)
    vset = set(vanishing)
    rset = set(r)
    ring = system.ring

    coeffs, extra = [], []
    blocks: dict = {"C": {}, "T": {}, "E": {}, "P": {}, "R": {}}
    for i in range(cfg.e):
        # gather each key into: core column (lower level within r), top (level L, set r), residue
        gathered = {j: [system.fermat_term(i, j)] for j in range(N + 1)}
        top = {}
        residue = {v: [system.fermat_term(i, v)] for v in vanishing}
        for key in system.M[i]:
            S, k = key
            term = system.moving_term(i, key)
            hit = vset.intersection(S)
            if hit:
                residue[min(hit)].append(term)
            elif len(S) - 1 == L:
                top[k] = term
            else:
                gathered[S[k]].append(term)
        row_c = {}
        for j in r:
            C = _sum(ring, gathered[j]).divide_by_z_power(j, d - dL)
            row_c[j] = C
            blocks["C"][(i, j)] = C
        top_terms = [top.get(k, ring.zero()) for k in range(L + 1)]
        row_coeffs = []
        row_extra = []
        kind = variant[0]
        if kind == "collapse":
            row_coeffs = [row_c[j] for j in r]
            row_extra = [(f"top{k}", system.M[i][(r, k)], system.term_exps[(r, k)])
                         for k in range(L + 1)]
        elif kind == "first":
            nu = variant[1]
            jn = r[nu]
            T = _sum(ring, [row_c[jn].mul_z_power(jn, d - dL)] + top_terms).divide_by_z_power(jn, lam[nu])
            blocks["T"][(i, jn)] = T
            row_coeffs = [T if p == nu else row_c[j] for p, j in enumerate(r)]
        else:
            tau, rho = variant[1], variant[2]
            jr = r[rho]
            for p, j in enumerate(r):
                if p <= tau:
                    E = (row_c[j].mul_z_power(j, d - dL) + top_terms[p]).divide_by_z_power(j, lam[p])
                    blocks["E"][(i, j)] = E
                    row_coeffs.append(E)
                elif p == rho:
                    P = _sum(ring, [row_c[j].mul_z_power(j, d - dL)] + top_terms[tau + 1:])
                    P = P.divide_by_z_power(j, lam[p])
                    blocks["P"][(i, jr)] = P
                    row_coeffs.append(P)
                else:
                    row_coeffs.append(row_c[j])
        for v in vanishing:
            R = _sum(ring, residue[v]).divide_by_z_power(v, 2)
            blocks["R"][(i, v)] = R
            ex = [0] * (N + 1)
            ex[v] = 2
            row_extra.append((f"R{v}", R, tuple(ex)))
        coeffs.append(row_coeffs)
        extra.append(row_extra)
    return RewrittenSystem(variant, vanishing, r, lam, coeffs, extra, blocks)


def collapse(system: HypersurfaceSystem) -> RewrittenSystem:
    return rewrite(system, ("collapse",))


def rewrite_first_kind(system: HypersurfaceSystem, nu: int) -> RewrittenSystem:
    if not 0 <= nu <= system.N:
        raise InvalidSelection(f"nu = {nu} outside 0..{system.N}")
    return rewrite(system, ("first", nu))


def rewrite_second_kind(system: HypersurfaceSystem, tau: int, rho: int) -> RewrittenSystem:
    if not (0 <= tau <= system.N - 1 and tau + 1 <= rho <= system.N):
        raise InvalidSelection(f"(tau, rho) = ({tau}, {rho}) out of range")
    return rewrite(system, ("second", tau, rho))


def vanish_decompose(system: HypersurfaceSystem, vanishing, sub_variant=("collapse",)) -> RewrittenSystem:
    vanishing = tuple(vanishing)
    if not vanishing:
        raise InvalidSelection("at least one vanishing coordinate is required")
    return rewrite(system, sub_variant, vanishing)


def all_rewrites(system: HypersurfaceSystem, vanishing=()):
    """Yield the collapse and every first/second-kind rewrite for one vanishing set."""
    L = system.N - len(vanishing)
    yield rewrite(system, ("collapse",), vanishing)
    for nu in range(L + 1):
        yield rewrite(system, ("first", nu), vanishing)
    for tau in range(L):
        for rho in range(tau + 1, L + 1):
            yield rewrite(system, ("second", tau, rho), vanishing)


@dataclass(frozen=True)
class RewriteCheck:
    ok: bool
    residuals: tuple  # text of reassembled minus F_i, per row

    def to_dict(self) -> dict:
        return {"ok": self.ok, "residuals": list(self.residuals)}


def verify_rewrite(system: HypersurfaceSystem, rewritten: RewrittenSystem) -> RewriteCheck:
    """Recompute every row from the blocks and subtract F_i."""
    res = []
    for i in range(system.rows):
        res.append(rewritten.reassemble(system, i) - system.F[i])
    return RewriteCheck(all(r.is_zero() for r in res), tuple(to_text(r) for r in res))


def residues_in_ideal(system: HypersurfaceSystem, rewritten: RewrittenSystem) -> bool:
    """Every residue term is divisible by z_v^2 for some vanishing v."""
    vs = rewritten.vanishing
    for row in rewritten.extra:
        for lab, P, ex in row:
            if not lab.startswith("R"):
                continue
            full = P.mul_monomial(ex)
            for e in full.terms:
                if not any(e[v] >= 2 for v in vs):
                    return False
    return True


__all__ = [
    "DivisionNotExact",
    "HypersurfaceSystem",
    "RewrittenSystem",
    "RewriteCheck",
    "sample_system",
    "rewrite",
    "collapse",
    "rewrite_first_kind",
    "rewrite_second_kind",
    "vanish_decompose",
    "all_rewrites",
    "verify_rewrite",
    "residues_in_ideal",
    "improved_terms",
    "improved_well_formed",
    "corrupt",
    "moving_exponents",
    "row_layouts",
    "system_from_vectors",
]
