"""Exponent schedules for the moving-coefficient equations and effective-bound arithmetic.

A schedule fixes the integers delta_l (l = c+r+1..N+1), mu_{l,k}
(l = c+r+1..N, k = 0..l) and the degree d.  Three construction modes:

``tight``
    every lower bound of the selection rules taken with equality, starting
    from delta_{c+r+1} = max(epsilon);
``paper9``
    the simplified equalities used for the explicit degree estimate:
    delta_{c+r+1} = 2 and the heart term (l-c-r)*heart replaced by l*heart;
``mock``
    small exponents with the same divisibility structure (used to test
    polynomial identities at manageable degrees); it is validated by the
    structural checks only and carries no negativity guarantee.

All arithmetic is exact Python integer arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .errors import InvalidConfig, InvalidSelection, ModeError

MODES = ("tight", "paper9", "mock")


@dataclass(frozen=True)
class MCMConfig:
    N: int
    c: int
    r: int
    heart: int = 1
    epsilons: tuple = ()

    def __post_init__(self):
        eps = tuple(int(e) for e in (self.epsilons or (1,) * (self.c + self.r)))
        object.__setattr__(self, "epsilons", eps)
        if self.N < 2:
            raise InvalidConfig("N must be at least 2")
        if self.c < 0 or self.r < 0:
            raise InvalidConfig("c and r must be nonnegative")
        if 2 * self.c + self.r < self.N:
            raise InvalidConfig(f"2c+r = {2 * self.c + self.r} < N = {self.N}")
        if self.c + self.r > self.N - 1:
            raise InvalidConfig(f"c+r = {self.c + self.r} > N-1 = {self.N - 1}")
        if len(eps) != self.c + self.r:
            raise InvalidConfig(f"expected {self.c + self.r} epsilons, got {len(eps)}")
        if any(e < 1 for e in eps):
            raise InvalidConfig("all epsilons must be >= 1")
        if self.heart < 1:
            raise InvalidConfig("heart must be >= 1")
        if not 1 <= self.n <= self.c:
            raise InvalidConfig(f"n = N-c-r = {self.n} must lie in [1, c]")

    @property
    def e(self) -> int:
        return self.c + self.r

    @property
    def n(self) -> int:
        return self.N - self.c - self.r

    def to_dict(self) -> dict:
        return {"N": self.N, "c": self.c, "r": self.r, "heart": self.heart, "epsilons": list(self.epsilons)}


@dataclass(frozen=True)
class MCMSchedule:
    config: MCMConfig
    mode: str
    delta: dict  # l -> delta_l, l = c+r+1..N+1
    mu: dict  # l -> tuple(mu_{l,0..l})
    d: int

    def mu_(self, l: int, k: int) -> int:
        return self.mu[l][k]

    def delta_(self, l: int) -> int:
        return self.delta[l]

    @property
    def levels(self) -> range:
        return range(self.config.e + 1, self.config.N + 1)

    def max_exponent(self) -> int:
        return self.d

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "N": cfg.N, "c": cfg.c, "r": cfg.r, "heart": cfg.heart,
            "epsilons": list(cfg.epsilons),
            "delta": [str(self.delta[l]) for l in range(cfg.e + 1, cfg.N + 2)],
            "mu": [[str(m) for m in self.mu[l]] for l in self.levels],
            "d": str(self.d),
            "mode": self.mode,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_dict(obj: dict) -> "MCMSchedule":
        cfg = MCMConfig(obj["N"], obj["c"], obj["r"], obj["heart"], tuple(obj["epsilons"]))
        lo = cfg.e + 1
        delta = {lo + i: int(v) for i, v in enumerate(obj["delta"])}
        mu = {lo + i: tuple(int(v) for v in row) for i, row in enumerate(obj["mu"])}
        return MCMSchedule(cfg, obj["mode"], delta, mu, int(obj["d"]))


# ---------------------------------------------------------------- construction


def _heart_term(cfg: MCMConfig, l: int, mode: str) -> int:
    return (l if mode == "paper9" else l - cfg.e) * cfg.heart


def level_constant(cfg: MCMConfig, l: int, delta_first: int, mode: str) -> int:
    """The additive constant l*(delta_{c+r+1}+1) + 1 + heart term shared by all mu_{l,k}."""
    return l * (delta_first + 1) + 1 + _heart_term(cfg, l, mode)


def build_schedule(cfg: MCMConfig, mode: str = "tight", delta_first: int | None = None) -> MCMSchedule:
    if mode not in MODES:
        raise InvalidConfig(f"unknown schedule mode {mode!r}; expected one of {MODES}")
    lo, N = cfg.e + 1, cfg.N
    if mode == "paper9":
        if max(cfg.epsilons) > 2:
            raise InvalidConfig("the simplified schedule fixes delta_{c+r+1} = 2, so every epsilon must be <= 2")
        d0 = 2
    else:
        d0 = max(cfg.epsilons) if delta_first is None else int(delta_first)
        if d0 < max(cfg.epsilons):
            raise InvalidConfig("delta_{c+r+1} must be >= max(epsilon)")
    delta = {lo: d0}
    mu: dict = {}
    prev_top = None
    for l in range(lo, N + 1):
        dl = delta[l]
        row = []
        if mode == "mock":
            start = max(2, -(-dl // l), (prev_top + 1) if prev_top is not None else 2)
            row = [start + k for k in range(l + 1)]
        else:
            K = level_constant(cfg, l, d0, mode)
            acc = 0
            for k in range(l + 1):
                m = l * acc + (l - k) * dl + K
                row.append(m)
                acc += m
        mu[l] = tuple(row)
        prev_top = row[-1]
        delta[l + 1] = l * row[-1]
    d = (N + 1) * mu[N][N]
    return MCMSchedule(cfg, mode, delta, mu, d)


# ---------------------------------------------------------------- validation


def validate_structure(s: MCMSchedule) -> list[str]:
    """Exponent relations every rewriting division relies on (all modes)."""
    cfg, d = s.config, s.d
    errs: list[str] = []
    lo, N = cfg.e + 1, cfg.N
    for l in s.levels:
        for k in range(l + 1):
            if s.mu[l][k] < 2:
                errs.append(f"mu_{l},{k} < 2")
            if d - l * s.mu[l][k] < 2:
                errs.append(f"d - {l}*mu_{l},{k} < 2")
            if k and s.mu[l][k] <= s.mu[l][k - 1]:
                errs.append(f"mu_{l},{k} not increasing")
        if l > lo and max(s.mu[l - 1]) >= min(s.mu[l]):
            errs.append(f"levels {l - 1} and {l} not separated")
        if s.delta[l + 1] != l * s.mu[l][l]:
            errs.append(f"delta_{l + 1} != {l}*mu_{l},{l}")
    if d < (N + 1) * s.mu[N][N]:
        errs.append("d < (N+1)*mu_N,N")
    # each top level L = N - eta with its lower levels
    for L in s.levels:
        dL = s.delta[L]
        for l in range(lo, L):
            for k in range(l + 1):
                if l * s.mu[l][k] > dL:
                    errs.append(f"{l}*mu_{l},{k} > delta_{L}")
        mL = s.mu[L]
        if d - dL < 2:
            errs.append(f"d - delta_{L} < 2")
        if mL[0] > d - dL:
            errs.append(f"mu_{L},0 > d - delta_{L}")
        for k in range(L + 1):
            if L * mL[k] < dL:
                errs.append(f"{L}*mu_{L},{k} < delta_{L}")
            if mL[k] > d - L * mL[k]:
                errs.append(f"mu_{L},{k} > d - {L}*mu_{L},{k}")
    return errs


def validate_full(s: MCMSchedule) -> list[str]:
    """The selection inequalities themselves, re-derived from scratch."""
    cfg = s.config
    lo = cfg.e + 1
    errs = validate_structure(s)
    d0 = s.delta[lo]
    if d0 < max(cfg.epsilons):
        errs.append("delta_{c+r+1} < max epsilon")
    for l in s.levels:
        base = l * (d0 + 1) + 1 + (l - cfg.e) * cfg.heart
        for k in range(l + 1):
            need = sum(l * s.mu[l][j] for j in range(k)) + (l - k) * s.delta[l] + base
            if s.mu[l][k] < need:
                errs.append(f"mu_{l},{k} = {s.mu[l][k]} below its lower bound {need}")
    return errs


def is_tight(s: MCMSchedule) -> bool:
    cfg = s.config
    d0 = s.delta[cfg.e + 1]
    for l in s.levels:
        base = l * (d0 + 1) + 1 + (l - cfg.e) * cfg.heart
        for k in range(l + 1):
            if s.mu[l][k] != sum(l * s.mu[l][j] for j in range(k)) + (l - k) * s.delta[l] + base:
                return False
    return d0 == max(cfg.epsilons) and s.d == (cfg.N + 1) * s.mu[cfg.N][cfg.N]


# ---------------------------------------------------------------- closed forms and bounds


def closed_form_S(s: MCMSchedule, l: int, k: int) -> int:
    """Partial sum mu_{l,0} + ... + mu_{l,k} from the geometric closed form."""
    if s.mode != "paper9":
        raise ModeError("the closed form is stated for the simplified schedule")
    if l not in s.mu or not 0 <= k <= l:
        raise InvalidSelection(f"no mu_{l},{k} in this schedule")
    dl = s.delta[l]
    K = level_constant(s.config, l, 2, "paper9")
    g = (l + 1) ** (k + 1)
    val = Fraction(l * dl + K) * Fraction(g - 1, l) - Fraction(dl, l * l) * (g + k - (1 + k) * (l + 1))
    if val.denominator != 1:
        raise ArithmeticError("closed form produced a non-integer")
    return val.numerator


def direct_S(s: MCMSchedule, l: int, k: int) -> int:
    return sum(s.mu[l][: k + 1])


def replay_delta(cfg: MCMConfig, upto: int | None = None) -> dict:
    """delta_l by the one-step closed recursion, independent of the mu loop (simplified mode)."""
    lo = cfg.e + 1
    upto = cfg.N + 1 if upto is None else upto
    out = {lo: 2}
    for l in range(lo, upto):
        dl = out[l]
        K = level_constant(cfg, l, 2, "paper9")
        P = (l + 1) ** l
        # l^2 * S_{l,l-1} + l*K with S from the closed form
        out[l + 1] = dl * (l * l * P - P + 1) + K * l * P
    return out


def delta_step_bound_holds(delta_l: int, delta_next: int, l: int) -> bool:
    """delta_{l+1} <= l^2 (l+1)^l delta_l."""
    return delta_next <= l * l * (l + 1) ** l * delta_l


def admissible_cr(N: int):
    for c in range(1, N):
        for r in range(0, N):
            if 2 * c + r >= N and c + r <= N - 1 and 1 <= N - c - r <= c:
                yield c, r


def degree_bound_report(Nmin: int = 3, Nmax: int = 13, heart: int = 1) -> dict:
    """Per-N table of (N+1)mu_{N,N} in the simplified schedule against N^{N^2/2} - 1."""
    if Nmin < 3:
        raise InvalidConfig("the degree report starts at N = 3")
    rows = []
    for N in range(Nmin, Nmax + 1):
        per_cr = []
        for c, r in admissible_cr(N):
            cfg = MCMConfig(N, c, r, heart, (1,) * (c + r))
            s = build_schedule(cfg, "paper9")
            top = (N + 1) * s.mu[N][N]
            rep = replay_delta(cfg)
            replay_top = (N + 1) * rep[N + 1] // N
            steps = []
            for l in range(cfg.e + 1, N + 1):
                steps.append({
                    "l": l,
                    "delta_l": str(s.delta[l]),
                    "delta_next": str(s.delta[l + 1]),
                    "bound": str(l * l * (l + 1) ** l * s.delta[l]),
                    "holds": delta_step_bound_holds(s.delta[l], s.delta[l + 1], l),
                    "in_stated_range": l >= cfg.e + 2,
                })
            per_cr.append({
                "c": c, "r": r,
                "top": str(top),
                "replay_top": str(replay_top),
                "replay_agrees": replay_top == top and rep[N + 1] % N == 0 and all(
                    rep[l] == s.delta[l] for l in rep),
                "delta_steps": steps,
            })
        best = min(per_cr, key=lambda x: int(x["top"]))
        top = int(best["top"])
        half_ceiling = N ** math.ceil(N * N / 2) - 1
        holds = (top + 1) ** 2 <= N ** (N * N)  # (N+1)mu <= N^{N^2/2} - 1, squared exactly
        rows.append({
            "N": N,
            "best_c": best["c"], "best_r": best["r"],
            "top": str(top),
            "N_pow_ceil_half_minus_1": str(half_ceiling),
            "N_pow_N2": str(N ** (N * N)),
            "bound_holds": holds,
            "per_cr": per_cr,
        })
    threshold = None
    for row in reversed(rows):
        if row["bound_holds"]:
            threshold = row["N"]
        else:
            break
    discrepancies = [row["N"] for row in rows if not row["bound_holds"]]
    return {
        "Nmin": Nmin, "Nmax": Nmax, "heart": heart,
        "rows": rows,
        "threshold": threshold,
        "stated_range_failures": discrepancies,
    }


def product_decompose(d: int, d0: int):
    """Nonnegative (p, q) with p(d+1) + q(d+2) = d0 (smallest q), or None."""
    if d < 1 or d0 < 0:
        raise InvalidConfig("need d >= 1 and d0 >= 0")
    if d0 >= d * d + d:
        a, b = divmod(d0, d + 1)
        return (a - b, b)
    for q in range(0, d0 // (d + 2) + 1):
        rest = d0 - q * (d + 2)
        if rest % (d + 1) == 0:
            return (rest // (d + 1), q)
    return None


def very_ample_kappa(degrees_first_c, degrees_all) -> int:
    first = [int(x) for x in degrees_first_c]
    allv = [int(x) for x in degrees_all]
    if not first or not allv:
        raise InvalidConfig("degree lists must be nonempty")
    if any(x < 1 for x in allv + first):
        raise InvalidConfig("degrees must be positive")
    if allv[: len(first)] != first:
        raise InvalidConfig("the first c degrees must open the full list")
    return 16 * (sum(first) + sum(allv)) ** 2


def min_moving_terms(N: int, c: int, r: int, eta: int = 0) -> int:
    if 2 * c + r < N:
        raise InvalidConfig("2c+r must be >= N")
    if not 0 <= eta <= N - (c + r) - 1:
        raise InvalidConfig(f"eta must lie in [0, {N - c - r - 1}]")
    k = 3 * N - 2 * (2 * c + r) - 2 - 2 * eta
    return k + 1 if k > 0 else 0


def parameter_count(cfg: MCMConfig) -> int:
    N = cfg.N
    terms = (N + 1) + sum(math.comb(N + 1, l + 1) * (l + 1) for l in range(cfg.e + 1, N + 1))
    return terms * sum(math.comb(N + e, N) for e in cfg.epsilons)


# ---------------------------------------------------------------- twist degrees


@dataclass(frozen=True)
class TwistDegree:
    value: int
    rows_i: tuple
    rows_j: tuple
    variant: tuple  # ("first", nu) | ("second", tau, rho) | ("collapse",)
    vanishing: tuple = ()
    lambdas: tuple = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            "value": self.value, "rows_i": list(self.rows_i), "rows_j": list(self.rows_j),
            "variant": list(self.variant), "vanishing": list(self.vanishing),
        }


def twist_value(degs_i, degs_j, lambdas) -> int:
    """sum deg F_i + sum deg F_j - sum lambda + (number of columns)."""
    return sum(degs_i) + sum(degs_j) - sum(lambdas) + len(lambdas)


def lambda_profile(s: MCMSchedule, variant: tuple, eta: int = 0) -> list[int]:
    """Column exponents (over the N-eta+1 surviving columns) of a rewritten system."""
    L = s.config.N - eta
    if L not in s.mu:
        raise InvalidSelection(f"eta = {eta} leaves no schedule level")
    d, dL, m = s.d, s.delta[L], s.mu[L]
    kind = variant[0]
    if kind == "collapse":
        return [d - dL] * (L + 1)
    if kind == "first":
        nu = variant[1]
        if not 0 <= nu <= L:
            raise InvalidSelection(f"nu = {nu} outside 0..{L}")
        return [m[0] if j == nu else d - dL for j in range(L + 1)]
    if kind == "second":
        tau, rho = variant[1], variant[2]
        if not (0 <= tau <= L - 1 and tau + 1 <= rho <= L):
            raise InvalidSelection(f"(tau, rho) = ({tau}, {rho}) outside range for level {L}")
        out = []
        for j in range(L + 1):
            if j <= tau:
                out.append(d - L * m[j])
            elif j == rho:
                out.append(m[tau + 1])
            else:
                out.append(d - dL)
        return out
    if kind == "fermat":
        return [d] * (L + 1)
    raise InvalidSelection(f"unknown variant {variant!r}")


def variants(L: int):
    for nu in range(L + 1):
        yield ("first", nu)
    for tau in range(L):
        for rho in range(tau + 1, L + 1):
            yield ("second", tau, rho)


def twist_degree(s: MCMSchedule, rows_j, variant: tuple, vanishing=(), rows_i=None) -> TwistDegree:
    cfg = s.config
    vanishing = tuple(vanishing)
    if any(b <= a for a, b in zip(vanishing, vanishing[1:])):
        raise InvalidSelection("vanishing indices must be strictly increasing")
    if any(not 0 <= v <= cfg.N for v in vanishing):
        raise InvalidSelection("vanishing index out of range")
    eta = len(vanishing)
    rows_i = tuple(range(1, cfg.e + 1)) if rows_i is None else tuple(rows_i)
    rows_j = tuple(rows_j)
    if any(not 1 <= i <= cfg.e for i in rows_i) or any(not 1 <= j <= cfg.c for j in rows_j):
        raise InvalidSelection("row selection out of range")
    lam = lambda_profile(s, variant, eta)
    degs = [s.d + e for e in cfg.epsilons]
    val = twist_value([degs[i - 1] for i in rows_i], [degs[j - 1] for j in rows_j], lam)
    return TwistDegree(val, rows_i, rows_j, tuple(variant), vanishing, tuple(lam))


def negativity_report(s: MCMSchedule) -> dict:
    """Every twist degree over all variants, eta, vanishing sets and selections."""
    cfg = s.config
    checked = 0
    n_fail = 0
    worst = None
    failures = []
    for eta in range(0, cfg.n):
        bound = -(cfg.n - eta) * cfg.heart
        for vset in combinations(range(cfg.N + 1), eta):
            for variant in variants(cfg.N - eta):
                for sel in combinations(range(1, cfg.c + 1), cfg.n - eta):
                    td = twist_degree(s, sel, variant, vset)
                    checked += 1
                    gap = td.value - bound
                    if worst is None or gap > worst[0]:
                        worst = (gap, td)
                    if td.value > bound:
                        n_fail += 1
                        if len(failures) < 5:
                            failures.append({**td.to_dict(), "bound": bound})
    return {
        "checked": checked,
        "failures": n_fail,
        "first_failures": failures,
        "max_value_minus_bound": None if worst is None else worst[0],
        "worst": None if worst is None else worst[1].to_dict(),
        "all_negative": n_fail == 0,
    }
