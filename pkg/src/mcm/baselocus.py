"""Base-locus characterization and full-rank genericity on pointed samples.

The collapsed term matrix M(z, xi) has one column per dominant term
C_j z_j^{d - delta_L} (the alpha block) and one per top-level moving term
(the beta block); its first c+r rows are values and the last c rows are
differentials at xi.  The forms of the first and second kind vanish at a
generic jet exactly when M(z, xi) satisfies the rank conditions of the
M-family, which is what :func:`characterization_check` tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .codim import membership, spec_M
from .errors import InvalidJet, SamplingFailed
from .ffield import rank_mod
from .hypersurfaces import HypersurfaceSystem, rewrite
from .polyring import value_and_gradient
from .schedule import MCMSchedule, variants
from .symforms import (
    JetPoint,
    NumericEvaluator,
    PointedSample,
    fermat_from_rewrite,
    pointed_sampler,
)

MAX_RETRIES = 50


def _check_jet(system: HypersurfaceSystem, jet: JetPoint, vanishing: tuple) -> None:
    q = jet.q
    cfg = system.config
    if not jet.independent():
        raise InvalidJet("xi is proportional to z")
    for i, F in enumerate(system.F):
        v, g = value_and_gradient(F, jet.z)
        if v % q:
            raise InvalidJet(f"F_{i + 1}(z) != 0")
        if i < cfg.c and sum(a * b for a, b in zip(g, jet.xi)) % q:
            raise InvalidJet(f"dF_{i + 1}(xi) != 0")
    for j in range(cfg.N + 1):
        if (j in vanishing) == bool(jet.z[j] % q):
            raise InvalidJet(f"coordinate z_{j} does not match the vanishing pattern")


def collapsed_matrix(system: HypersurfaceSystem, jet: JetPoint, vanishing=()) -> list:
    """M(z, xi): (2c+r) x 2(L+1) values and differentials of the collapsed terms."""
    _check_jet(system, jet, tuple(vanishing))
    q = jet.q
    cfg = system.config
    rw = rewrite(system, ("collapse",), tuple(vanishing))
    z, xi = jet.z, jet.xi
    rows_v, rows_d = [], []
    for i in range(cfg.e):
        vals, ders = [], []
        for G, col, lam in zip(rw.coeffs[i], rw.columns, rw.lambdas):
            g, grad = value_and_gradient(G, z)
            dg = sum(a * b for a, b in zip(grad, xi)) % q
            zl1 = pow(z[col], lam - 1, q)
            vals.append(g * zl1 * z[col] % q)
            ders.append(zl1 * (z[col] * dg + lam * g * xi[col]) % q)
        for label, P, ex in rw.extra[i]:
            if not label.startswith("top"):
                continue
            g, grad = value_and_gradient(P, z)
            dg = sum(a * b for a, b in zip(grad, xi)) % q
            mon = 1
            for v, k in zip(z, ex):
                if k:
                    mon = mon * pow(v, k, q) % q
            dmon = 0
            for t, k in enumerate(ex):
                if k and xi[t] % q:
                    rest = 1
                    for s, (v, m) in enumerate(zip(z, ex)):
                        m = m - 1 if s == t else m
                        if m:
                            rest = rest * pow(v, m, q) % q
                    dmon += k * rest * xi[t]
            vals.append(g * mon % q)
            ders.append((dg * mon + g * dmon) % q)
        rows_v.append(vals)
        rows_d.append(ders)
    return rows_v + rows_d[: cfg.c]


def k_columns(M: list, variant: tuple, q: int) -> list:
    """Rows of K^nu / K^{tau,rho} assembled from the alpha/beta blocks of M."""
    w = len(M[0]) // 2
    out = []
    for row in M:
        a, b = row[:w], row[w:]
        if variant[0] == "first":
            nu = variant[1]
            new = [a[j] for j in range(w) if j != nu] + [(a[nu] + sum(b)) % q]
        else:
            tau, rho = variant[1], variant[2]
            new = [(a[k] + b[k]) % q for k in range(tau + 1)]
            new += [a[j] for j in range(tau + 1, w) if j != rho]
            new += [(a[rho] + sum(b[tau + 1:])) % q]
        out.append(new)
    return out


def h_ranks(M: list, e: int, q: int) -> dict:
    """Ranks of H^nu and H^{tau,rho} (value rows of the K matrices) at the jet's z."""
    w = len(M[0]) // 2
    out = {}
    for var in variants(w - 1):
        out[var] = rank_mod(k_columns(M[:e], var, q), q)
    return out


def generic_at(M: list, e: int, q: int) -> bool:
    return all(rk == e for rk in h_ranks(M, e, q).values())


def forms_vanish_at(system: HypersurfaceSystem, jet: JetPoint, vanishing=()) -> bool:
    """Every form of the first and second kind (all row selections) vanishes at the jet."""
    vanishing = tuple(vanishing)
    _check_jet(system, jet, vanishing)
    cfg = system.config
    q = jet.q
    eta = len(vanishing)
    L = cfg.N - eta
    rows_i = tuple(range(1, cfg.e + 1))
    for var in variants(L):
        fd = fermat_from_rewrite(rewrite(system, var, vanishing), system)
        ev = NumericEvaluator(fd, jet)
        chart = next(p for p, col in enumerate(fd.columns) if jet.z[col] % q)
        for sel in combinations(range(1, cfg.c + 1), cfg.n - eta):
            mat = ev.matrix(rows_i, sel)
            sub = [[v for t, v in enumerate(row) if t != chart] for row in mat]
            if rank_mod(sub, q) == len(sub):
                return False
    return True


def low_rank_member(rng, rows: int, width: int, rank: int, q: int) -> list:
    """Random rows x 2*width matrix of rank <= ``rank`` whose columns sum to zero."""
    cols = 2 * width
    U = rng.integers(0, q, size=(rows, rank))
    V = rng.integers(0, q, size=(rank, cols))
    V[:, -1] = (-V[:, :-1].sum(axis=1)) % q
    T = (U @ V) % q
    return [[int(x) for x in row] for row in T]


@dataclass
class BaseLocusReport:
    config: dict
    q: int
    eta: int
    samples: int = 0
    agreements: int = 0
    vanish_and_member: int = 0
    vanish_not_member: int = 0
    member_not_vanish: int = 0
    neither: int = 0
    engineered: int = 0
    filtered_out: int = 0
    filtered_log: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)

    @property
    def failures(self) -> int:
        return self.samples - self.agreements

    def merge(self, other: "BaseLocusReport") -> "BaseLocusReport":
        for name in ("samples", "agreements", "vanish_and_member", "vanish_not_member",
                     "member_not_vanish", "neither", "engineered", "filtered_out"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.filtered_log.extend(other.filtered_log)
        self.witnesses.extend(other.witnesses)
        return self

    @property
    def agreement_rate(self) -> float:
        return self.agreements / self.samples if self.samples else 0.0

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "q": self.q,
            "eta": self.eta,
            "samples": self.samples,
            "agreements": self.agreements,
            "failures": self.failures,
            "vanish_and_member": self.vanish_and_member,
            "vanish_not_member": self.vanish_not_member,
            "member_not_vanish": self.member_not_vanish,
            "neither": self.neither,
            "engineered": self.engineered,
            "filtered_out": self.filtered_out,
            "filtered_log": self.filtered_log[:10],
            "witnesses": self.witnesses[:5],
            "verdict": "pass" if self.samples and not self.failures else "fail",
        }


def characterization_check(
    schedule: MCMSchedule,
    q: int,
    samples: int,
    seed: int,
    eta: int = 0,
    vsets=None,
    member_every: int = 2,
    start: int = 0,
    degenerate=(),
) -> BaseLocusReport:
    """Compare forms_vanish_at with membership of M(z, xi) in the M-family.

    Every ``member_every``-th sample is engineered so that M(z, xi) is a
    low-rank member; the others are generic pointed jets.  Draws whose H
    matrices are rank deficient at z are logged and replaced, at most
    MAX_RETRIES times per sample.  Sample k draws from its own block of
    generator streams, so any split of the sample range gives the same counts.
    For sample indices in ``degenerate`` the first draw is forced to make
    every H matrix rank deficient, which exercises the filter.
    """
    cfg = schedule.config
    if vsets is None:
        vsets = list(combinations(range(cfg.N + 1), eta))
    vsets = [tuple(v) for v in vsets]
    if any(len(v) != eta for v in vsets):
        raise SamplingFailed("vanishing sets do not match eta")
    L = cfg.N - eta
    spec = spec_M(L, 2 * cfg.c + cfg.r)
    rep = BaseLocusReport(cfg.to_dict(), q, eta)
    for k in range(start, start + samples):
        vset = vsets[k % len(vsets)]
        engineered = member_every and k % member_every == 0
        target = None
        if engineered:
            def target(rng, jet, _L=L):
                return low_rank_member(rng, 2 * cfg.c + cfg.r, _L + 1, _L - 1, q)
        for attempt in range(MAX_RETRIES + 1):
            stream = k * (MAX_RETRIES + 1) + attempt
            tgt = target
            if attempt == 0 and k in degenerate:
                def tgt(rng, jet):
                    return low_rank_member(rng, 2 * cfg.c + cfg.r, L + 1, cfg.e - 1, q)
            smp: PointedSample = next(pointed_sampler(schedule, q, seed, 1, vset, target=tgt, start=stream))
            M = collapsed_matrix(smp.system, smp.jet, vset)
            if generic_at(M, cfg.e, q):
                break
            rep.filtered_out += 1
            rep.filtered_log.append({"sample": k, "stream_index": smp.index})
        else:
            raise SamplingFailed(f"sample {k}: no generic draw after {MAX_RETRIES} retries")
        vanish = forms_vanish_at(smp.system, smp.jet, vset)
        member = membership(M, spec, q)
        rep.samples += 1
        rep.engineered += bool(engineered)
        if vanish and member:
            rep.vanish_and_member += 1
        elif vanish:
            rep.vanish_not_member += 1
        elif member:
            rep.member_not_vanish += 1
        else:
            rep.neither += 1
        if vanish == member:
            rep.agreements += 1
        else:
            rep.witnesses.append({"sample": k, "vanishing": list(vset), "forms_vanish": vanish,
                                  "member": member, "jet": smp.jet.to_dict()})
    return rep


def full_rank_H_check(
    schedule: MCMSchedule,
    q: int,
    samples: int,
    seed: int,
    eta: int = 0,
    zero_moving: bool = False,
    allow_small_q: bool = False,
    start: int = 0,
) -> dict:
    """Rank statistics of H, H^nu, H^{tau,rho} at pointed points of X, plus the column-sum identity."""
    cfg = schedule.config
    vsets = list(combinations(range(cfg.N + 1), eta))
    full = {"H": 0, "H^nu": 0, "H^tau,rho": 0, "all": 0}
    column_sum_failures = 0
    for k in range(start, start + samples):
        vset = vsets[k % len(vsets)]
        smp = next(pointed_sampler(schedule, q, seed, 1, vset, zero_moving=zero_moving,
                                   allow_small_q=allow_small_q, start=k))
        M = collapsed_matrix(smp.system, smp.jet, vset)
        w = len(M[0]) // 2
        if any(sum(row) % q for row in M):
            column_sum_failures += 1
        alpha = [row[:w] for row in M[: cfg.e]]
        ok_h = rank_mod(alpha, q) == cfg.e
        ranks = h_ranks(M, cfg.e, q)
        ok_nu = all(rk == cfg.e for var, rk in ranks.items() if var[0] == "first")
        ok_tr = all(rk == cfg.e for var, rk in ranks.items() if var[0] == "second")
        full["H"] += ok_h
        full["H^nu"] += ok_nu
        full["H^tau,rho"] += ok_tr
        full["all"] += ok_h and ok_nu and ok_tr
    return _full_rank_summary(cfg.to_dict(), q, eta, zero_moving, samples, full, column_sum_failures)


def _full_rank_summary(config, q, eta, zero_moving, samples, full, column_sum_failures) -> dict:
    fail_all = samples - full["all"]
    return {
        "config": config,
        "q": q,
        "eta": eta,
        "zero_moving": zero_moving,
        "samples": samples,
        "full_rank": full,
        "fraction_full_rank": {k: v / samples for k, v in full.items()} if samples else {},
        "failure_rate": fail_all / samples if samples else None,
        "K_estimate": fail_all * q / samples if samples else None,
        "column_sum_failures": column_sum_failures,
    }


def merge_full_rank(parts: list) -> dict:
    """Combine full_rank_H_check results over disjoint sample ranges."""
    first = parts[0]
    full = {k: sum(p["full_rank"][k] for p in parts) for k in first["full_rank"]}
    return _full_rank_summary(first["config"], first["q"], first["eta"], first["zero_moving"],
                              sum(p["samples"] for p in parts), full,
                              sum(p["column_sum_failures"] for p in parts))


def duplicate_row_rank(schedule: MCMSchedule, q: int, seed: int) -> int:
    """Rank of H when the second equation copies the first (always below c+r)."""
    cfg = schedule.config
    smp = next(pointed_sampler(schedule, q, seed, 1))
    sys_ = smp.system
    A = list(sys_.A)
    M = list(sys_.M)
    A[1], M[1] = A[0], M[0]
    F = list(sys_.F)
    F[1] = F[0]
    dup = HypersurfaceSystem(sys_.schedule, sys_.ring, sys_.seed, tuple(A), tuple(M), tuple(F),
                             sys_.term_exps, sys_.zero_moving, sys_.improved)
    Mz = collapsed_matrix(dup, smp.jet)
    w = len(Mz[0]) // 2
    return rank_mod([row[:w] for row in Mz[: cfg.e]], q)


__all__ = [
    "merge_full_rank",
    "BaseLocusReport",
    "collapsed_matrix",
    "k_columns",
    "h_ranks",
    "generic_at",
    "forms_vanish_at",
    "low_rank_member",
    "characterization_check",
    "full_rank_H_check",
    "duplicate_row_rank",
]
