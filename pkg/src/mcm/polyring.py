"""Sparse multivariate polynomials over F_q, Z or Q, with formal differentials.

A :class:`PolyRing` has variables z_0..z_{n-1} and, when ``forms`` is set,
commuting differential symbols dz_0..dz_{n-1}.  Exponent vectors list the
z-block first, then the dz-block.  Monomials are ordered graded
lexicographically on that vector; iteration and text output follow the
descending order, so serialization is canonical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from sympy import isprime

from .errors import (
    ArityError,
    DivisionNotExact,
    InvalidConfig,
    InvalidGrade,
    NotHomogeneous,
    RingMismatch,
)


# ---------------------------------------------------------------- coefficient rings


@dataclass(frozen=True)
class Ring:
    """Coefficient ring: ``fp`` (prime field F_q), ``zz`` (integers) or ``qq`` (rationals)."""

    kind: str
    q: int | None = None

    def __post_init__(self):
        if self.kind == "fp":
            if not isinstance(self.q, int) or self.q < 2 or self.q > 2**31 or not isprime(self.q):
                raise InvalidConfig(f"F_q needs a prime q <= 2^31, got {self.q!r}")
        elif self.kind in ("zz", "qq"):
            if self.q is not None:
                raise InvalidConfig("q is only meaningful for prime fields")
        else:
            raise InvalidConfig(f"unknown ring kind {self.kind!r}")

    @staticmethod
    def prime_field(q: int) -> "Ring":
        return Ring("fp", q)

    @staticmethod
    def integers() -> "Ring":
        return Ring("zz")

    @staticmethod
    def rationals() -> "Ring":
        return Ring("qq")

    @property
    def is_field(self) -> bool:
        return self.kind != "zz"

    def __str__(self) -> str:
        return {"fp": f"F_{self.q}", "zz": "ZZ", "qq": "QQ"}[self.kind]

    def coerce(self, x):
        if self.kind == "fp":
            if isinstance(x, Fraction):
                return x.numerator * pow(x.denominator, -1, self.q) % self.q
            return int(x) % self.q
        if self.kind == "zz":
            if isinstance(x, Fraction):
                if x.denominator != 1:
                    raise RingMismatch(f"{x} is not an integer")
                return x.numerator
            return int(x)
        return Fraction(x)

    def divide(self, a, b):
        """a / b when the quotient exists in the ring."""
        if b == 0:
            raise DivisionNotExact("division by zero")
        if self.kind == "fp":
            return a * pow(b, -1, self.q) % self.q
        if self.kind == "qq":
            return Fraction(a) / b
        if a % b:
            raise DivisionNotExact(f"{a} is not divisible by {b} in ZZ")
        return a // b

    def coeff_text(self, c) -> str:
        return str(c)

    def parse_coeff(self, s: str):
        s = s.strip()
        if "/" in s:
            return self.coerce(Fraction(s))
        return self.coerce(int(s))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "q": self.q}

    @staticmethod
    def from_dict(d: dict) -> "Ring":
        return Ring(d["kind"], d.get("q"))


@dataclass(frozen=True)
class PolyRing:
    """Polynomial ring in z_0..z_{n-1}, optionally with dz_0..dz_{n-1}."""

    coeff: Ring
    n: int
    forms: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise InvalidConfig("at least one variable is required")

    @property
    def nvars(self) -> int:
        return 2 * self.n if self.forms else self.n

    def with_forms(self) -> "PolyRing":
        return PolyRing(self.coeff, self.n, True)

    def zero(self) -> "MultiPoly":
        return MultiPoly(self, {})

    def one(self) -> "MultiPoly":
        return self.const(1)

    def const(self, c) -> "MultiPoly":
        return MultiPoly(self, {(0,) * self.nvars: c})

    def z(self, i: int) -> "MultiPoly":
        return self.monomial(_unit(self.nvars, i))

    def dz(self, i: int) -> "MultiPoly":
        if not self.forms:
            raise InvalidGrade("dz variables need a form-graded ring")
        return self.monomial(_unit(self.nvars, self.n + i))

    def monomial(self, exps, c=1) -> "MultiPoly":
        exps = tuple(exps)
        if len(exps) != self.nvars:
            raise ArityError(f"exponent vector of length {len(exps)}, ring has {self.nvars} variables")
        return MultiPoly(self, {exps: c})

    def z_monomial(self, zexps, c=1) -> "MultiPoly":
        """Monomial with the given z exponents and no dz factor."""
        zexps = tuple(zexps)
        if len(zexps) != self.n:
            raise ArityError(f"expected {self.n} z exponents")
        return self.monomial(zexps + (0,) * (self.nvars - self.n), c)

    def var_names(self) -> list[str]:
        names = [f"z{i}" for i in range(self.n)]
        if self.forms:
            names += [f"dz{i}" for i in range(self.n)]
        return names

    def to_dict(self) -> dict:
        return {"ring": self.coeff.to_dict(), "n": self.n, "forms": self.forms}

    @staticmethod
    def from_dict(d: dict) -> "PolyRing":
        return PolyRing(Ring.from_dict(d["ring"]), d["n"], d["forms"])


def _unit(n: int, i: int) -> tuple:
    return tuple(1 if k == i else 0 for k in range(n))


def _order_key(exps: tuple) -> tuple:
    return (sum(exps), exps)


@lru_cache(maxsize=4096)
def homogeneous_monomials(n: int, degree: int) -> tuple:
    """All exponent vectors of length n and total degree ``degree``, descending order."""
    out = []

    def rec(prefix, left, slots):
        if slots == 1:
            out.append(prefix + (left,))
            return
        for e in range(left, -1, -1):
            rec(prefix + (e,), left - e, slots - 1)

    rec((), degree, n)
    return tuple(out)


# ---------------------------------------------------------------- polynomials


class MultiPoly:
    """Immutable sparse polynomial; ``terms`` maps exponent tuples to nonzero coefficients."""

    __slots__ = ("ring", "_terms", "_hash")

    def __init__(self, ring: PolyRing, terms: dict | None = None):
        self.ring = ring
        cr = ring.coeff
        clean = {}
        for exps, c in (terms or {}).items():
            if len(exps) != ring.nvars:
                raise ArityError(f"exponent vector {exps} does not match {ring.nvars} variables")
            c = cr.coerce(c)
            if c != 0:
                clean[tuple(exps)] = c
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, ring: PolyRing, terms: dict) -> "MultiPoly":
        obj = cls.__new__(cls)
        obj.ring = ring
        obj._terms = terms
        obj._hash = None
        return obj

    # -- basic structure

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        """Terms in canonical (descending graded-lex) order."""
        return sorted(self._terms.items(), key=lambda t: _order_key(t[0]), reverse=True)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, MultiPoly):
            return self.ring == other.ring and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == self.ring.const(other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.ring, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"MultiPoly[{self.ring.coeff}]({self.to_text()})"

    def _check(self, other: "MultiPoly") -> None:
        if not isinstance(other, MultiPoly):
            raise RingMismatch(f"cannot combine MultiPoly with {type(other).__name__}")
        if other.ring != self.ring:
            raise RingMismatch(f"{self.ring} vs {other.ring}")

    def _lift(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)):
            return self.ring.const(other)
        raise RingMismatch(f"cannot combine MultiPoly with {type(other).__name__}")

    # -- arithmetic

    def __add__(self, other) -> "MultiPoly":
        other = self._lift(other)
        cr = self.ring.coeff
        out = dict(self._terms)
        for e, c in other._terms.items():
            v = cr.coerce(out.get(e, 0) + c)
            if v:
                out[e] = v
            else:
                out.pop(e, None)
        return MultiPoly._raw(self.ring, out)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        cr = self.ring.coeff
        return MultiPoly._raw(self.ring, {e: cr.coerce(-c) for e, c in self._terms.items()})

    def __sub__(self, other) -> "MultiPoly":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "MultiPoly":
        return self._lift(other) - self

    def __mul__(self, other) -> "MultiPoly":
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._lift(other)
        out: dict = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return MultiPoly(self.ring, out)

    __rmul__ = __mul__

    def scale(self, c) -> "MultiPoly":
        cr = self.ring.coeff
        c = cr.coerce(c)
        if c == 0:
            return self.ring.zero()
        return MultiPoly._raw(self.ring, {e: cr.coerce(v * c) for e, v in self._terms.items()})

    def __pow__(self, k: int) -> "MultiPoly":
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        result = self.ring.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def mul_monomial(self, exps, c=1) -> "MultiPoly":
        """Multiply by c * x^exps without general convolution."""
        exps = tuple(exps)
        if len(exps) != self.ring.nvars:
            raise ArityError("monomial arity mismatch")
        cr = self.ring.coeff
        c = cr.coerce(c)
        if c == 0:
            return self.ring.zero()
        return MultiPoly._raw(
            self.ring,
            {tuple(a + b for a, b in zip(e, exps)): cr.coerce(v * c) for e, v in self._terms.items()},
        )

    def mul_z_power(self, j: int, k: int) -> "MultiPoly":
        exps = [0] * self.ring.nvars
        exps[j] = k
        return self.mul_monomial(exps)

    # -- order and degree

    def leading_term(self) -> tuple:
        if not self._terms:
            raise DivisionNotExact("zero polynomial has no leading term")
        e = max(self._terms, key=_order_key)
        return e, self._terms[e]

    def z_degrees(self) -> set:
        n = self.ring.n
        return {sum(e[:n]) for e in self._terms}

    def dz_degrees(self) -> set:
        n = self.ring.n
        return {sum(e[n:]) for e in self._terms}

    def total_degree(self) -> int:
        return max((sum(e) for e in self._terms), default=0)

    def is_homogeneous(self, degree: int | None = None, z_only: bool = False) -> bool:
        n = self.ring.n
        degs = {sum(e[:n]) if z_only else sum(e) for e in self._terms}
        if not degs:
            return True
        if len(degs) > 1:
            return False
        return degree is None or degs == {degree}

    def homogeneous_degree(self, z_only: bool = False) -> int | None:
        """The common degree, or None for the zero polynomial; raises if inhomogeneous."""
        n = self.ring.n
        degs = {sum(e[:n]) if z_only else sum(e) for e in self._terms}
        if len(degs) > 1:
            raise NotHomogeneous(f"degrees {sorted(degs)} present")
        return next(iter(degs), None)

    def form_degree(self) -> int:
        """Common dz-degree; the zero polynomial has form degree 0 by convention."""
        degs = self.dz_degrees()
        if len(degs) > 1:
            raise InvalidGrade(f"mixed form degrees {sorted(degs)}")
        return next(iter(degs), 0)

    # -- division

    def divides_monomially(self, exps) -> bool:
        return all(all(a >= b for a, b in zip(e, exps)) for e in self._terms)

    def exact_divide(self, other) -> "MultiPoly":
        """Exact quotient; raises DivisionNotExact on a nonzero remainder."""
        other = self._lift(other)
        if other.is_zero():
            raise DivisionNotExact("division by the zero polynomial")
        cr = self.ring.coeff
        if len(other) == 1:
            (exps, c), = other._terms.items()
            out = {}
            for e, v in self._terms.items():
                if any(a < b for a, b in zip(e, exps)):
                    raise DivisionNotExact(f"monomial {e} not divisible by {exps}")
                out[tuple(a - b for a, b in zip(e, exps))] = cr.divide(v, c)
            return MultiPoly._raw(self.ring, out)
        lt_e, lt_c = other.leading_term()
        rem = self
        quot: dict = {}
        while rem:
            e, c = rem.leading_term()
            if any(a < b for a, b in zip(e, lt_e)):
                raise DivisionNotExact("leading term of the remainder is not divisible")
            qe = tuple(a - b for a, b in zip(e, lt_e))
            qc = cr.divide(c, lt_c)
            quot[qe] = qc
            rem = rem - other.mul_monomial(qe, qc)
        return MultiPoly(self.ring, quot)

    def divide_by_z_power(self, j: int, k: int) -> "MultiPoly":
        exps = [0] * self.ring.nvars
        exps[j] = k
        return self.exact_divide(self.ring.monomial(exps))

    # -- grading and differentials

    def lift_to_forms(self) -> "MultiPoly":
        """Embed a z-only polynomial into the form-graded ring (form degree 0)."""
        if self.ring.forms:
            return self
        fr = self.ring.with_forms()
        pad = (0,) * self.ring.n
        return MultiPoly._raw(fr, {e + pad: c for e, c in self._terms.items()})

    def formal_differential(self) -> "MultiPoly":
        return formal_differential(self)

    def partial(self, j: int) -> "MultiPoly":
        """Partial derivative in z_j."""
        cr = self.ring.coeff
        out: dict = {}
        for e, c in self._terms.items():
            if e[j]:
                ne = list(e)
                ne[j] -= 1
                v = cr.coerce(c * e[j])
                if v:
                    out[tuple(ne)] = v
        return MultiPoly._raw(self.ring, out)

    # -- evaluation

    def evaluate(self, z, xi=None):
        return evaluate(self, z, xi)

    def value_and_gradient(self, z) -> tuple:
        """(P(z), [dP/dz_j (z)]) over F_q, without building derivative polynomials."""
        return value_and_gradient(self, z)

    def substitute_z(self, j: int, value) -> "MultiPoly":
        """Set z_j to a constant (dz_j untouched)."""
        cr = self.ring.coeff
        out: dict = {}
        for e, c in self._terms.items():
            ne = list(e)
            k = ne[j]
            ne[j] = 0
            v = c * (cr.coerce(value) ** k if cr.kind != "fp" else pow(cr.coerce(value), k, cr.q))
            ne = tuple(ne)
            out[ne] = out.get(ne, 0) + v
        return MultiPoly(self.ring, out)

    def change_ring(self, ring: PolyRing) -> "MultiPoly":
        if ring.nvars != self.ring.nvars:
            raise RingMismatch("variable counts differ")
        return MultiPoly(ring, self._terms)

    # -- text

    def to_text(self) -> str:
        return to_text(self)


def formal_differential(P: MultiPoly) -> MultiPoly:
    """dP = sum_j (dP/dz_j) dz_j as a form of degree 1."""
    n = P.ring.n
    if P.ring.forms and any(sum(e[n:]) for e in P._terms):
        raise InvalidGrade("formal_differential expects a form of degree 0")
    src = P.lift_to_forms()
    fr = src.ring
    cr = fr.coeff
    out: dict = {}
    for e, c in src._terms.items():
        for j in range(n):
            if e[j]:
                ne = list(e)
                ne[j] -= 1
                ne[n + j] += 1
                ne = tuple(ne)
                out[ne] = out.get(ne, 0) + c * e[j]
    return MultiPoly(fr, {k: cr.coerce(v) for k, v in out.items()})


def d_of_form(P: MultiPoly) -> MultiPoly:
    """Differential of a 0-form already living in the form ring (same as formal_differential)."""
    return formal_differential(P)


def substitute_dz_by_z(P: MultiPoly) -> MultiPoly:
    """Replace every dz_j by z_j; the result lives in the z-only ring."""
    n = P.ring.n
    zr = PolyRing(P.ring.coeff, n, False)
    if not P.ring.forms:
        return P
    out: dict = {}
    for e, c in P._terms.items():
        ne = tuple(e[j] + e[n + j] for j in range(n))
        out[ne] = out.get(ne, 0) + c
    return MultiPoly(zr, out)


def euler_residual(P: MultiPoly) -> MultiPoly:
    """dP(z)(z) - deg(P) * P; zero for every homogeneous P."""
    n = P.ring.n
    if P.ring.forms and any(sum(e[n:]) for e in P._terms):
        raise InvalidGrade("euler_residual expects a form of degree 0")
    g = P.homogeneous_degree(z_only=True)
    base = P if not P.ring.forms else substitute_dz_by_z(P)
    if g is None:
        return base.ring.zero()
    return substitute_dz_by_z(formal_differential(P)) - base.scale(g)


def evaluate(P: MultiPoly, z, xi=None):
    """Evaluate at z (and dz := xi when form-graded)."""
    R = P.ring
    n = R.n
    if len(z) != n:
        raise ArityError(f"point has {len(z)} coordinates, ring has {n}")
    has_dz = R.forms and any(sum(e[n:]) for e in P._terms)
    if has_dz:
        if xi is None:
            raise ArityError("a tangent vector is needed to evaluate a form of positive degree")
        if len(xi) != n:
            raise ArityError(f"tangent vector has {len(xi)} coordinates, ring has {n}")
    cr = R.coeff
    pt = [cr.coerce(v) for v in z]
    if R.forms:
        pt += [cr.coerce(v) for v in (xi if xi is not None else [0] * n)]
    total = 0
    if cr.kind == "fp":
        q = cr.q
        for e, c in P._terms.items():
            t = c
            for v, k in zip(pt, e):
                if k:
                    t = t * pow(v, k, q) % q
            total += t
        return total % q
    for e, c in P._terms.items():
        t = c
        for v, k in zip(pt, e):
            if k:
                t *= v**k
        total += t
    return cr.coerce(total)


def value_and_gradient(P: MultiPoly, z) -> tuple:
    """Value and z-gradient at a point over F_q (z-only polynomials)."""
    R = P.ring
    n = R.n
    cr = R.coeff
    if cr.kind != "fp":
        val = evaluate(P, z)
        return val, [evaluate(P.partial(j), z) for j in range(n)]
    if len(z) != n:
        raise ArityError(f"point has {len(z)} coordinates, ring has {n}")
    q = cr.q
    pt = [v % q for v in z]
    val = 0
    grad = [0] * n
    for e, c in P._terms.items():
        pows = [pow(pt[j], e[j] - 1, q) if e[j] else 1 for j in range(n)]
        full = [pows[j] * pt[j] % q if e[j] else 1 for j in range(n)]
        prod_all = c
        for f in full:
            prod_all = prod_all * f % q
        val += prod_all
        for j in range(n):
            if e[j]:
                t = c * e[j] % q * pows[j] % q
                for k in range(n):
                    if k != j:
                        t = t * full[k] % q
                grad[j] += t
    return val % q, [g % q for g in grad]


# ---------------------------------------------------------------- text format

_TERM_RE = re.compile(r"^(d?z)(\d+)(?:\^(\d+))?$")


def to_text(P: MultiPoly) -> str:
    """Canonical ``coeff*z0^a0*...*dz0^b0`` terms joined by ``+``."""
    if P.is_zero():
        return "0"
    names = P.ring.var_names()
    parts = []
    for e, c in P.items():
        factors = [P.ring.coeff.coeff_text(c)]
        for name, k in zip(names, e):
            if k == 1:
                factors.append(name)
            elif k > 1:
                factors.append(f"{name}^{k}")
        parts.append("*".join(factors))
    return "+".join(parts)


def from_text(text: str, ring: PolyRing) -> MultiPoly:
    text = text.strip()
    if text == "0":
        return ring.zero()
    n = ring.n
    terms: dict = {}
    for part in _split_terms(text):
        factors = part.split("*")
        coeff = ring.coeff.parse_coeff(factors[0]) if not _TERM_RE.match(factors[0]) else 1
        start = 1 if not _TERM_RE.match(factors[0]) else 0
        exps = [0] * ring.nvars
        for f in factors[start:]:
            m = _TERM_RE.match(f.strip())
            if not m:
                raise ValueError(f"cannot parse factor {f!r}")
            kind, idx, k = m.group(1), int(m.group(2)), int(m.group(3) or 1)
            if idx >= n or (kind == "dz" and not ring.forms):
                raise ArityError(f"variable {kind}{idx} not in ring")
            exps[idx + (n if kind == "dz" else 0)] += k
        e = tuple(exps)
        terms[e] = terms.get(e, 0) + coeff
    return MultiPoly(ring, terms)


def _split_terms(text: str) -> list[str]:
    # '+' separates terms; a '-' sign belongs to the coefficient that follows it
    return [p for p in text.split("+") if p.strip()]
