"""Equation/differential matrices and their determinantal symmetric forms.

A Fermat-type presentation F_i = sum_p G_i^p z_{c_p}^{lambda_p} (columns c_p)
gives the value entries G_i^p z_{c_p} and the differential entries
z_{c_p} dG_i^p + lambda_p G_i^p dz_{c_p}.  Deleting one column of the
square-after-deletion matrix and dividing by z^{lambda-1} of that column
gives the chart expression of a twisted symmetric form.

Symbolic matrices live in the form-graded ring (dz variables commute, so a
degree-m form is a polynomial of dz-degree m).  The identity checks work
numerically over F_q at jet points, which is exact field arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    InvalidJet,
    InvalidSelection,
    SamplingFailed,
    ShapeError,
)
from .ffield import det_mod, rank_mod, solve_affine
from .hypersurfaces import (
    HypersurfaceSystem,
    RewrittenSystem,
    all_rewrites,
    check_characteristic,
    row_layouts,
    system_from_vectors,
)
from .polyring import MultiPoly, PolyRing, Ring, formal_differential, value_and_gradient
from .schedule import MCMSchedule, twist_degree


# ---------------------------------------------------------------- Fermat presentations


@dataclass(frozen=True)
class FermatData:
    """F_i = sum_p coeffs[i][p] * z_{columns[p]}^{lambdas[p]}, up to terms of order >= 2 in pinned coordinates.

    ``degrees[i]`` is deg F_i, ``c`` the number of rows whose differentials
    are used and ``vanishing`` the coordinates pinned to zero.
    """

    ring: PolyRing
    columns: tuple
    lambdas: tuple
    coeffs: tuple
    degrees: tuple
    c: int
    vanishing: tuple = ()
    variant: tuple = ("fermat",)

    @property
    def rows(self) -> int:
        return len(self.coeffs)

    @property
    def width(self) -> int:
        return len(self.columns)

    @property
    def n_forms(self) -> int:
        """Form degree of the standard construction: width - 1 - rows."""
        return self.width - 1 - self.rows


def fermat_from_rewrite(rw: RewrittenSystem, system: HypersurfaceSystem) -> FermatData:
    """Fermat-type presentation of a first- or second-kind rewrite (residues dropped)."""
    if rw.variant[0] not in ("first", "second"):
        raise InvalidSelection("only first- and second-kind rewrites are of Fermat type")
    cfg = system.config
    degs = tuple(system.schedule.d + e for e in cfg.epsilons)
    return FermatData(system.ring, tuple(rw.columns), tuple(rw.lambdas),
                      tuple(tuple(row) for row in rw.coeffs), degs, cfg.c,
                      tuple(rw.vanishing), tuple(rw.variant))


def fermat_from_blocks(ring: PolyRing, coeffs, lambdas, c: int, degrees=None) -> FermatData:
    """Presentation from explicit coefficient blocks (rows x (N+1)) over all columns."""
    coeffs = tuple(tuple(ring.const(x) if not isinstance(x, MultiPoly) else x for x in row) for row in coeffs)
    lambdas = tuple(lambdas)
    if any(len(row) != len(lambdas) for row in coeffs):
        raise ShapeError("every row needs one block per column")
    if degrees is None:
        degrees = []
        for row in coeffs:
            ds = {P.homogeneous_degree() + lam for P, lam in zip(row, lambdas) if P}
            if len(ds) != 1:
                raise ShapeError("row is not homogeneous")
            degrees.append(ds.pop())
    return FermatData(ring, tuple(range(len(lambdas))), lambdas, coeffs, tuple(degrees), c)


def heart(fd: FermatData, rows_i=None, rows_j=None) -> int:
    """Twist degree of the forms built from the selected rows (1-based)."""
    rows_i, rows_j = _selection(fd, rows_i, rows_j)
    return (sum(fd.degrees[i - 1] for i in rows_i) + sum(fd.degrees[j - 1] for j in rows_j)
            - sum(fd.lambdas) + fd.width)


def _selection(fd: FermatData, rows_i, rows_j):
    rows_i = tuple(range(1, fd.rows + 1)) if rows_i is None else tuple(rows_i)
    if rows_j is None:
        k = fd.width - 1 - len(rows_i)
        rows_j = tuple(range(1, k + 1))
    rows_j = tuple(rows_j)
    if any(not 1 <= i <= fd.rows for i in rows_i) or any(not 1 <= j <= fd.c for j in rows_j):
        raise InvalidSelection("row selection out of range")
    if not set(rows_j) <= set(rows_i):
        raise InvalidSelection("differential rows must be among the value rows")
    if list(rows_i) != sorted(set(rows_i)) or list(rows_j) != sorted(set(rows_j)):
        raise InvalidSelection("row selections must be strictly increasing")
    return rows_i, rows_j


# ---------------------------------------------------------------- symbolic matrices


@dataclass(frozen=True)
class FormMatrix:
    """Rows of 0-forms then 1-forms over the surviving columns."""

    tag: str
    entries: tuple
    rows_i: tuple
    rows_j: tuple
    columns: tuple
    lambdas: tuple

    @property
    def shape(self) -> tuple:
        return (len(self.entries), len(self.columns))

    def column(self, p: int) -> tuple:
        return tuple(row[p] for row in self.entries)

    def evaluate(self, z, xi) -> list:
        from .polyring import evaluate
        return [[evaluate(P, z, xi) for P in row] for row in self.entries]


def _value_entry(G: MultiPoly, col: int, lam: int, literal: bool) -> MultiPoly:
    return G.lift_to_forms().mul_z_power(col, lam if literal else 1)


def _diff_entry(G: MultiPoly, col: int, lam: int, literal: bool) -> MultiPoly:
    Gf = G.lift_to_forms()
    if literal:
        return formal_differential(G.mul_z_power(col, lam))
    fr = Gf.ring
    return formal_differential(G).mul_z_power(col, 1) + Gf.scale(lam) * fr.dz(col)


TAGS = ("C", "D", "K", "K^nu", "K^tau,rho", "H")


def build_matrix(source, tag: str = "D", rows_i=None, rows_j=None, system=None) -> FormMatrix:
    """Build a C, D, K (or K^nu, K^tau,rho, H) matrix.

    ``source`` is a :class:`FermatData` or a :class:`RewrittenSystem` (then
    ``system`` is required).  C and K use every value row and the first c
    differential rows; D uses the given selection (default: all value rows
    and enough differential rows to make it one column short of square).
    K entries copy the literal terms G z^lambda and their differentials.
    H keeps the value rows of K only.
    """
    if tag not in TAGS:
        raise InvalidSelection(f"unknown tag {tag!r}")
    if isinstance(source, RewrittenSystem):
        if system is None:
            raise InvalidSelection("a rewritten system needs its source system")
        fd = fermat_from_rewrite(source, system)
    else:
        fd = source
    kind = fd.variant[0]
    if tag == "K^nu" and kind != "first":
        raise InvalidSelection("K^nu needs a first-kind rewrite")
    if tag == "K^tau,rho" and kind != "second":
        raise InvalidSelection("K^tau,rho needs a second-kind rewrite")
    if tag in ("C", "K", "K^nu", "K^tau,rho", "H"):
        rows_i = tuple(range(1, fd.rows + 1)) if rows_i is None else tuple(rows_i)
        rows_j = () if tag == "H" else (tuple(range(1, fd.c + 1)) if rows_j is None else tuple(rows_j))
    else:
        rows_i, rows_j = _selection(fd, rows_i, rows_j)
    literal = tag.startswith("K") or tag == "H"
    entries = []
    for i in rows_i:
        entries.append(tuple(_value_entry(G, col, lam, literal)
                             for G, col, lam in zip(fd.coeffs[i - 1], fd.columns, fd.lambdas)))
    for j in rows_j:
        entries.append(tuple(_diff_entry(G, col, lam, literal)
                             for G, col, lam in zip(fd.coeffs[j - 1], fd.columns, fd.lambdas)))
    return FormMatrix(tag, tuple(entries), rows_i, tuple(rows_j), fd.columns, fd.lambdas)


def proportionality_residuals(C: FormMatrix, K: FormMatrix) -> list:
    """K_p - C_p * z^{lambda_p - 1} for every column; all zero when (C, K) come from the same data."""
    if C.shape != K.shape or C.columns != K.columns:
        raise ShapeError("matrices do not match")
    out = []
    for p, (col, lam) in enumerate(zip(C.columns, C.lambdas)):
        res = [k - c.mul_z_power(col, lam - 1) for c, k in zip(C.column(p), K.column(p))]
        out.append(res)
    return out


def det_symbolic(rows) -> MultiPoly:
    """Determinant over the (commutative) form ring by expansion along minors of trailing rows."""
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ShapeError("square matrix required")
    if n == 0:
        raise ShapeError("empty matrix")
    ring = rows[0][0].ring
    # minors[S] = det of the last len(S) rows restricted to columns S
    minors = {(): ring.one()}
    for depth in range(1, n + 1):
        r = n - depth
        new = {}
        for S in combinations(range(n), depth):
            acc = ring.zero()
            for pos, col in enumerate(S):
                entry = rows[r][col]
                if not entry:
                    continue
                rest = S[:pos] + S[pos + 1:]
                term = entry * minors[rest]
                acc = acc - term if pos % 2 else acc + term
            new[S] = acc
        minors = new
    return minors[tuple(range(n))]


@dataclass(frozen=True)
class SymForm:
    """numerator / z_{col}^{exp}: a rational chart expression of a symmetric form."""

    numerator: MultiPoly
    denom_col: int
    denom_exp: int

    def evaluate(self, z, xi):
        from .polyring import evaluate
        cr = self.numerator.ring.coeff
        if cr.kind != "fp":
            raise InvalidJet("numeric evaluation needs a prime field")
        q = cr.q
        if z[self.denom_col] % q == 0:
            raise InvalidJet(f"z_{self.denom_col} vanishes at this point")
        num = evaluate(self.numerator, z, xi)
        return num * pow(pow(z[self.denom_col], self.denom_exp, q), -1, q) % q

    def twist(self) -> int | None:
        """Weight under (z, xi) -> (t z, t xi); None for the zero form."""
        if not self.numerator:
            return None
        return self.numerator.homogeneous_degree() - self.denom_exp

    def form_degree(self) -> int:
        return self.numerator.form_degree()


def omega_hat(matrix: FormMatrix, p: int) -> SymForm:
    """(-1)^p det(matrix without column p) / z_{col_p}^{lambda_p - 1}."""
    nr, nc = matrix.shape
    if nr != nc - 1:
        raise ShapeError(f"need one more column than rows, got {nr}x{nc}")
    if not 0 <= p < nc:
        raise InvalidSelection(f"column position {p} out of range")
    sub = [[row[t] for t in range(nc) if t != p] for row in matrix.entries]
    det = det_symbolic(sub)
    if p % 2:
        det = -det
    return SymForm(det, matrix.columns[p], matrix.lambdas[p] - 1)


# ---------------------------------------------------------------- numeric evaluation


@dataclass(frozen=True)
class JetPoint:
    z: tuple
    xi: tuple
    q: int

    def nonzero(self) -> tuple:
        return tuple(bool(v % self.q) for v in self.z)

    def independent(self) -> bool:
        return rank_mod([list(self.z), list(self.xi)], self.q) == 2

    def scaled(self, t: int) -> "JetPoint":
        q = self.q
        return JetPoint(tuple(v * t % q for v in self.z), tuple(v * t % q for v in self.xi), q)

    def shifted(self, t: int) -> "JetPoint":
        q = self.q
        return JetPoint(self.z, tuple((a + t * b) % q for a, b in zip(self.xi, self.z)), q)

    def to_dict(self) -> dict:
        return {"z": list(self.z), "xi": list(self.xi), "q": self.q}


class NumericEvaluator:
    """Values and directional derivatives of every block of ``fd`` at one jet."""

    def __init__(self, fd: FermatData, jet: JetPoint):
        if fd.ring.coeff.kind != "fp" or fd.ring.coeff.q != jet.q:
            raise InvalidJet("jet and presentation live over different fields")
        self.fd = fd
        self.jet = jet
        q = jet.q
        self.val = []
        self.dval = []
        for row in fd.coeffs:
            vr, dr = [], []
            for G in row:
                v, g = value_and_gradient(G, jet.z)
                vr.append(v)
                dr.append(sum(a * b for a, b in zip(g, jet.xi)) % q)
            self.val.append(vr)
            self.dval.append(dr)

    def value_entry(self, i: int, p: int, literal: bool = False) -> int:
        q = self.jet.q
        col, lam = self.fd.columns[p], self.fd.lambdas[p]
        return self.val[i - 1][p] * pow(self.jet.z[col], lam if literal else 1, q) % q

    def diff_entry(self, i: int, p: int, literal: bool = False) -> int:
        q = self.jet.q
        col, lam = self.fd.columns[p], self.fd.lambdas[p]
        z, xi = self.jet.z, self.jet.xi
        B = (z[col] * self.dval[i - 1][p] + lam * self.val[i - 1][p] * xi[col]) % q
        return B * pow(z[col], lam - 1, q) % q if literal else B

    def matrix(self, rows_i, rows_j, literal: bool = False) -> list:
        w = self.fd.width
        out = [[self.value_entry(i, p, literal) for p in range(w)] for i in rows_i]
        out += [[self.diff_entry(j, p, literal) for p in range(w)] for j in rows_j]
        return out

    def chart_matrix(self, rows_i, rows_j, chart: int) -> list:
        """Dehomogenized matrix in the chart z_{columns[chart]} != 0.

        Value entries are (G z)(z) / z_c^{d_i - lambda + 1}; differential
        entries B / z_c^{d_i - lambda + 1} - d_i (xi_c / z_c) times the
        dehomogenized value entry.
        """
        q = self.jet.q
        fd = self.fd
        c = fd.columns[chart]
        zc = self.jet.z[c] % q
        if not zc:
            raise InvalidJet(f"z_{c} vanishes at this point")
        inv = pow(zc, -1, q)
        rows = []
        for i in rows_i:
            di = fd.degrees[i - 1]
            rows.append([self.value_entry(i, p) * pow(inv, di - fd.lambdas[p] + 1, q) % q
                         for p in range(fd.width)])
        for j in rows_j:
            dj = fd.degrees[j - 1]
            row = []
            for p in range(fd.width):
                scale = pow(inv, dj - fd.lambdas[p] + 1, q)
                a = self.value_entry(j, p) * scale % q
                b = self.diff_entry(j, p) * scale % q
                row.append((b - dj * self.jet.xi[c] * inv % q * a) % q)
            rows.append(row)
        return rows


def _minor(mat, p: int, q: int) -> int:
    sub = [[v for t, v in enumerate(row) if t != p] for row in mat]
    return det_mod(sub, q)


def signed_minors(mat, q: int) -> list:
    """(-1)^p det(mat without column p), all p."""
    return [(-1) ** p * _minor(mat, p, q) % q for p in range(len(mat[0]))]


def omega_numeric(fd: FermatData, jet: JetPoint, p: int, rows_i=None, rows_j=None,
                  ev: NumericEvaluator | None = None) -> int:
    rows_i, rows_j = _selection(fd, rows_i, rows_j)
    ev = ev or NumericEvaluator(fd, jet)
    q = jet.q
    col = fd.columns[p]
    if not jet.z[col] % q:
        raise InvalidJet(f"z_{col} vanishes at this point")
    mat = ev.matrix(rows_i, rows_j)
    num = (-1) ** p * _minor(mat, p, q) % q
    return num * pow(pow(jet.z[col], fd.lambdas[p] - 1, q), -1, q) % q


# ---------------------------------------------------------------- identity reports


@dataclass
class IdentityReport:
    check: str
    samples: int = 0
    comparisons: int = 0
    failures: int = 0
    first_witness: dict | None = None

    def fail(self, witness: dict) -> None:
        self.failures += 1
        if self.first_witness is None:
            self.first_witness = witness

    def merge(self, other: "IdentityReport") -> "IdentityReport":
        self.samples += other.samples
        self.comparisons += other.comparisons
        if other.failures:
            if self.first_witness is None:
                self.first_witness = other.first_witness
            self.failures += other.failures
        return self

    @property
    def ok(self) -> bool:
        return self.failures == 0 and self.samples > 0

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "samples": self.samples,
            "comparisons": self.comparisons,
            "failures": self.failures,
            "first_witness": self.first_witness,
        }


def verify_gluing(fd: FermatData, jets, rows_i=None, rows_j=None) -> IdentityReport:
    """(-1)^{p2} det(D_p2) z_{p1}^{l1-1} == (-1)^{p1} det(D_p1) z_{p2}^{l2-1} for all pairs.

    Jets must lie on the cone with the selected differentials vanishing.
    """
    rows_i, rows_j = _selection(fd, rows_i, rows_j)
    rep = IdentityReport("gluing")
    for jet in jets:
        q = jet.q
        ev = NumericEvaluator(fd, jet)
        mins = signed_minors(ev.matrix(rows_i, rows_j), q)
        zl = [pow(jet.z[col], lam - 1, q) for col, lam in zip(fd.columns, fd.lambdas)]
        rep.samples += 1
        for p1, p2 in combinations(range(fd.width), 2):
            rep.comparisons += 1
            if (mins[p2] * zl[p1] - mins[p1] * zl[p2]) % q:
                rep.fail({"jet": jet.to_dict(), "pair": [fd.columns[p1], fd.columns[p2]]})
    return rep


def _random_units(rng, q: int, k: int) -> list:
    return [int(x) for x in rng.integers(1, q, size=k)]


def verify_descent_and_degree(fd: FermatData, jets, hearts: int | None = None, rows_i=None,
                              rows_j=None, seed: int = 0, scalings: int = 3) -> tuple:
    """Descent omega(z, xi + t z) = omega(z, xi) and weight omega(tz, t xi) = t^heart omega(z, xi).

    Every column whose coordinate is nonzero is used as a chart.  Returns
    (descent report, degree report).
    """
    rows_i, rows_j = _selection(fd, rows_i, rows_j)
    h = heart(fd, rows_i, rows_j) if hearts is None else hearts
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    dr, gr = IdentityReport("descent"), IdentityReport("degree")
    for jet in jets:
        q = jet.q
        charts = [p for p, col in enumerate(fd.columns) if jet.z[col] % q]
        base = {p: omega_numeric(fd, jet, p, rows_i, rows_j) for p in charts}
        dr.samples += 1
        gr.samples += 1
        for t in _random_units(rng, q, scalings):
            sh = jet.shifted(t)
            sc = jet.scaled(t)
            ev_sh, ev_sc = NumericEvaluator(fd, sh), NumericEvaluator(fd, sc)
            factor = pow(t, h, q) if h >= 0 else pow(pow(t, -1, q), -h, q)
            for p in charts:
                dr.comparisons += 1
                if omega_numeric(fd, sh, p, rows_i, rows_j, ev_sh) != base[p]:
                    dr.fail({"jet": jet.to_dict(), "t": t, "column": fd.columns[p]})
                gr.comparisons += 1
                if omega_numeric(fd, sc, p, rows_i, rows_j, ev_sc) != base[p] * factor % q:
                    gr.fail({"jet": jet.to_dict(), "t": t, "column": fd.columns[p], "heart": h})
    return dr, gr


def chart_transition_check(fd: FermatData, jets, rows_i=None, rows_j=None) -> IdentityReport:
    """det((D_k)_{j1}) == (z_k / z_{j1})^{heart + lambda_k - 1} det((D_k)_k) for all k != j1."""
    rows_i, rows_j = _selection(fd, rows_i, rows_j)
    h = heart(fd, rows_i, rows_j)
    rep = IdentityReport("chart_transition")
    for jet in jets:
        q = jet.q
        ev = NumericEvaluator(fd, jet)
        charts = [p for p, col in enumerate(fd.columns) if jet.z[col] % q]
        dets = {p: ev.chart_matrix(rows_i, rows_j, p) for p in charts}
        rep.samples += 1
        for k in charts:
            own = _minor(dets[k], k, q)
            for j1 in charts:
                if j1 == k:
                    continue
                rep.comparisons += 1
                e = h + fd.lambdas[k] - 1
                ratio = jet.z[fd.columns[k]] * pow(jet.z[fd.columns[j1]], -1, q) % q
                factor = pow(ratio, e, q) if e >= 0 else pow(pow(ratio, -1, q), -e, q)
                if (_minor(dets[j1], k, q) - factor * own) % q:
                    rep.fail({"jet": jet.to_dict(), "deleted": fd.columns[k], "chart": fd.columns[j1]})
    return rep


def b_two_routes(fd: FermatData, i: int, chart: int, p: int) -> MultiPoly:
    """Difference of two expressions of z_c^{a+2} B_{i,c}^k (a = deg G), which is zero.

    Direct route: z_c^{a+2} [ (z_k/z_c) d(G/z_c^a) + lambda_k (G/z_c^a) d(z_k/z_c) ].
    Closed form: z_c B_i^k - d_i z_k G dz_c.
    """
    G = fd.coeffs[i - 1][p]
    k, lam = fd.columns[p], fd.lambdas[p]
    c = fd.columns[chart]
    fr = fd.ring.with_forms()
    a = fd.degrees[i - 1] - lam
    Gf = G.lift_to_forms()
    dG = formal_differential(G)
    zk, zc = fr.z(k), fr.z(c)
    direct = zk * (zc * dG - Gf.scale(a) * fr.dz(c)) + Gf.scale(lam) * (zc * fr.dz(k) - zk * fr.dz(c))
    B = dG.mul_z_power(k, 1) + Gf.scale(lam) * fr.dz(k)
    closed = zc * B - (zk * Gf).scale(fd.degrees[i - 1]) * fr.dz(c)
    return direct - closed


# ---------------------------------------------------------------- pointed sampling


def _monomial_value(e, z, q) -> int:
    out = 1
    for v, k in zip(z, e):
        if k:
            out = out * pow(v, k, q) % q
    return out


def _monomial_derivative(e, z, xi, q) -> int:
    out = 0
    for t, k in enumerate(e):
        if k and xi[t] % q:
            rest = 1
            for s, (v, m) in enumerate(zip(z, e)):
                if s == t:
                    m -= 1
                if m:
                    rest = rest * pow(v, m, q) % q
            out += k * rest * xi[t]
    return out % q


def entry_group(key: tuple, vanishing: tuple, N: int) -> tuple | None:
    """Column of the collapsed matrix a coefficient block contributes to.

    Returns ("A", j) for the dominant column of coordinate j, ("B", k) for
    the top-level moving term with distinguished position k, or None for
    residue blocks (which vanish to order two on the pinned coordinates).
    """
    vset = set(vanishing)
    L = N - len(vanishing)
    if key[0] == "A":
        return None if key[1] in vset else ("A", key[1])
    _, S, k = key
    if vset.intersection(S):
        return None
    if len(S) - 1 == L:
        return ("B", k)
    return ("A", S[k])


def collapsed_columns(N: int, vanishing: tuple) -> list:
    r = [j for j in range(N + 1) if j not in vanishing]
    return [("A", j) for j in r] + [("B", k) for k in range(len(r))]


@dataclass(frozen=True)
class PointedSample:
    system: HypersurfaceSystem
    jet: JetPoint
    index: int

    def to_dict(self) -> dict:
        return {"index": self.index, "jet": self.jet.to_dict()}


def random_jet(rng, N: int, q: int, vanishing=(), tries: int = 50) -> JetPoint:
    """z nonzero off ``vanishing`` and zero on it; xi zero on ``vanishing``; rank [z; xi] = 2."""
    vset = set(vanishing)
    for _ in range(tries):
        z = tuple(0 if j in vset else int(rng.integers(1, q)) for j in range(N + 1))
        xi = tuple(0 if j in vset else int(rng.integers(0, q)) for j in range(N + 1))
        jet = JetPoint(z, xi, q)
        if jet.independent():
            return jet
    raise SamplingFailed("could not draw xi independent of z")


def pointed_sampler(
    schedule: MCMSchedule,
    q: int,
    seed: int,
    count: int,
    vanishing=(),
    constraints=("values", "differentials"),
    target=None,
    zero_moving: bool = False,
    allow_small_q: bool = False,
    start: int = 0,
):
    """Yield ``count`` (system, jet) pairs satisfying the requested linear constraints.

    The jet is drawn first, then each row's coefficient vector is drawn
    uniformly from the affine space cut out by F_i(z) = 0 ("values") and
    dF_i(z)(xi) = 0 for i <= c ("differentials").  ``target(rng, jet)``
    may instead return a full matrix T of shape (2c+r) x 2(L+1) and the
    coefficients are then solved so that the collapsed term matrix at the
    jet equals T.  Sample k uses the generator seeded by (seed, k).
    """
    cfg = schedule.config
    ring = PolyRing(Ring.prime_field(q), cfg.N + 1)
    check_characteristic(schedule, ring.coeff, allow_small_q)
    vanishing = tuple(vanishing)
    layouts = row_layouts(schedule)
    cols = collapsed_columns(cfg.N, vanishing)
    col_index = {g: t for t, g in enumerate(cols)}
    for idx in range(start, start + count):
        rng = np.random.default_rng(np.random.SeedSequence([seed, idx]))
        jet = random_jet(rng, cfg.N, q, vanishing)
        T = target(rng, jet) if target is not None else None
        vectors = []
        for i, lay in enumerate(layouts):
            base = [int(x) for x in rng.integers(0, q, size=lay.size)]
            vals = [0] * lay.size
            ders = [0] * lay.size
            groups = [None] * lay.size
            usable = []
            for pos, key, e in lay.entries():
                if zero_moving and key[0] == "M":
                    base[pos] = 0
                    continue
                usable.append(pos)
                vals[pos] = _monomial_value(e, jet.z, q)
                ders[pos] = _monomial_derivative(e, jet.z, jet.xi, q)
                groups[pos] = entry_group(key, vanishing, cfg.N)
            rows, rhs = [], []
            if T is None:
                if "values" in constraints:
                    rows.append(vals)
                    rhs.append(0)
                if "differentials" in constraints and i < cfg.c:
                    rows.append(ders)
                    rhs.append(0)
            else:
                for t in range(len(cols)):
                    rows.append([vals[p] if groups[p] is not None and col_index[groups[p]] == t else 0
                                 for p in range(lay.size)])
                    rhs.append(T[i][t] % q)
                    if i < cfg.c:
                        rows.append([ders[p] if groups[p] is not None and col_index[groups[p]] == t else 0
                                     for p in range(lay.size)])
                        rhs.append(T[cfg.e + i][t] % q)
            if rows:
                sub_rows = [[row[p] for p in usable] for row in rows]
                sol = solve_affine(sub_rows, rhs, q, [base[p] for p in usable])
                if sol is None:
                    raise SamplingFailed(f"sample {idx}: row {i + 1} constraints are inconsistent")
                for p, v in zip(usable, sol):
                    base[p] = v
            vectors.append(base)
        system = system_from_vectors(schedule, ring, vectors, seed=(seed, idx), zero_moving=zero_moving)
        yield PointedSample(system, jet, idx)


def check_constraints(sample: PointedSample) -> bool:
    """F_i(z) = 0 for all rows and dF_i(z)(xi) = 0 for i <= c."""
    sys_, jet = sample.system, sample.jet
    q = jet.q
    for i, F in enumerate(sys_.F):
        v, g = value_and_gradient(F, jet.z)
        if v % q:
            return False
        if i < sys_.config.c and sum(a * b for a, b in zip(g, jet.xi)) % q:
            return False
    return True


def constraint_rank_audit(schedule: MCMSchedule) -> dict:
    """Unknowns versus linear constraints per sample (the solve is underdetermined when slack > 0)."""
    from .schedule import parameter_count
    cfg = schedule.config
    unknowns = sum(lay.size for lay in row_layouts(schedule))
    n_constraints = cfg.e + cfg.c
    return {
        "unknowns": unknowns,
        "parameter_count": parameter_count(cfg),
        "constraints": n_constraints,
        "slack": unknowns - n_constraints,
    }


# ---------------------------------------------------------------- identity suite

SUITE_CHECKS = ("gluing", "descent", "degree", "chart_transition", "heart")


def all_vanishing_sets(schedule: MCMSchedule) -> list:
    """Every pinned coordinate set with 0 <= eta <= n-1, in a fixed order."""
    cfg = schedule.config
    return [v for eta in range(cfg.n) for v in combinations(range(cfg.N + 1), eta)]


def identity_suite(schedule: MCMSchedule, q: int, seed: int, samples: int, start: int = 0,
                   allow_small_q: bool = False) -> dict:
    """Run every identity check on pointed samples start..start+samples-1.

    Sample k pins the vanishing set number k (cycling through all of them)
    and checks every first/second-kind rewrite and every row selection.
    The "heart" report compares the presentation's twist with the schedule's.
    """
    cfg = schedule.config
    vsets = all_vanishing_sets(schedule)
    reps = {name: IdentityReport(name) for name in SUITE_CHECKS}
    for k in range(start, start + samples):
        vset = vsets[k % len(vsets)]
        smp = next(pointed_sampler(schedule, q, seed, 1, vset, allow_small_q=allow_small_q, start=k))
        jets = [smp.jet]
        for rw in all_rewrites(smp.system, vset):
            if rw.variant[0] == "collapse":
                continue
            fd = fermat_from_rewrite(rw, smp.system)
            for sel in combinations(range(1, cfg.c + 1), cfg.n - len(vset)):
                where = {"sample": k, "variant": list(rw.variant), "vanishing": list(vset),
                         "rows_j": list(sel)}
                h = heart(fd, None, sel)
                expect = twist_degree(schedule, sel, rw.variant, vset).value
                hr = reps["heart"]
                hr.comparisons += 1
                if h != expect:
                    hr.fail({**where, "heart": h, "schedule": expect})
                reps["gluing"].merge(_relabel(verify_gluing(fd, jets, None, sel), where))
                dr, gr = verify_descent_and_degree(fd, jets, h, None, sel, seed=[seed, k])
                reps["descent"].merge(_relabel(dr, where))
                reps["degree"].merge(_relabel(gr, where))
                reps["chart_transition"].merge(_relabel(chart_transition_check(fd, jets, None, sel), where))
        for rep in reps.values():
            rep.samples += 1
    return reps


def _relabel(rep: IdentityReport, where: dict) -> IdentityReport:
    """Attach the sample location to the witness and count no samples (the suite does)."""
    if rep.first_witness is not None:
        rep.first_witness = {**where, **rep.first_witness}
    rep.samples = 0
    return rep


__all__ = [
    "FermatData",
    "FormMatrix",
    "SymForm",
    "JetPoint",
    "IdentityReport",
    "PointedSample",
    "NumericEvaluator",
    "fermat_from_rewrite",
    "fermat_from_blocks",
    "heart",
    "build_matrix",
    "proportionality_residuals",
    "det_symbolic",
    "omega_hat",
    "omega_numeric",
    "signed_minors",
    "verify_gluing",
    "verify_descent_and_degree",
    "chart_transition_check",
    "b_two_routes",
    "pointed_sampler",
    "random_jet",
    "check_constraints",
    "constraint_rank_audit",
    "entry_group",
    "collapsed_columns",
    "identity_suite",
    "all_vanishing_sets",
    "SUITE_CHECKS",
]
