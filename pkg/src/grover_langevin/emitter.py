"""Explicit symbolic Langevin equations.

Every world-line entry is a finite sum of terms ``c * exp(-i*pi/2 * p)``
where ``p`` is a polynomial in the fields, so each overlap z_l is such a
sum as well.  The drift of a field is then

    K_x = bilinear term + eta(t) + sum_l -(i*pi/4) * (dp/dx) * N_l / D_l

with ``D_l`` the exponential sum of z_l and ``N_l`` the summands of ``D_l``
that depend on ``x``.  This module builds those expressions as trees,
evaluates them, prints them as text or LaTeX, and reads the text form back.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Union

from .errors import SingularOverlapError, UsageError
from .exact import GroverLayout
from .fields import FieldAssignment, FieldId, enumerate_fields, parse_field_name, validate_field, worldline_factors

QUOTIENT_GUARD = 1e-14
_HALF_PI = math.pi / 2


# --- expression tree ------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class FieldRef:
    field: FieldId


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Sum:
    terms: tuple


@dataclass(frozen=True)
class Prod:
    factors: tuple


@dataclass(frozen=True)
class Exp:
    arg: "Expr"


@dataclass(frozen=True)
class Quot:
    num: "Expr"
    den: "Expr"


@dataclass(frozen=True)
class Eta:
    """Placeholder for the white-noise term; evaluates to zero."""


Expr = Union[Const, FieldRef, Neg, Sum, Prod, Exp, Quot, Eta]


def eval_expr(e: Expr, a: FieldAssignment | Mapping[FieldId, complex], memo: dict | None = None) -> complex:
    """Numerically evaluate ``e`` at assignment ``a`` (eta counts as 0).

    Passing the same ``memo`` dict to several calls at one assignment reuses
    the values of shared subtrees such as the overlap denominators.
    """
    if memo is None:
        return _eval(e, a, {})
    return _eval(e, a, memo)


def _eval(e: Expr, a, memo: dict) -> complex:
    if isinstance(e, (Sum, Quot, Exp)):
        key = id(e)
        hit = memo.get(key)
        if hit is not None and hit[0] is e:
            return hit[1]
        value = _eval_node(e, a, memo)
        memo[key] = (e, value)
        return value
    return _eval_node(e, a, memo)


def _eval_node(e: Expr, a, memo: dict) -> complex:
    if isinstance(e, Const):
        return complex(e.value)
    if isinstance(e, FieldRef):
        try:
            return complex(a[e.field])
        except (KeyError, UsageError):
            raise UsageError(f"field {e.field.name!r} is not assigned") from None
    if isinstance(e, Neg):
        return -_eval(e.arg, a, memo)
    if isinstance(e, Sum):
        return sum((_eval(t, a, memo) for t in e.terms), 0j)
    if isinstance(e, Prod):
        out = 1 + 0j
        for f in e.factors:
            out *= _eval(f, a, memo)
        return out
    if isinstance(e, Exp):
        return cmath.exp(_eval(e.arg, a, memo))
    if isinstance(e, Quot):
        den = _eval(e.den, a, memo)
        if not abs(den) >= QUOTIENT_GUARD:
            raise SingularOverlapError(f"quotient denominator {den!r} below {QUOTIENT_GUARD:g}", value=den)
        return _eval(e.num, a, memo) / den
    if isinstance(e, Eta):
        return 0j
    raise TypeError(f"not an expression node: {e!r}")


# --- exponential sums ---------------------------------------------------------------
#
# A monomial is a sorted tuple of FieldIds; a polynomial is a sorted tuple of
# (monomial, coefficient) pairs; an exponential sum maps polynomial p to the
# complex coefficient c of exp(-i*pi/2 * p).

Monomial = tuple
Poly = tuple
ExpSum = dict


def _poly(items: Mapping[Monomial, float]) -> Poly:
    return tuple(sorted(((m, c) for m, c in items.items() if c != 0), key=lambda mc: _mono_key(mc[0])))


def _mono_key(m: Monomial):
    return tuple(f.sort_key() for f in m)


def _poly_add(p: Poly, q: Poly) -> Poly:
    acc = dict(p)
    for m, c in q:
        acc[m] = acc.get(m, 0) + c
    return _poly(acc)


def _es_mul(x: ExpSum, y: ExpSum) -> ExpSum:
    out: ExpSum = {}
    for p, c in x.items():
        for q, d in y.items():
            key = _poly_add(p, q)
            out[key] = out.get(key, 0) + c * d
    return out


def _es_add(x: ExpSum, y: ExpSum) -> ExpSum:
    out = dict(x)
    for p, c in y.items():
        out[p] = out.get(p, 0) + c
    return out


def _prune(x: ExpSum, tol: float = 1e-13) -> ExpSum:
    scale = max((abs(c) for c in x.values()), default=0.0)
    return {p: c for p, c in x.items() if abs(c) > tol * scale}


def _mat_mul(A, B):
    return [[_prune(_es_add(_es_mul(A[i][0], B[0][j]), _es_mul(A[i][1], B[1][j]))) for j in range(2)]
            for i in range(2)]


def _const_es(v: complex) -> ExpSum:
    return {(): complex(v)} if v != 0 else {}


def _symbolic_factor(f, primed: bool):
    if f.kind == "const":
        m = f.matrix.T if primed else f.matrix
        conj = (lambda v: v.conjugate()) if primed else (lambda v: v)
        return [[_const_es(conj(complex(m[i, j]))) for j in range(2)] for i in range(2)]
    mono = tuple(sorted((fid.as_primed(primed) for fid in f.fields), key=FieldId.sort_key))
    sign = -1 if primed else 1
    if f.kind == "m1":
        return [[{(): 1 + 0j}, {}], [{}, {_poly({mono: sign}): 1 + 0j}]]
    e = _poly({mono: 2 * sign})
    diag = {(): 0.5 + 0j, e: 0.5 + 0j}
    off = {(): 0.5 + 0j, e: -0.5 + 0j}
    return [[diag, off], [off, dict(diag)]]


@lru_cache(maxsize=None)
def _symbolic_worldline(layout: GroverLayout, l: int, primed: bool):
    factors = worldline_factors(layout, l)
    if primed:
        factors = tuple(reversed(factors))
    acc = [[{(): 1 + 0j}, {}], [{}, {(): 1 + 0j}]]
    for f in factors:
        acc = _mat_mul(acc, _symbolic_factor(f, primed))
    return acc


@lru_cache(maxsize=None)
def overlap_expsum(layout: GroverLayout, l: int) -> ExpSum:
    """z_l as an exponential sum with identical exponents collected."""
    u = _symbolic_worldline(layout, l, False)
    w = _symbolic_worldline(layout, l, True)
    return _prune(_es_add(_es_mul(w[0][0], u[0][0]), _es_mul(w[0][1], u[1][0])))


def _poly_derivative(p: Poly, x: FieldId) -> Poly:
    acc: dict = {}
    for m, c in p:
        k = m.count(x)
        if k:
            rest = list(m)
            rest.remove(x)
            acc[tuple(rest)] = acc.get(tuple(rest), 0) + c * k
    return _poly(acc)


# --- expression construction --------------------------------------------------------

def _mono_expr(m: Monomial, c: float) -> Expr:
    factors = [FieldRef(f) for f in m]
    if c not in (1, -1):
        factors.insert(0, Const(complex(c)))
    core = factors[0] if len(factors) == 1 else Prod(tuple(factors))
    return Neg(core) if c == -1 else core


@lru_cache(maxsize=None)
def _poly_expr(p: Poly) -> Expr:
    terms = [_mono_expr(m, c) for m, c in p]
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


def _term_key(p: Poly):
    return (len(p), tuple((_mono_key(m), c) for m, c in p))


def _es_expr(x: ExpSum, scale: float) -> Sum:
    terms = []
    for p in sorted(x, key=_term_key):
        c = x[p] / scale
        if abs(c.imag) < 1e-15 * abs(c):
            c = complex(c.real, 0.0)
        if not p:
            terms.append(Const(c))
            continue
        e = Exp(Prod((Const(-0.5j * math.pi), _poly_expr(p))))
        if c == 1:
            terms.append(e)
        elif c == -1:
            terms.append(Neg(e))
        else:
            terms.append(Prod((Const(c), e)))
    return Sum(tuple(terms))


@lru_cache(maxsize=None)
def _den_expr(layout: GroverLayout, l: int) -> tuple[Sum, float]:
    z = overlap_expsum(layout, l)
    scale = min(abs(c) for c in z.values())
    return _es_expr(z, scale), scale


def _bilinear_expr(x: FieldId) -> Expr:
    coeff = -0.25j * math.pi if x.primed else 0.25j * math.pi
    return Prod((Const(coeff), FieldRef(x.partner)))


def build_drift_expr(field: FieldId | str, layout: GroverLayout) -> Sum:
    """Symbolic drift -(i/2) dS/dx plus an eta(t) placeholder for ``field``."""
    x = parse_field_name(field) if isinstance(field, str) else field
    validate_field(layout, x)
    terms: list[Expr] = [_bilinear_expr(x), Eta()]
    for l in range(1, layout.n + 2):
        z = overlap_expsum(layout, l)
        groups: dict[Poly, ExpSum] = {}
        for p, c in z.items():
            dp = _poly_derivative(p, x)
            if dp:
                groups.setdefault(dp, {})[p] = c
        if not groups:
            continue
        den, scale = _den_expr(layout, l)
        for dp in sorted(groups, key=_term_key):
            # -(i/2) * i * (-i*pi/2) * dp = -(i*pi/4) * dp
            factors: list[Expr] = []
            if len(dp) == 1:
                (mono, c), = dp
                factors.append(Const(-0.25j * math.pi * c))
                factors.extend(FieldRef(f) for f in mono)
            else:
                factors += [Const(-0.25j * math.pi), _poly_expr(dp)]
            factors.append(Quot(_es_expr(groups[dp], scale), den))
            terms.append(Prod(tuple(factors)))
    return Sum(tuple(terms))


def build_all(layout: GroverLayout) -> dict[FieldId, Sum]:
    return {f: build_drift_expr(f, layout) for f in enumerate_fields(layout)}


# --- rendering -----------------------------------------------------------------------

@dataclass(frozen=True)
class RenderedEquation:
    field: FieldId | None
    body: str
    format: str

    @property
    def line(self) -> str:
        name = self.field.name if self.field is not None else "?"
        if self.format == "latex" and self.field is not None:
            return rf"\frac{{d {_latex_field(self.field)}}}{{dt}} = {self.body}"
        return f"d/dt {name} = {self.body}"

    def __str__(self) -> str:
        return self.body


def _rational(x: float, max_den: int = 64) -> Fraction | None:
    fr = Fraction(x).limit_denominator(max_den)
    if abs(float(fr) - x) <= 1e-14 * max(1.0, abs(x)):
        return fr
    return None


def _real_text(x: float) -> str:
    """Unsigned-aware text for a real constant: rationals, rational multiples of Pi, else 17 digits."""
    fr = _rational(x)
    if fr is not None:
        return str(fr.numerator) if fr.denominator == 1 else f"{fr.numerator}/{fr.denominator}"
    fr = _rational(x / math.pi)
    if fr is not None:
        sign = "-" if fr < 0 else ""
        p, q = abs(fr.numerator), fr.denominator
        num = "Pi" if p == 1 else f"{p}*Pi"
        return f"{sign}{num}" if q == 1 else f"{sign}{num}/{q}"
    return format(x, ".17g")


def _imag_text(b: float) -> str:
    if b == 1:
        return "I"
    if b == -1:
        return "-I"
    s = _real_text(abs(b))
    return ("-" if b < 0 else "") + "I*" + s


def const_text(c: complex) -> str:
    """Text form of a constant, parenthesized unless it is a bare non-negative integer."""
    a, b = c.real, c.imag
    if b == 0:
        core = _real_text(a)
    elif a == 0:
        core = _imag_text(b)
    else:
        im = _imag_text(b)
        core = _real_text(a) + (im if im.startswith("-") else "+" + im)
    return core if core.isdigit() else f"({core})"


_PREC = {Sum: 1, Neg: 2, Prod: 3, Quot: 3}


def _prec(e: Expr) -> int:
    return _PREC.get(type(e), 4)


def _text(e: Expr) -> str:
    if isinstance(e, Const):
        return const_text(complex(e.value))
    if isinstance(e, FieldRef):
        return e.field.name
    if isinstance(e, Eta):
        return "eta(t)"
    if isinstance(e, Exp):
        return f"exp({_text(e.arg)})"
    if isinstance(e, Neg):
        inner = _text(e.arg)
        return f"-({inner})" if _prec(e.arg) <= 2 else f"-{inner}"
    if isinstance(e, Quot):
        return f"({_text(e.num)})/({_text(e.den)})"
    if isinstance(e, Prod):
        parts = []
        for f in e.factors:
            s = _text(f)
            parts.append(f"({s})" if _prec(f) <= 3 and not isinstance(f, Prod) else s)
        return "*".join(parts)
    if isinstance(e, Sum):
        out = ""
        for i, t in enumerate(e.terms):
            if isinstance(t, Neg):
                inner = _text(t.arg)
                if _prec(t.arg) <= 2:
                    inner = f"({inner})"
                out += f" - {inner}" if i else f"-{inner}"
            else:
                out += f" + {_text(t)}" if i else _text(t)
        return out
    raise TypeError(f"not an expression node: {e!r}")


def _latex_field(f: FieldId) -> str:
    prime = r"\prime" if f.primed else ""
    return rf"\{f.kind}^{{{prime}({f.slot})}}_{{{f.gate}}}"


def _latex_real(x: float) -> tuple[str, str]:
    """(sign, magnitude) LaTeX for a real constant."""
    sign = "-" if x < 0 else ""
    x = abs(x)
    fr = _rational(x)
    if fr is not None:
        return sign, (str(fr.numerator) if fr.denominator == 1 else rf"\frac{{{fr.numerator}}}{{{fr.denominator}}}")
    fr = _rational(x / math.pi)
    if fr is not None:
        num = r"\pi" if fr.numerator == 1 else rf"{fr.numerator}\pi"
        return sign, (num if fr.denominator == 1 else rf"\frac{{{num}}}{{{fr.denominator}}}")
    return sign, format(x, ".17g")


def _latex_imag(b: float) -> str:
    sign = "-" if b < 0 else ""
    b = abs(b)
    if b == 1:
        return sign + "i"
    fr = _rational(b / math.pi)
    if fr is not None:
        num = r"i\pi" if fr.numerator == 1 else rf"{fr.numerator}i\pi"
        return sign + (num if fr.denominator == 1 else rf"\frac{{{num}}}{{{fr.denominator}}}")
    _, mag = _latex_real(b)
    return f"{sign}{mag}i"


def _latex_const(c: complex) -> str:
    a, b = c.real, c.imag
    if b == 0:
        return "".join(_latex_real(a))
    if a == 0:
        return _latex_imag(b)
    im = _latex_imag(b)
    return "(" + "".join(_latex_real(a)) + (im if im.startswith("-") else "+" + im) + ")"


def _latex(e: Expr) -> str:
    if isinstance(e, Const):
        return _latex_const(complex(e.value))
    if isinstance(e, FieldRef):
        return _latex_field(e.field)
    if isinstance(e, Eta):
        return r"\eta(t)"
    if isinstance(e, Exp):
        return f"e^{{{_latex(e.arg)}}}"
    if isinstance(e, Neg):
        inner = _latex(e.arg)
        return rf"-\left({inner}\right)" if _prec(e.arg) <= 2 else f"-{inner}"
    if isinstance(e, Quot):
        return rf"\frac{{{_latex(e.num)}}}{{{_latex(e.den)}}}"
    if isinstance(e, Prod):
        parts = []
        for f in e.factors:
            s = _latex(f)
            parts.append(rf"\left({s}\right)" if _prec(f) <= 2 else s)
        return r"\,".join(parts)
    if isinstance(e, Sum):
        out = ""
        for i, t in enumerate(e.terms):
            if isinstance(t, Neg):
                inner = _latex(t.arg)
                if _prec(t.arg) <= 2:
                    inner = rf"\left({inner}\right)"
                out += f" - {inner}" if i else f"-{inner}"
            else:
                s = _latex(t)
                if i and s.startswith("-"):
                    out += f" - {s[1:]}"
                else:
                    out += f" + {s}" if i else s
        return out
    raise TypeError(f"not an expression node: {e!r}")


def render(e: Expr, fmt: str = "text", field: FieldId | None = None) -> RenderedEquation:
    """Deterministic text (Maple-like) or LaTeX rendering of ``e``."""
    if fmt == "text":
        return RenderedEquation(field, _text(e), fmt)
    if fmt == "latex":
        return RenderedEquation(field, _latex(e), fmt)
    raise UsageError(f"format must be 'text' or 'latex', got {fmt!r}")


def emit(layout: GroverLayout, fields: Iterable[FieldId] | None = None, fmt: str = "text") -> list[str]:
    """One ``d/dt <field> = ...`` line per requested field."""
    fields = enumerate_fields(layout) if fields is None else fields
    return [render(build_drift_expr(f, layout), fmt, f).line for f in fields]


# --- reader for the text form -----------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<field>(?:sigma|tau):\d+:\d+'?)"
    r"|(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]+)"
    r"|(?P<op>[-+*/()]))"
)


def _tokenize(s: str) -> list[tuple[str, str]]:
    toks, pos = [], 0
    s = s.rstrip()
    while pos < len(s):
        m = _TOKEN_RE.match(s, pos)
        if m is None or m.end() == pos:
            raise UsageError(f"unexpected input at {pos}: {s[pos:pos + 20]!r}")
        toks.append((m.lastgroup, m.group(m.lastgroup)))
        pos = m.end()
    return toks


class _Reader:
    def __init__(self, s: str):
        self.toks = _tokenize(s)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, value: str | None = None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise UsageError(f"expected {value!r}, got {tok[1]!r}")
        self.i += 1
        return tok

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            t = self.term()
            terms.append(Neg(t) if op == "-" else t)
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Expr:
        acc = self.unary()
        factors = [acc]
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            if op == "*":
                factors.append(rhs)
            else:
                left = factors[0] if len(factors) == 1 else Prod(tuple(factors))
                factors = [Quot(left, rhs)]
        return factors[0] if len(factors) == 1 else Prod(tuple(factors))

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Expr:
        kind, val = self.take()
        if kind == "num":
            return Const(complex(float(val)))
        if kind == "field":
            return FieldRef(parse_field_name(val))
        if kind == "name":
            if val == "I":
                return Const(1j)
            if val == "Pi":
                return Const(complex(math.pi))
            if val == "eta":
                self.take("(")
                self.take("t")
                self.take(")")
                return Eta()
            if val == "exp":
                self.take("(")
                inner = self.expr()
                self.take(")")
                return Exp(inner)
            raise UsageError(f"unknown name {val!r}")
        if val == "(":
            inner = self.expr()
            self.take(")")
            return inner
        raise UsageError(f"unexpected token {val!r}")


def parse_text(s: str) -> Expr:
    """Read back an expression printed by :func:`render` in text format.

    A leading ``d/dt <field> =`` prefix is accepted and ignored.
    """
    m = re.match(r"\s*d/dt\s+\S+\s*=", s)
    if m:
        s = s[m.end():]
    r = _Reader(s)
    e = r.expr()
    if r.peek()[0] is not None:
        raise UsageError(f"trailing input starting at {r.peek()[1]!r}")
    return e
