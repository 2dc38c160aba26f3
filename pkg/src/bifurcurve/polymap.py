"""Sparse multivariate polynomials and polynomial maps R^n -> R^(n-1).

Coefficients are kept exact (``fractions.Fraction``) for every symbolic
operation; floats only appear once a polynomial is packed for the numeric
kernels (see :class:`PackedSystem`).

Expression grammar accepted by :func:`parse_map` (EBNF)::

    map     = expr { ";" expr } ;
    expr    = term { ("+" | "-") term } ;
    term    = unary { "*" unary } ;
    unary   = ("+" | "-") unary | power ;
    power   = atom [ "^" integer ] ;
    atom    = number | identifier | "(" expr ")" ;
    number  = digits [ "." digits ] | "." digits ;

Identifiers must be one of the declared variables.  Exponents are
non-negative integer literals.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels

Exponent = tuple[int, ...]


class PolynomialError(ValueError):
    """Raised for malformed expressions or inconsistent dimensions."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


def _grlex_key(exp: Exponent):
    return (-sum(exp), tuple(-e for e in exp))


def _as_coeff(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(value)


@dataclass(frozen=True)
class Polynomial:
    """Immutable sparse polynomial; ``terms`` is sorted in graded-lex order."""

    variables: tuple[str, ...]
    terms: tuple[tuple[Exponent, Fraction], ...]

    @classmethod
    def from_dict(cls, variables: Sequence[str], terms: Mapping[Exponent, object]) -> "Polynomial":
        variables = tuple(variables)
        clean = {}
        for exp, c in terms.items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != len(variables):
                raise PolynomialError("exponent length does not match variable count")
            if any(e < 0 for e in exp):
                raise PolynomialError("negative exponent")
            c = _as_coeff(c)
            if c != 0:
                clean[exp] = clean.get(exp, Fraction(0)) + c
        clean = {e: c for e, c in clean.items() if c != 0}
        ordered = tuple(sorted(clean.items(), key=lambda item: _grlex_key(item[0])))
        return cls(variables, ordered)

    @classmethod
    def constant(cls, variables: Sequence[str], value) -> "Polynomial":
        return cls.from_dict(variables, {(0,) * len(variables): value})

    @classmethod
    def variable(cls, variables: Sequence[str], index: int) -> "Polynomial":
        exp = [0] * len(variables)
        exp[index] = 1
        return cls.from_dict(variables, {tuple(exp): 1})

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def as_dict(self) -> dict[Exponent, Fraction]:
        return dict(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def _check(self, other: "Polynomial"):
        if self.variables != other.variables:
            raise PolynomialError("polynomials use different variable lists")

    def _lift(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        return Polynomial.constant(self.variables, other)

    def __add__(self, other) -> "Polynomial":
        other = self._lift(other)
        acc = self.as_dict()
        for e, c in other.terms:
            acc[e] = acc.get(e, Fraction(0)) + c
        return Polynomial.from_dict(self.variables, acc)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.variables, tuple((e, -c) for e, c in self.terms))

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._lift(other) - self

    def __mul__(self, other) -> "Polynomial":
        other = self._lift(other)
        acc: dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc.get(e, Fraction(0)) + c1 * c2
        return Polynomial.from_dict(self.variables, acc)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise PolynomialError("exponent must be a non-negative integer")
        result = Polynomial.constant(self.variables, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def diff(self, index: int) -> "Polynomial":
        acc = {}
        for e, c in self.terms:
            if e[index] == 0:
                continue
            d = list(e)
            d[index] -= 1
            acc[tuple(d)] = c * e[index]
        return Polynomial.from_dict(self.variables, acc)

    def gradient(self) -> list["Polynomial"]:
        return [self.diff(i) for i in range(self.nvars)]

    def evaluate_exact(self, point: Sequence) -> Fraction:
        point = [_as_coeff(v) for v in point]
        total = Fraction(0)
        for e, c in self.terms:
            term = c
            for v, k in zip(point, e):
                if k:
                    term *= v**k
            total += term
        return total

    def __call__(self, point) -> float:
        return float(PackedSystem.from_polys([self]).values(np.asarray(point, dtype=float))[0])

    def __str__(self) -> str:
        return format_polynomial(self)


def _format_coeff(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"({c.numerator}/{c.denominator})"


def format_polynomial(p: Polynomial) -> str:
    """Canonical printed form: graded-lex order, explicit ``*`` and ``^``."""
    if p.is_zero():
        return "0"
    pieces = []
    for i, (exp, c) in enumerate(p.terms):
        sign = "-" if c < 0 else "+"
        mag = -c if c < 0 else c
        factors = []
        for name, k in zip(p.variables, exp):
            if k == 1:
                factors.append(name)
            elif k > 1:
                factors.append(f"{name}^{k}")
        if not factors:
            body = _format_coeff(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = "*".join([_format_coeff(mag)] + factors)
        if i == 0:
            pieces.append(body if sign == "+" else f"-{body}")
        else:
            pieces.append(f" {sign} {body}")
    return "".join(pieces)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*^/();]))"
)


class _Parser:
    def __init__(self, text: str, variables: Sequence[str], offset: int = 0):
        self.text = text
        self.variables = tuple(variables)
        self.offset = offset
        self.tokens = self._tokenize(text)
        self.i = 0

    def _tokenize(self, text: str):
        tokens = []
        pos = 0
        while pos < len(text):
            if text[pos].isspace():
                pos += 1
                continue
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise PolynomialError(f"unexpected character {text[pos]!r}", self.offset + pos)
            kind = m.lastgroup
            start = m.start(kind)
            tokens.append((kind, m.group(kind), self.offset + start))
            pos = m.end()
        tokens.append(("end", "", self.offset + len(text)))
        return tokens

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            raise PolynomialError("empty expression", self.peek()[2])
        p = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise PolynomialError(f"unexpected token {value!r}", pos)
        return p

    def expr(self) -> Polynomial:
        p = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            kind, op, pos = self.take()
            if op == "/":
                raise PolynomialError("division is not supported", pos)
            p = p * self.unary()
        return p

    def unary(self) -> Polynomial:
        kind, value, pos = self.peek()
        if kind == "op" and value in ("+", "-"):
            self.take()
            p = self.unary()
            return -p if value == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, value, pos = self.peek()
            if kind == "op" and value == "-":
                raise PolynomialError("negative exponent", pos)
            if kind == "op" and value == "(":
                raise PolynomialError("exponent must be an integer literal", pos)
            if kind != "num":
                raise PolynomialError("expected integer exponent", pos)
            self.take()
            if not value.isdigit():
                raise PolynomialError(f"non-integer exponent {value!r}", pos)
            return base ** int(value)
        return base

    def atom(self) -> Polynomial:
        kind, value, pos = self.take()
        if kind == "num":
            return Polynomial.constant(self.variables, Fraction(value))
        if kind == "name":
            if value not in self.variables:
                raise PolynomialError(f"unknown variable {value!r}", pos)
            return Polynomial.variable(self.variables, self.variables.index(value))
        if kind == "op" and value == "(":
            p = self.expr()
            kind2, value2, pos2 = self.take()
            if not (kind2 == "op" and value2 == ")"):
                raise PolynomialError("expected ')'", pos2)
            return p
        if kind == "end":
            raise PolynomialError("unexpected end of expression", pos)
        raise PolynomialError(f"unexpected token {value!r}", pos)


def parse_polynomial(text: str, variables: Sequence[str], offset: int = 0) -> Polynomial:
    return _Parser(text, variables, offset).parse()


def _check_variables(variables: Sequence[str]) -> tuple[str, ...]:
    variables = tuple(v.strip() for v in variables)
    if len(variables) < 2:
        raise PolynomialError("need at least two variables")
    if len(set(variables)) != len(variables):
        raise PolynomialError("duplicate variable names")
    for v in variables:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", v):
            raise PolynomialError(f"invalid variable name {v!r}")
    return variables


@dataclass(frozen=True)
class PolynomialMap:
    """F = (F_1, ..., F_{n-1}) over a shared variable list of length n."""

    variables: tuple[str, ...]
    components: tuple[Polynomial, ...]

    def __post_init__(self):
        if len(self.components) != len(self.variables) - 1:
            raise PolynomialError(
                f"a map in {len(self.variables)} variables needs {len(self.variables) - 1} components, "
                f"got {len(self.components)}"
            )
        for c in self.components:
            if c.variables != self.variables:
                raise PolynomialError("components use different variable lists")

    @classmethod
    def from_polys(cls, polys: Iterable[Polynomial]) -> "PolynomialMap":
        polys = tuple(polys)
        return cls(polys[0].variables, polys)

    @property
    def domain_dim(self) -> int:
        return len(self.variables)

    @property
    def target_dim(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.components)

    def __str__(self) -> str:
        return "; ".join(format_polynomial(c) for c in self.components)

    def jacobian_polys(self) -> list[list[Polynomial]]:
        return [c.gradient() for c in self.components]

    @cached_property
    def packed(self) -> "PackedSystem":
        return PackedSystem.from_polys(self.components)


def parse_map(text: str, variables: Sequence[str]) -> PolynomialMap:
    """Parse ``"F1; F2; ..."`` into an expanded, canonical :class:`PolynomialMap`."""
    variables = _check_variables(variables)
    parts = []
    start = 0
    for i, ch in enumerate(text + ";"):
        if ch == ";":
            parts.append((text[start:i], start))
            start = i + 1
    if len(parts) > 1 and not parts[-1][0].strip():
        parts.pop()
    if len(parts) != len(variables) - 1:
        raise PolynomialError(
            f"expected {len(variables) - 1} component(s) for {len(variables)} variables, got {len(parts)}"
        )
    comps = [parse_polynomial(chunk, variables, offset) for chunk, offset in parts]
    return PolynomialMap(variables, tuple(comps))


def _as_point(point, n: int) -> np.ndarray:
    x = np.asarray(point, dtype=np.float64)
    if x.shape != (n,):
        raise PolynomialError(f"point has shape {x.shape}, expected ({n},)")
    return x


def evaluate(fmap: PolynomialMap, point) -> np.ndarray:
    x = _as_point(point, fmap.domain_dim)
    return fmap.packed.values(x)


@dataclass(frozen=True)
class JacobianEval:
    point: np.ndarray
    matrix: np.ndarray


def jacobian(fmap: PolynomialMap, point) -> JacobianEval:
    x = _as_point(point, fmap.domain_dim)
    return JacobianEval(point=x, matrix=fmap.packed.jacobian(x))


def determinant(rows: list[list[Polynomial]]) -> Polynomial:
    """Laplace expansion along the first row; fine for the small sizes used here."""
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = None
    for j in range(n):
        if rows[0][j].is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in rows[1:]]
        term = rows[0][j] * determinant(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    if total is None:
        return Polynomial.from_dict(rows[0][0].variables, {})
    return total


def milnor_polynomial(fmap: PolynomialMap, center) -> Polynomial:
    """det of the Jacobian of F stacked over the row (x - c).

    Rows are ordered [dF_1; ...; dF_{n-1}; x - c]; the zero set is where the
    fiber is tangent to a sphere centred at ``center``.
    """
    n = fmap.domain_dim
    if len(center) != n:
        raise PolynomialError(f"center has length {len(center)}, expected {n}")
    rows = fmap.jacobian_polys()
    last = [
        Polynomial.variable(fmap.variables, i) - Polynomial.constant(fmap.variables, _as_coeff(center[i]))
        for i in range(n)
    ]
    return determinant(rows + [last])


def squared_distance(variables: Sequence[str], center=None) -> Polynomial:
    n = len(variables)
    center = [0] * n if center is None else center
    total = Polynomial.constant(variables, 0)
    for i in range(n):
        d = Polynomial.variable(variables, i) - Polynomial.constant(variables, _as_coeff(center[i]))
        total = total + d * d
    return total


# ---------------------------------------------------------------------------
# numeric packing


def _pack(polys: Sequence[Polynomial]):
    n = polys[0].nvars
    exps, coeffs, owner = [], [], []
    for k, p in enumerate(polys):
        for e, c in p.terms:
            exps.append(e)
            coeffs.append(float(c))
            owner.append(k)
    if not exps:
        exps = np.zeros((0, n), dtype=np.int64)
    return (
        np.asarray(exps, dtype=np.int64).reshape(-1, n),
        np.asarray(coeffs, dtype=np.float64),
        np.asarray(owner, dtype=np.int64),
    )


@dataclass(frozen=True)
class PackedSystem:
    """A list of m polynomials in n variables plus their m x n Jacobian, as flat arrays.

    ``exps/coeffs/owner`` encode the values; ``dexps/dcoeffs/downer`` encode
    the Jacobian entries with ``downer = i * n + j``.
    """

    nvars: int
    nout: int
    exps: np.ndarray
    coeffs: np.ndarray
    owner: np.ndarray
    dexps: np.ndarray
    dcoeffs: np.ndarray
    downer: np.ndarray
    maxdeg: int

    @classmethod
    def from_polys(cls, polys: Sequence[Polynomial]) -> "PackedSystem":
        polys = list(polys)
        n = polys[0].nvars
        exps, coeffs, owner = _pack(polys)
        derivs = [p.diff(j) for p in polys for j in range(n)]
        dexps, dcoeffs, downer = _pack(derivs)
        maxdeg = max([p.degree for p in polys] + [1])
        return cls(n, len(polys), exps, coeffs, owner, dexps, dcoeffs, downer, maxdeg)

    def stacked(self, other: "PackedSystem") -> "PackedSystem":
        """Concatenate two systems (rows of ``other`` after rows of ``self``)."""
        n = self.nvars
        return PackedSystem(
            n,
            self.nout + other.nout,
            np.concatenate([self.exps, other.exps]),
            np.concatenate([self.coeffs, other.coeffs]),
            np.concatenate([self.owner, other.owner + self.nout]),
            np.concatenate([self.dexps, other.dexps]),
            np.concatenate([self.dcoeffs, other.dcoeffs]),
            np.concatenate([self.downer, other.downer + self.nout * n]),
            max(self.maxdeg, other.maxdeg),
        )

    @property
    def arrays(self):
        return (self.exps, self.coeffs, self.owner, self.dexps, self.dcoeffs, self.downer, self.nout, self.maxdeg)

    def values(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.nout)
        kernels.poly_eval(self.exps, self.coeffs, self.owner, self.maxdeg, x, out)
        return out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.nout * self.nvars)
        kernels.poly_eval(self.dexps, self.dcoeffs, self.downer, self.maxdeg, x, out)
        return out.reshape(self.nout, self.nvars)

    def values_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.poly_eval_batch(self.exps, self.coeffs, self.owner, self.nout, self.maxdeg, X)

    def jacobian_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        flat = kernels.poly_eval_batch(self.dexps, self.dcoeffs, self.downer, self.nout * self.nvars, self.maxdeg, X)
        return flat.reshape(X.shape[0], self.nout, self.nvars)

    def term_scale(self, x: np.ndarray) -> float:
        """Sum of absolute term magnitudes at x (backward-error scale for residuals)."""
        return kernels.term_scale(self.exps, self.coeffs, self.maxdeg, x)
