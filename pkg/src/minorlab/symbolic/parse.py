"""Parser and printer for the vector-field DSL.

Grammar (EBNF, also documented in the README):

    field    = [ "-" ] fterm { ("+" | "-") fterm } ;
    fterm    = factor { "*" factor } ;          (* exactly one basis symbol *)
    factor   = atom [ "^" integer ] ;
    atom     = rational | root | variable | "eps" | basis | "(" scalar ")" ;
    scalar   = [ "-" ] sterm { ("+" | "-") sterm } ;
    sterm    = sfactor { "*" sfactor } ;
    sfactor  = satom [ "^" integer ] ;
    satom    = rational | root | variable | "eps" | "(" scalar ")" ;
    root     = "sqrt" "(" rational ")" ;
    rational = integer [ "/" integer ] ;
    variable = ("x" | "v") digits ;
    basis    = "d/d" ("x" | "v") digits ;

Variables v1..vn alias onto the second half of the coordinates: for even
dimension d = 2n, vj means x_{n+j} (the usual position/velocity split).
Exponents must be nonnegative; basis symbols cannot be raised to powers
or nested inside parentheses.  Parse errors carry the byte offset.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .poly import PolyExpr, VectorField
from .surd import Surd

_TOKEN = re.compile(
    r"""(?P<ws>\s+)
      | (?P<basis>d/d[xv]\d+)
      | (?P<int>\d+)
      | (?P<name>[A-Za-z_]\w*)
      | (?P<op>[-+*^()/])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    """Syntax or dimension error with the byte offset of the offender."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def _tokenize(text: str):
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = _tokenize(text)
        self.i = 0

    # -- token helpers -------------------------------------------------

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, text: str | None = None):
        k, t, off = self.peek()
        if k != kind or (text is not None and t != text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {t or 'end of input'!r}", off)
        return self.next()

    # -- index resolution ------------------------------------------------

    def _coord(self, letter: str, idx: int, offset: int) -> int:
        if idx < 1:
            raise ParseError(f"variable index must be >= 1, got {idx}", offset)
        if letter == "x":
            if idx > self.dim:
                raise ParseError(
                    f"variable x{idx} exceeds dimension {self.dim}", offset
                )
            return idx - 1
        if self.dim % 2:
            raise ParseError(
                f"v{idx} needs an even dimension for the (x, v) split", offset
            )
        n = self.dim // 2
        if idx > n:
            raise ParseError(f"variable v{idx} exceeds dimension {self.dim}", offset)
        return n + idx - 1

    # -- grammar ---------------------------------------------------------

    def parse_field(self) -> VectorField:
        comps = [PolyExpr.zero(self.dim) for _ in range(self.dim)]
        sign = 1
        if self.peek()[:2] == ("op", "-"):
            self.next()
            sign = -1
        while True:
            basis, poly = self.fterm()
            comps[basis] = comps[basis] + (poly if sign > 0 else -poly)
            k, t, _ = self.peek()
            if k == "op" and t in "+-":
                self.next()
                sign = 1 if t == "+" else -1
            else:
                break
        self.expect("end")
        return VectorField(comps)

    def parse_scalar_top(self) -> PolyExpr:
        p = self.scalar()
        self.expect("end")
        return p

    def fterm(self) -> tuple[int, PolyExpr]:
        basis = None
        poly = PolyExpr.const(self.dim, 1)
        while True:
            k, t, off = self.peek()
            if k == "basis":
                self.next()
                if basis is not None:
                    raise ParseError("more than one basis symbol in a term", off)
                nk, nt, noff = self.peek()
                if nk == "op" and nt == "^":
                    raise ParseError("cannot exponentiate a basis symbol", noff)
                basis = self._coord(t[3], int(t[4:]), off)
            else:
                poly = poly * self.sfactor()
            k, t, _ = self.peek()
            if k == "op" and t == "*":
                self.next()
                continue
            break
        if basis is None:
            raise ParseError("term is missing a basis symbol d/dx#", self.peek()[2])
        return basis, poly

    def scalar(self) -> PolyExpr:
        sign = 1
        if self.peek()[:2] == ("op", "-"):
            self.next()
            sign = -1
        acc = self.sterm()
        if sign < 0:
            acc = -acc
        while True:
            k, t, _ = self.peek()
            if k == "op" and t in "+-":
                self.next()
                nxt = self.sterm()
                acc = acc + nxt if t == "+" else acc - nxt
            else:
                return acc

    def sterm(self) -> PolyExpr:
        acc = self.sfactor()
        while self.peek()[:2] == ("op", "*"):
            self.next()
            acc = acc * self.sfactor()
        return acc

    def sfactor(self) -> PolyExpr:
        atom = self.satom()
        k, t, _ = self.peek()
        if k == "op" and t == "^":
            self.next()
            nk, nt, noff = self.peek()
            if nk == "op" and nt == "-":
                raise ParseError("negative exponent", noff)
            _, digits, _ = self.expect("int")
            return atom ** int(digits)
        return atom

    def satom(self) -> PolyExpr:
        k, t, off = self.peek()
        if k == "int":
            self.next()
            num = int(t)
            if self.peek()[:2] == ("op", "/"):
                self.next()
                _, den, doff = self.expect("int")
                if int(den) == 0:
                    raise ParseError("zero denominator", doff)
                return PolyExpr.const(self.dim, Fraction(num, int(den)))
            return PolyExpr.const(self.dim, num)
        if k == "name":
            self.next()
            if t == "eps":
                return PolyExpr.eps(self.dim)
            if t == "sqrt":
                self.expect("op", "(")
                q = self._rational()
                self.expect("op", ")")
                return PolyExpr.const(self.dim, Surd.sqrt(q))
            m = re.fullmatch(r"([xv])(\d+)", t)
            if m:
                return PolyExpr.var(self.dim, self._coord(m.group(1), int(m.group(2)), off))
            raise ParseError(f"unknown name {t!r}", off)
        if k == "op" and t == "(":
            self.next()
            inner = self.scalar()
            self.expect("op", ")")
            return inner
        if k == "basis":
            raise ParseError("basis symbol not allowed inside a scalar", off)
        raise ParseError(f"expected a value, found {t or 'end of input'!r}", off)

    def _rational(self) -> Fraction:
        neg = False
        if self.peek()[:2] == ("op", "-"):
            self.next()
            neg = True
        _, num, _ = self.expect("int")
        val = Fraction(int(num))
        if self.peek()[:2] == ("op", "/"):
            self.next()
            _, den, doff = self.expect("int")
            if int(den) == 0:
                raise ParseError("zero denominator", doff)
            val = Fraction(int(num), int(den))
        return -val if neg else val


def parse_field(text: str, dim: int) -> VectorField:
    """Parse a vector-field expression; round-trips with format_field."""
    return _Parser(text, dim).parse_field()


def parse_scalar(text: str, dim: int) -> PolyExpr:
    """Parse a scalar polynomial (no basis symbols)."""
    return _Parser(text, dim).parse_scalar_top()


# -- printing ------------------------------------------------------------


def _format_coeff(c: Surd) -> tuple[str, bool]:
    """Return (text, needs_parens_in_product)."""
    s = str(c)
    simple = not ("+" in s[1:] or "-" in s[1:])
    return s, not simple


def _format_monomial(key: tuple, dim: int) -> list[str]:
    parts = []
    for i, e in enumerate(key[:dim]):
        if e == 1:
            parts.append(f"x{i + 1}")
        elif e:
            parts.append(f"x{i + 1}^{e}")
    if key[dim] == 1:
        parts.append("eps")
    elif key[dim]:
        parts.append(f"eps^{key[dim]}")
    return parts


def format_scalar(p: PolyExpr) -> str:
    if p.is_zero():
        return "0"
    chunks = []
    for key in sorted(p.terms):
        coeff, parens = _format_coeff(p.terms[key])
        mono = _format_monomial(key, p.dim)
        neg = coeff.startswith("-") and not parens
        if neg:
            coeff = coeff[1:]
        if parens:
            coeff = f"({coeff})"
        factors = ([coeff] if coeff != "1" or not mono else []) + mono
        chunks.append(("-" if neg else "+", "*".join(factors) or "1"))
    sign, text = chunks[0]
    out = ("-" if sign == "-" else "") + text
    for sign, text in chunks[1:]:
        out += f" {sign} {text}"
    return out


def format_field(X: VectorField) -> str:
    """Canonical text for a field; parse(format(X)) == X exactly."""
    chunks = []
    for j, comp in enumerate(X.components):
        basis = f"d/dx{j + 1}"
        for key in sorted(comp.terms):
            coeff, parens = _format_coeff(comp.terms[key])
            mono = _format_monomial(key, comp.dim)
            neg = coeff.startswith("-") and not parens
            if neg:
                coeff = coeff[1:]
            if parens:
                coeff = f"({coeff})"
            factors = ([coeff] if coeff != "1" else []) + mono + [basis]
            chunks.append(("-" if neg else "+", "*".join(factors)))
    if not chunks:
        return "0*d/dx1"
    sign, text = chunks[0]
    out = ("-" if sign == "-" else "") + text
    for sign, text in chunks[1:]:
        out += f" {sign} {text}"
    return out
