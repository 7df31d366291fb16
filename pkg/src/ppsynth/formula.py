"""Quantifier-free Presburger predicates: AST, parser, evaluator, normalization.

Atoms are linear threshold constraints ``a.v > b``, remainder constraints
``a.v = b (mod m)``, and (internally) mod-threshold constraints
``(a.v mod m) >= b``.  Formulas combine atoms with ``&``, ``|`` and ``!``.
``evaluate`` is the ground-truth oracle used by all verification code.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field


THRESHOLD = "threshold"
REMAINDER = "remainder"
MOD_THRESHOLD = "mod_threshold"


class FormulaError(ValueError):
    pass


class ParseError(FormulaError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


@dataclass(frozen=True)
class Atom:
    """A single linear constraint.

    kind=threshold:      a.v > bound
    kind=remainder:      a.v = bound (mod modulus)
    kind=mod_threshold:  (a.v mod modulus) >= bound
    """

    kind: str
    coeffs: tuple[tuple[str, int], ...]
    bound: int
    modulus: int | None = None

    def __post_init__(self):
        if self.kind not in (THRESHOLD, REMAINDER, MOD_THRESHOLD):
            raise FormulaError(f"unknown atom kind {self.kind!r}")
        if self.kind == THRESHOLD:
            if self.modulus is not None:
                raise FormulaError("threshold atom must not carry a modulus")
        else:
            if self.modulus is None or self.modulus < 2:
                raise FormulaError("modulus must be >= 2")

    @property
    def coeff_map(self) -> dict[str, int]:
        return dict(self.coeffs)

    def value(self, v: dict[str, int]) -> int:
        return sum(c * v.get(x, 0) for x, c in self.coeffs)

    def holds(self, v: dict[str, int]) -> bool:
        s = self.value(v)
        if self.kind == THRESHOLD:
            return s > self.bound
        if self.kind == REMAINDER:
            return s % self.modulus == self.bound % self.modulus
        return s % self.modulus >= self.bound

    def __str__(self) -> str:
        parts = []
        for x, c in self.coeffs:
            sign = "-" if c < 0 else ("+" if parts else "")
            mag = abs(c)
            parts.append(f"{sign} {mag}*{x}" if parts else f"{sign}{mag}*{x}")
        lin = " ".join(parts) if parts else "0"
        if self.kind == THRESHOLD:
            return f"{lin} > {self.bound}"
        if self.kind == REMAINDER:
            return f"{lin} = {self.bound} (mod {self.modulus})"
        return f"{lin} >= {self.bound} (mod {self.modulus})"


@dataclass(frozen=True)
class Not:
    child: "Node"


@dataclass(frozen=True)
class And:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Or:
    left: "Node"
    right: "Node"


Node = Atom | Not | And | Or


def _collect_vars(node: Node, out: list[str]) -> None:
    if isinstance(node, Atom):
        for x, _ in node.coeffs:
            if x not in out:
                out.append(x)
    elif isinstance(node, Not):
        _collect_vars(node.child, out)
    else:
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)


@dataclass(frozen=True)
class Formula:
    node: Node
    vars: tuple[str, ...] = field(default=())

    @staticmethod
    def of(node: Node, vars: tuple[str, ...] | None = None) -> "Formula":
        if vars is None:
            acc: list[str] = []
            _collect_vars(node, acc)
            vars = tuple(acc)
        return Formula(node, vars)

    def atoms(self) -> list[Atom]:
        out: list[Atom] = []

        def walk(n: Node) -> None:
            if isinstance(n, Atom):
                out.append(n)
            elif isinstance(n, Not):
                walk(n.child)
            else:
                walk(n.left)
                walk(n.right)

        walk(self.node)
        return out

    def __str__(self) -> str:
        def render(n: Node) -> str:
            if isinstance(n, Atom):
                return str(n)
            if isinstance(n, Not):
                return f"!({render(n.child)})"
            op = "&" if isinstance(n, And) else "|"
            return f"({render(n.left)} {op} {render(n.right)})"

        return render(self.node)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>-?\d+)|(?P<var>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>>=|>|=|\+|-|\*|&|\||!|\(|\)))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        for name in ("int", "var", "op"):
            val = m.group(name)
            if val is not None:
                tokens.append((name, val, m.start(name)))
                break
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of formula", len(self.text))
        self.i += 1
        return tok

    def expect(self, value: str) -> tuple[str, str, int]:
        tok = self.next()
        if tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self) -> Formula:
        node = self.term()
        while True:
            tok = self.peek()
            if tok is None:
                break
            if tok[1] == "&":
                self.next()
                node = And(node, self.term())
            elif tok[1] == "|":
                self.next()
                node = Or(node, self.term())
            else:
                raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return Formula.of(node)

    def term(self) -> Node:
        tok = self.peek()
        if tok is not None and tok[1] == "!":
            self.next()
            return Not(self.atom())
        return self.atom()

    def atom(self) -> Atom:
        coeffs = self.lincomb()
        tok = self.next()
        if tok[1] not in (">", ">=", "="):
            raise ParseError(f"expected comparison, found {tok[1]!r}", tok[2])
        op = tok[1]
        bound = self.integer()
        modulus = None
        nxt = self.peek()
        if nxt is not None and nxt[1] == "(":
            self.next()
            mod_tok = self.next()
            if mod_tok[1] != "mod":
                raise ParseError("expected 'mod'", mod_tok[2])
            modulus = self.integer()
            self.expect(")")
            if modulus < 2:
                raise ParseError(f"modulus must be >= 2, got {modulus}", mod_tok[2])
        if op == "=":
            if modulus is None:
                raise ParseError("'=' requires a (mod m) clause", tok[2])
            return Atom(REMAINDER, coeffs, bound, modulus)
        if modulus is not None:
            # Mod-threshold surface form; ">" is sugar for ">= bound+1".
            b = bound if op == ">=" else bound + 1
            return Atom(MOD_THRESHOLD, coeffs, b, modulus)
        b = bound if op == ">" else bound - 1
        return Atom(THRESHOLD, coeffs, b)

    def integer(self) -> int:
        tok = self.next()
        if tok[0] != "int":
            raise ParseError(f"expected integer, found {tok[1]!r}", tok[2])
        return int(tok[1])

    def lincomb(self) -> tuple[tuple[str, int], ...]:
        coeffs: dict[str, int] = {}
        order: list[str] = []
        sign = 1
        first = True
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError("unexpected end of linear combination", len(self.text))
            if not first:
                if tok[1] == "+":
                    sign = 1
                    self.next()
                elif tok[1] == "-":
                    sign = -1
                    self.next()
                else:
                    break
            elif tok[1] == "-":
                sign = -1
                self.next()
            coeff = 1
            tok = self.next()
            if tok[0] == "int":
                coeff = int(tok[1])
                self.expect("*")
                tok = self.next()
            if tok[0] != "var":
                raise ParseError(f"expected variable, found {tok[1]!r}", tok[2])
            var = tok[1]
            if var not in coeffs:
                coeffs[var] = 0
                order.append(var)
            coeffs[var] += sign * coeff
            sign = 1
            first = False
        return tuple((x, coeffs[x]) for x in order)


def parse(text: str) -> Formula:
    """Parse a formula string into an AST (variables left-to-right, deduplicated)."""
    return _Parser(text).parse()


def evaluate(phi: Formula | Node, v: dict[str, int]) -> int:
    """Evaluate a formula on a variable assignment (missing variables are 0)."""
    node = phi.node if isinstance(phi, Formula) else phi
    if isinstance(node, Atom):
        return 1 if node.holds(v) else 0
    if isinstance(node, Not):
        return 1 - evaluate(node.child, v)
    if isinstance(node, And):
        return evaluate(node.left, v) & evaluate(node.right, v)
    return evaluate(node.left, v) | evaluate(node.right, v)


def normalize_threshold(atom: Atom) -> tuple[Atom, int]:
    """Rewrite ``a.v > b`` into ``a'.v >= b'`` with ``b' > 0`` plus a negation flag.

    The returned atom is encoded as a strict threshold ``a'.v > b'-1`` so the
    Atom type stays uniform; callers read the >=-bound as ``bound + 1``.
    If the >=-bound would be nonpositive, the equivalent negated constraint
    ``!(-a.v >= -b')`` is returned with flag 1.
    """
    if atom.kind != THRESHOLD:
        raise FormulaError("normalize_threshold expects a threshold atom")
    ge_bound = atom.bound + 1
    if ge_bound > 0:
        return Atom(THRESHOLD, atom.coeffs, ge_bound - 1), 0
    neg_coeffs = tuple((x, -c) for x, c in atom.coeffs)
    neg_bound = -ge_bound + 1
    return Atom(THRESHOLD, neg_coeffs, neg_bound - 1), 1


def ge_bound(atom: Atom) -> int:
    """The >=-form bound of a threshold atom (``a.v > b`` means ``a.v >= b+1``)."""
    return atom.bound + 1


def normalize_remainder(atom: Atom) -> Node:
    """Rewrite ``a.v = b (mod m)`` into a combination of mod-threshold atoms."""
    if atom.kind != REMAINDER:
        raise FormulaError("normalize_remainder expects a remainder atom")
    m = atom.modulus
    coeffs = tuple((x, c % m) for x, c in atom.coeffs)
    b = atom.bound % m
    if b == 0:
        return Not(Atom(MOD_THRESHOLD, coeffs, 1, m))
    if b == m - 1:
        # (a.v mod m) >= m is unsatisfiable, so the upper conjunct is vacuous.
        return Atom(MOD_THRESHOLD, coeffs, b, m)
    return And(
        Atom(MOD_THRESHOLD, coeffs, b, m),
        Not(Atom(MOD_THRESHOLD, coeffs, b + 1, m)),
    )


def reduce_mod_threshold(atom: Atom) -> Atom:
    """Reduce a mod-threshold atom's coefficients into [0, m)."""
    if atom.kind != MOD_THRESHOLD:
        raise FormulaError("expects a mod-threshold atom")
    m = atom.modulus
    return Atom(MOD_THRESHOLD, tuple((x, c % m) for x, c in atom.coeffs), atom.bound, m)


def metrics(phi: Formula) -> dict[str, int]:
    """Size metrics: norm (largest |coefficient| incl. bounds/moduli), connective
    count, variable count, atom count, and the combined bit-length measure."""
    connectives = 0
    norm = 0
    atom_count = 0

    def walk(n: Node) -> None:
        nonlocal connectives, norm, atom_count
        if isinstance(n, Atom):
            atom_count += 1
            vals = [abs(c) for _, c in n.coeffs] + [abs(n.bound)]
            if n.modulus is not None:
                vals.append(n.modulus)
            norm = max(norm, *vals)
        elif isinstance(n, Not):
            connectives += 1
            walk(n.child)
        else:
            connectives += 1
            walk(n.left)
            walk(n.right)

    walk(phi.node)
    bitlength = connectives + math.ceil(math.log2(norm + 1)) + len(phi.vars)
    return {
        "norm": norm,
        "len": connectives,
        "bitlength": bitlength,
        "var_count": len(phi.vars),
        "atom_count": atom_count,
    }
