"""Periodic level-set expressions.

A small recursive-descent parser for trigonometric sums such as
``cos(X)+cos(Y)+cos(Z)`` and a vectorized evaluator over points and voxel
grids.  Variables ``X, Y, Z`` are the cell coordinates scaled by 2*pi, so an
expression is sampled on the unit cube ``[0, 1)^dims``.

Grammar (``^2`` binds tighter than unary minus, which binds tighter than
``*``, which binds tighter than ``+``/``-``)::

    expr    := term (("+" | "-") term)*
    term    := unary ("*" unary)*
    unary   := "-" unary | power
    power   := primary ("^" "2")?
    primary := NUMBER | X | Y | Z | ("sin" | "cos") "(" expr ")" | "(" expr ")"
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VARIABLES = ("X", "Y", "Z")
FUNCTIONS = ("sin", "cos")
MIN_GRID_RESOLUTION = 8


class ExprError(ValueError):
    """Raised for malformed expressions; ``offset`` is the byte offset."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} at offset {offset}"
        super().__init__(message)


# --- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0 -> X, 1 -> Y, 2 -> Z


@dataclass(frozen=True)
class Func:
    name: str
    arg: object


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Square:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str  # one of "+", "-", "*"
    left: object
    right: object


class FamilyForm(enum.Enum):
    """How a level-set field is turned into solid material."""

    LE = "LE"  # f <= t
    GE = "GE"  # f >= t
    SQ = "SQ"  # f^2 <= t^2 (thin wall)


@dataclass(frozen=True)
class LevelSetExpr:
    ast: object
    dims: int
    source_text: str = field(default="", compare=False)

    def __call__(self, *coords):
        return evaluate_array(self, coords)

    def __str__(self):
        return to_text(self.ast)


# --- tokenizer / parser --------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


def _byte_offset(text, char_pos):
    return len(text[:char_pos].encode("utf-8"))


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExprError(message, _byte_offset(self.text, tok[2]))

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "end":
            want = repr(value)
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise self.error(f"expected {want}, got {got}")
        return self.advance()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected token {tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] == "*" and self.peek()[0] == "op":
            self.advance()
            node = BinOp("*", node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.primary()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.advance()
            tok = self.peek()
            if tok[0] != "num" or float(tok[1]) != 2.0:
                raise self.error("only the exponent 2 is supported")
            self.advance()
            node = Square(node)
        return node

    def primary(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.advance()
            return Const(float(value))
        if kind == "name":
            self.advance()
            if value in VARIABLES:
                return Var(VARIABLES.index(value))
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(value, arg)
            raise self.error(f"unknown identifier {value!r}", tok)
        if kind == "op" and value == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected token {value!r}")


def parse(text, dims=None, check_periodic=True):
    """Parse ``text`` into a :class:`LevelSetExpr`.

    ``dims`` defaults to 3 when ``Z`` appears and 2 otherwise.  With
    ``check_periodic`` every variable must sit inside a ``sin``/``cos``
    argument that is an integer combination of ``X, Y, Z`` plus a constant,
    which makes the field 2*pi periodic in each variable.
    """
    if text is None or not text.strip():
        raise ExprError("empty expression", 0)
    ast = _Parser(text).parse()
    used = _variables(ast)
    inferred = 3 if 2 in used else 2
    if dims is None:
        dims = inferred
    if dims not in (2, 3):
        raise ExprError(f"dims must be 2 or 3, got {dims}")
    if used and max(used) >= dims:
        raise ExprError(f"variable {VARIABLES[max(used)]} not allowed for dims={dims}")
    if check_periodic:
        _check_periodic(ast, inside_trig=False)
    return LevelSetExpr(ast, dims, text)


def _variables(node):
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Const):
        return set()
    if isinstance(node, (Func, Neg, Square)):
        return _variables(node.arg)
    return _variables(node.left) | _variables(node.right)


def _affine(node):
    """Return (c0, cx, cy, cz) if ``node`` is affine in the variables, else None."""
    if isinstance(node, Const):
        return (node.value, 0.0, 0.0, 0.0)
    if isinstance(node, Var):
        out = [0.0, 0.0, 0.0, 0.0]
        out[node.index + 1] = 1.0
        return tuple(out)
    if isinstance(node, Neg):
        a = _affine(node.arg)
        return None if a is None else tuple(-v for v in a)
    if isinstance(node, BinOp):
        a, b = _affine(node.left), _affine(node.right)
        if a is None or b is None:
            return None
        if node.op == "+":
            return tuple(x + y for x, y in zip(a, b))
        if node.op == "-":
            return tuple(x - y for x, y in zip(a, b))
        # product is affine only when one side is constant
        if not any(a[1:]):
            return tuple(a[0] * y for y in b)
        if not any(b[1:]):
            return tuple(b[0] * x for x in a)
        return None
    if isinstance(node, Square):
        a = _affine(node.arg)
        if a is not None and not any(a[1:]):
            return (a[0] * a[0], 0.0, 0.0, 0.0)
        return None
    if isinstance(node, Func):
        a = _affine(node.arg)
        if a is not None and not any(a[1:]):
            return (_SCALAR_FUNCS[node.name](a[0]), 0.0, 0.0, 0.0)
        return None
    return None


def _check_periodic(node, inside_trig):
    if isinstance(node, Var) and not inside_trig:
        raise ExprError(f"variable {VARIABLES[node.index]} outside sin/cos breaks periodicity")
    if isinstance(node, Func):
        a = _affine(node.arg)
        if a is None:
            raise ExprError(f"argument of {node.name} is not affine in X, Y, Z")
        for coef in a[1:]:
            if abs(coef - round(coef)) > 1e-12:
                raise ExprError(f"non-integer coefficient {coef} inside {node.name}")
        return
    if isinstance(node, (Neg, Square)):
        _check_periodic(node.arg, inside_trig)
    elif isinstance(node, BinOp):
        _check_periodic(node.left, inside_trig)
        _check_periodic(node.right, inside_trig)


# --- printing ------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2}


def to_text(node):
    """Render an AST back to parseable text (fully round-trippable)."""
    if isinstance(node, Const):
        text = repr(float(node.value))
        return text
    if isinstance(node, Var):
        return VARIABLES[node.index]
    if isinstance(node, Func):
        return f"{node.name}({to_text(node.arg)})"
    if isinstance(node, Neg):
        return f"-({to_text(node.arg)})"
    if isinstance(node, Square):
        return f"({to_text(node.arg)})^2"
    left = to_text(node.left)
    right = to_text(node.right)
    if isinstance(node.left, BinOp) and _PREC[node.left.op] < _PREC[node.op]:
        left = f"({left})"
    if isinstance(node.right, BinOp) and _PREC[node.right.op] <= _PREC[node.op]:
        right = f"({right})"
    return f"{left}{node.op}{right}"


# --- evaluation --------------------------------------------------------------

_SCALAR_FUNCS = {"sin": math.sin, "cos": math.cos}
_ARRAY_FUNCS = {"sin": np.sin, "cos": np.cos}


def _eval(node, coords):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return coords[node.index]
    if isinstance(node, Func):
        return _ARRAY_FUNCS[node.name](_eval(node.arg, coords))
    if isinstance(node, Neg):
        return -_eval(node.arg, coords)
    if isinstance(node, Square):
        v = _eval(node.arg, coords)
        return v * v
    a = _eval(node.left, coords)
    b = _eval(node.right, coords)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    return a * b


def evaluate_array(expr, coords):
    """Evaluate over broadcastable coordinate arrays in cell units ``[0, 1)``."""
    scaled = [2.0 * np.pi * np.asarray(c, dtype=float) for c in coords]
    used = _variables(expr.ast)
    if used and max(used) >= len(scaled):
        raise ValueError(
            f"expression uses {VARIABLES[max(used)]} but only {len(scaled)} coordinates given"
        )
    out = _eval(expr.ast, scaled)
    shape = np.broadcast_shapes(*(np.shape(c) for c in scaled)) if scaled else ()
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


def evaluate(expr, point):
    """Evaluate ``expr`` at a single point given in cell coordinates."""
    coords = [float(c) for c in np.atleast_1d(point)]
    return float(evaluate_array(expr, coords))


def grid_coordinates(resolution, dims):
    """Voxel-centre coordinates ``(i + 0.5) / n`` as arrays indexed ``[z, y, x]``."""
    centers = (np.arange(resolution) + 0.5) / resolution
    axes = np.meshgrid(*([centers] * dims), indexing="ij")
    # meshgrid "ij" gives axes[0] varying along axis 0; reverse so x is last
    return tuple(reversed(axes))


def evaluate_grid(expr, resolution, dims=None):
    """Sample ``expr`` at voxel centres of an ``n^dims`` grid.

    The result is indexed ``[z, y, x]`` (``[y, x]`` in 2D), so a C-order
    ravel has x varying fastest.
    """
    if resolution < MIN_GRID_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_GRID_RESOLUTION}, got {resolution}")
    dims = dims or expr.dims
    coords = grid_coordinates(resolution, dims)
    return evaluate_array(expr, coords)


# --- catalog -----------------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    family_id: str
    expr: LevelSetExpr
    form: FamilyForm


def parse_catalog(text, dims=None):
    """Parse ``family_id | expression | form`` lines; ``#`` starts a comment."""
    entries = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 3:
            raise ExprError(f"catalog line {lineno}: expected 3 '|'-separated fields")
        fid, src, form = parts
        if fid in seen:
            raise ExprError(f"catalog line {lineno}: duplicate family id {fid!r}")
        seen.add(fid)
        try:
            form = FamilyForm(form.upper())
        except ValueError:
            raise ExprError(f"catalog line {lineno}: unknown form {form!r}") from None
        try:
            expr = parse(src, dims=dims)
        except ExprError as exc:
            raise ExprError(f"catalog line {lineno} ({fid}): {exc}") from None
        entries.append(CatalogEntry(fid, expr, form))
    return entries


def load_catalog(path, dims=None):
    return parse_catalog(Path(path).read_text(encoding="utf-8"), dims=dims)


def starter_catalog_path(dims=3):
    name = "catalog3d.txt" if dims == 3 else "catalog2d.txt"
    return Path(__file__).parent / "data" / name


def _strip_scale(node):
    """Drop a positive constant factor at the root: ``c*f`` -> ``f``."""
    while isinstance(node, BinOp) and node.op == "*":
        if isinstance(node.left, Const) and node.left.value > 0:
            node = node.right
        elif isinstance(node.right, Const) and node.right.value > 0:
            node = node.left
        else:
            break
    return node


def find_scalar_duplicates(entries):
    """Pairs of family ids whose expressions differ only by a positive factor.

    Under the same form such families produce identical cells at every
    density, because the isovalue absorbs the factor.
    """
    groups = {}
    for e in entries:
        groups.setdefault((_strip_scale(e.expr.ast), e.form), []).append(e.family_id)
    pairs = []
    for ids in groups.values():
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                pairs.append((ids[i], ids[j]))
    return pairs
