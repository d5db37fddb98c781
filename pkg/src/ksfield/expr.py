"""Symbolic scalar expressions over named real coordinates.

The AST covers real literals, named variables, +, -, *, /, integer powers
and the unary functions sin, cos, exp, log, sqrt.  Nodes are immutable
(frozen dataclasses), so expressions are safe to share across threads;
differentiation, substitution and evaluation are pure.

Simplification is best-effort only (constant folding and 0/1 identities,
applied by the smart constructors below).  Nothing downstream relies on a
canonical form: all correctness checks are evaluation-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Union


class ExprError(Exception):
    pass


class ParseError(ExprError):
    """Syntax error; ``offset`` is the byte offset into the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UndeclaredNameError(ParseError):
    def __init__(self, name: str, offset: int):
        ParseError.__init__(self, f"undeclared identifier '{name}'", offset)
        self.name = name


class EvalError(ExprError):
    pass


class UnboundVariableError(EvalError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable '{name}'")
        self.name = name


class DomainError(EvalError):
    """Evaluation left the real domain or produced a non-finite value."""


_FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}

Bindings = Mapping[str, float]


@dataclass(frozen=True)
class Expr:
    def diff(self, name: str) -> "Expr":
        raise NotImplementedError

    def _ev(self, env: Bindings) -> float:
        raise NotImplementedError

    def subs(self, mapping: Mapping[str, "Expr"]) -> "Expr":
        raise NotImplementedError

    def free_vars(self) -> frozenset:
        raise NotImplementedError

    # Arithmetic sugar so library code can assemble expressions directly.
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, exponent):
        return pow_int(self, exponent)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def diff(self, name):
        return _ZERO

    def _ev(self, env):
        return self.value

    def subs(self, mapping):
        return self

    def free_vars(self):
        return frozenset()


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def diff(self, name):
        return _ONE if name == self.name else _ZERO

    def _ev(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise UnboundVariableError(self.name) from None

    def subs(self, mapping):
        return mapping.get(self.name, self)

    def free_vars(self):
        return frozenset((self.name,))


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def diff(self, name):
        return add(self.left.diff(name), self.right.diff(name))

    def _ev(self, env):
        return self.left._ev(env) + self.right._ev(env)

    def subs(self, mapping):
        return add(self.left.subs(mapping), self.right.subs(mapping))

    def free_vars(self):
        return self.left.free_vars() | self.right.free_vars()


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def diff(self, name):
        return sub(self.left.diff(name), self.right.diff(name))

    def _ev(self, env):
        return self.left._ev(env) - self.right._ev(env)

    def subs(self, mapping):
        return sub(self.left.subs(mapping), self.right.subs(mapping))

    def free_vars(self):
        return self.left.free_vars() | self.right.free_vars()


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def diff(self, name):
        return add(
            mul(self.left.diff(name), self.right),
            mul(self.left, self.right.diff(name)),
        )

    def _ev(self, env):
        return self.left._ev(env) * self.right._ev(env)

    def subs(self, mapping):
        return mul(self.left.subs(mapping), self.right.subs(mapping))

    def free_vars(self):
        return self.left.free_vars() | self.right.free_vars()


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr

    def diff(self, name):
        if isinstance(self.right, Num):
            return div(self.left.diff(name), self.right)
        # (u/w)' = (u'w - uw') / w^2
        return div(
            sub(
                mul(self.left.diff(name), self.right),
                mul(self.left, self.right.diff(name)),
            ),
            pow_int(self.right, 2),
        )

    def _ev(self, env):
        denom = self.right._ev(env)
        if denom == 0.0:
            raise DomainError("division by zero")
        return self.left._ev(env) / denom

    def subs(self, mapping):
        return div(self.left.subs(mapping), self.right.subs(mapping))

    def free_vars(self):
        return self.left.free_vars() | self.right.free_vars()


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def diff(self, name):
        # d(u^m) = m u^(m-1) u'
        return mul(
            mul(Num(float(self.exponent)), pow_int(self.base, self.exponent - 1)),
            self.base.diff(name),
        )

    def _ev(self, env):
        base = self.base._ev(env)
        if base == 0.0 and self.exponent < 0:
            raise DomainError("zero raised to a negative power")
        return base ** self.exponent

    def subs(self, mapping):
        return pow_int(self.base.subs(mapping), self.exponent)

    def free_vars(self):
        return self.base.free_vars()


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def diff(self, name):
        return neg(self.arg.diff(name))

    def _ev(self, env):
        return -self.arg._ev(env)

    def subs(self, mapping):
        return neg(self.arg.subs(mapping))

    def free_vars(self):
        return self.arg.free_vars()


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr

    def diff(self, name):
        u = self.arg
        du = u.diff(name)
        if self.fn == "sin":
            outer = call("cos", u)
        elif self.fn == "cos":
            outer = neg(call("sin", u))
        elif self.fn == "exp":
            outer = call("exp", u)
        elif self.fn == "log":
            return div(du, u)
        elif self.fn == "sqrt":
            return div(du, mul(Num(2.0), call("sqrt", u)))
        else:  # pragma: no cover - constructors reject unknown functions
            raise ExprError(f"unknown function '{self.fn}'")
        return mul(outer, du)

    def _ev(self, env):
        x = self.arg._ev(env)
        try:
            return _FUNCTIONS[self.fn](x)
        except (ValueError, OverflowError) as exc:
            raise DomainError(f"{self.fn}({x!r}): {exc}") from None

    def subs(self, mapping):
        return call(self.fn, self.arg.subs(mapping))

    def free_vars(self):
        return self.arg.free_vars()


_ZERO = Num(0.0)
_ONE = Num(1.0)


def as_expr(value: Union[Expr, int, float]) -> Expr:
    if isinstance(value, Expr):
        return value
    return Num(float(value))


def _is_num(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def add(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        s = a.value + b.value
        if math.isfinite(s):
            return Num(s)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        s = a.value - b.value
        if math.isfinite(s):
            return Num(s)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return _ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        p = a.value * b.value
        if math.isfinite(p):
            return Num(p)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        q = a.value / b.value
        if math.isfinite(q):
            return Num(q)
    if isinstance(b, Num) and b.value != 0.0:
        # fold constants through negation and scalar factors
        if isinstance(a, Neg):
            return neg(div(a.arg, b))
        if isinstance(a, Mul) and isinstance(a.left, Num):
            q = a.left.value / b.value
            if math.isfinite(q):
                return mul(Num(q), a.right)
        if isinstance(a, Mul) and isinstance(a.right, Num):
            q = a.right.value / b.value
            if math.isfinite(q):
                return mul(a.left, Num(q))
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def pow_int(base: Expr, exponent: int) -> Expr:
    if not isinstance(exponent, int):
        raise ExprError(f"exponent must be an integer, got {exponent!r}")
    if exponent == 0:
        return _ONE
    if exponent == 1:
        return base
    if isinstance(base, Num) and not (base.value == 0.0 and exponent < 0):
        p = base.value ** exponent
        if math.isfinite(p):
            return Num(p)
    return Pow(base, exponent)


def call(fn: str, arg: Expr) -> Expr:
    if fn not in _FUNCTIONS:
        raise ExprError(f"unknown function '{fn}'")
    if isinstance(arg, Num):
        try:
            v = _FUNCTIONS[fn](arg.value)
        except (ValueError, OverflowError):
            return Call(fn, arg)  # keep node; error surfaces at eval time
        if math.isfinite(v):
            return Num(v)
    return Call(fn, arg)


def diff(e: Expr, name: str) -> Expr:
    """Exact symbolic partial derivative of ``e`` with respect to ``name``."""
    return e.diff(name)


def evaluate(e: Expr, env: Bindings) -> float:
    """IEEE double evaluation; raises UnboundVariableError / DomainError."""
    value = e._ev(env)
    if not math.isfinite(value):
        raise DomainError(f"non-finite result {value!r}")
    return value


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    return e.subs(mapping)


def free_vars(e: Expr) -> frozenset:
    return e.free_vars()


def is_zero_expr(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0.0


def is_constant(e: Expr) -> bool:
    return not e.free_vars()


# ---------------------------------------------------------------------------
# printing

_PREC_ADD = 1.0
_PREC_NEG = 1.2
_PREC_MUL = 2.0
_PREC_POW = 3.0
_PREC_ATOM = 4.0


def _prec(e: Expr) -> float:
    if isinstance(e, (Add, Sub)):
        return _PREC_ADD
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Num) and e.value < 0:
        return _PREC_NEG
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _fmt_num(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _emit(e: Expr, min_prec: float) -> str:
    if isinstance(e, Num):
        text = _fmt_num(e.value)
    elif isinstance(e, Var):
        text = e.name
    elif isinstance(e, Add):
        text = f"{_emit(e.left, _PREC_ADD)} + {_emit(e.right, _PREC_ADD + 0.5)}"
    elif isinstance(e, Sub):
        text = f"{_emit(e.left, _PREC_ADD)} - {_emit(e.right, _PREC_ADD + 0.5)}"
    elif isinstance(e, Mul):
        text = f"{_emit(e.left, _PREC_MUL)}*{_emit(e.right, _PREC_MUL + 0.5)}"
    elif isinstance(e, Div):
        text = f"{_emit(e.left, _PREC_MUL)}/{_emit(e.right, _PREC_MUL + 0.5)}"
    elif isinstance(e, Neg):
        text = f"-{_emit(e.arg, _PREC_MUL + 0.5)}"
    elif isinstance(e, Pow):
        exp = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        text = f"{_emit(e.base, _PREC_POW + 0.5)}^{exp}"
    elif isinstance(e, Call):
        text = f"{e.fn}({_emit(e.arg, 0.0)})"
    else:  # pragma: no cover
        raise ExprError(f"cannot print {e!r}")
    if _prec(e) < min_prec:
        return f"({text})"
    return text


def to_source(e: Expr) -> str:
    """Render in the DSL grammar; parse(to_source(e)) is evaluation-equal."""
    return _emit(e, 0.0)


# ---------------------------------------------------------------------------
# parsing

class _Scanner:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.source) and self.source[self.pos] in " \t\r\n":
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        if self.pos >= len(self.source):
            return ""
        return self.source[self.pos]

    def expect(self, char: str):
        if self.peek() != char:
            raise ParseError(f"expected '{char}'", self.pos)
        self.pos += 1

    def scan_number(self) -> float:
        start = self.pos
        src = self.source
        while self.pos < len(src) and src[self.pos].isdigit():
            self.pos += 1
        if self.pos < len(src) and src[self.pos] == ".":
            self.pos += 1
            while self.pos < len(src) and src[self.pos].isdigit():
                self.pos += 1
        if self.pos < len(src) and src[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < len(src) and src[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(src) and src[self.pos].isdigit():
                while self.pos < len(src) and src[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark  # not an exponent: back off
        return float(src[start:self.pos])

    def scan_name(self) -> str:
        start = self.pos
        src = self.source
        while self.pos < len(src) and (src[self.pos].isalnum() or src[self.pos] == "_"):
            self.pos += 1
        return src[start:self.pos]


class _Parser:
    def __init__(self, source: str, names):
        self.sc = _Scanner(source)
        self.names = frozenset(names)

    def parse(self) -> Expr:
        e = self.expr()
        if self.sc.peek() != "":
            raise ParseError(f"unexpected character {self.sc.peek()!r}", self.sc.pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            ch = self.sc.peek()
            if ch == "+":
                self.sc.pos += 1
                e = add(e, self.term())
            elif ch == "-":
                self.sc.pos += 1
                e = sub(e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            ch = self.sc.peek()
            if ch == "*":
                self.sc.pos += 1
                e = mul(e, self.unary())
            elif ch == "/":
                self.sc.pos += 1
                e = div(e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        if self.sc.peek() == "-":
            self.sc.pos += 1
            return neg(self.unary())
        if self.sc.peek() == "+":
            self.sc.pos += 1
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        e = self.atom()
        while self.sc.peek() == "^":
            self.sc.pos += 1
            e = pow_int(e, self.exponent())
        return e

    def exponent(self) -> int:
        ch = self.sc.peek()
        offset = self.sc.pos
        if ch == "(":
            self.sc.pos += 1
            value = self.exponent()
            self.sc.expect(")")
            return value
        sign = 1
        if ch == "-":
            self.sc.pos += 1
            sign = -1
            ch = self.sc.peek()
        if not ch.isdigit():
            raise ParseError("exponent must be an integer constant", offset)
        start = self.sc.pos
        value = self.sc.scan_number()
        if value != int(value):
            raise ParseError("exponent must be an integer constant", start)
        return sign * int(value)

    def atom(self) -> Expr:
        ch = self.sc.peek()
        offset = self.sc.pos
        if ch == "":
            raise ParseError("unexpected end of input", offset)
        if ch == "(":
            self.sc.pos += 1
            e = self.expr()
            self.sc.expect(")")
            return e
        if ch.isdigit() or ch == ".":
            return Num(self.sc.scan_number())
        if ch.isalpha() or ch == "_":
            name = self.sc.scan_name()
            if self.sc.peek() == "(":
                if name not in _FUNCTIONS:
                    raise ParseError(f"unknown function '{name}'", offset)
                self.sc.pos += 1
                arg = self.expr()
                self.sc.expect(")")
                return call(name, arg)
            if name in _FUNCTIONS:
                raise ParseError(f"function '{name}' requires an argument", offset)
            if name not in self.names:
                raise UndeclaredNameError(name, offset)
            return Var(name)
        raise ParseError(f"unexpected character {ch!r}", offset)


def parse(source: str, names: Iterable[str]) -> Expr:
    """Parse infix source over the declared coordinate ``names``.

    Grammar (whitespace-insensitive)::

        expr     = term  { ("+" | "-") term } ;
        term     = unary { ("*" | "/") unary } ;
        unary    = ("+" | "-") unary | power ;
        power    = atom { "^" exponent } ;
        exponent = [ "-" ] integer | "(" exponent ")" ;
        atom     = number | name | name "(" expr ")" | "(" expr ")" ;

    Functions are limited to sin, cos, exp, log, sqrt.
    """
    return _Parser(source, names).parse()


# ---------------------------------------------------------------------------
# compilation to vectorized numpy callables (used on solver hot paths)

def _emit_python(e: Expr) -> str:
    if isinstance(e, Num):
        return f"({e.value!r})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        return f"({_emit_python(e.left)} + {_emit_python(e.right)})"
    if isinstance(e, Sub):
        return f"({_emit_python(e.left)} - {_emit_python(e.right)})"
    if isinstance(e, Mul):
        return f"({_emit_python(e.left)} * {_emit_python(e.right)})"
    if isinstance(e, Div):
        return f"({_emit_python(e.left)} / {_emit_python(e.right)})"
    if isinstance(e, Neg):
        return f"(-{_emit_python(e.arg)})"
    if isinstance(e, Pow):
        return f"({_emit_python(e.base)} ** ({e.exponent}))"
    if isinstance(e, Call):
        return f"_f_{e.fn}({_emit_python(e.arg)})"
    raise ExprError(f"cannot compile {e!r}")  # pragma: no cover


def compile_vectorized(e: Expr, names) -> Callable:
    """Compile to a callable over numpy arrays (one positional arg per name).

    The scalar result of a constant expression is broadcast to the shape of
    the first argument.  Domain violations follow numpy semantics (inf/nan),
    so callers on numeric paths must check finiteness themselves; the strict
    scalar contract lives in :func:`evaluate`.
    """
    import numpy as np

    names = tuple(names)
    missing = free_vars(e) - set(names)
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    arglist = ", ".join(names) if names else "*_ignored"
    src = f"lambda {arglist}: {_emit_python(e)}"
    namespace = {f"_f_{fn}": getattr(np, fn) for fn in _FUNCTIONS}
    fn = eval(src, namespace)  # source generated above; no user input reaches eval

    def wrapped(*args):
        out = fn(*args)
        if args and np.ndim(out) == 0 and np.ndim(args[0]) > 0:
            out = np.full(np.shape(args[0]), float(out))
        return out

    return wrapped
