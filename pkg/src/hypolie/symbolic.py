"""Symbolic scalar functions: a small differential ring over the rationals.

Elements are trees over rational constants, named variables, n-ary sums and
products, non-negative integer powers, and ``exp``/``sin``/``cos`` of affine
forms.  Construction goes through normalizing constructors (``add``, ``mul``,
``power``, ``func``) that fold constants, flatten, collect like terms and merge
exponentials; there is no further canonical simplification, so equality of
two expressions is decided numerically with :func:`equal_on_samples`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

Number = Union[Fraction, float]

FUNCTIONS = ("exp", "sin", "cos")
_IDENT = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*\Z")


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownVariableError(ParseError):
    pass


class NonAffineError(ExprError):
    pass


def _num(value) -> Number:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"not a number: {value!r}")


def _is_exact(value: Number) -> bool:
    return isinstance(value, Fraction)


class Expr:
    """Immutable expression node.  Use the module-level constructors."""

    __slots__ = ("_key", "_hash")

    def _init_key(self, key: tuple) -> None:
        self._key = key
        self._hash = hash(key)

    @property
    def key(self) -> tuple:
        return self._key

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return isinstance(other, Expr) and self._key == other._key

    def __lt__(self, other: "Expr") -> bool:
        return self._key < other._key

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        if isinstance(other, Expr):
            if not isinstance(other, Const):
                raise ExprError("division is only defined by constants")
            other = other.value
        other = _num(other)
        if other == 0:
            raise ZeroDivisionError("division by zero constant")
        return mul(self, Const(1 / other if not _is_exact(other) else Fraction(1) / other))

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return power(self, k)

    def __str__(self) -> str:
        return to_str(self)

    def __repr__(self) -> str:
        return f"Expr({to_str(self)!r})"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = _num(value)
        self._init_key((0, self.value))


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if not _IDENT.match(name):
            raise ExprError(f"invalid variable name {name!r}")
        self.name = name
        self._init_key((1, name))


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: int):
        self.base = base
        self.exponent = exponent
        self._init_key((2, base.key, exponent))


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        self.name = name
        self.arg = arg
        self._init_key((3, name, arg.key))


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple):
        self.factors = factors
        self._init_key((4, tuple(f.key for f in factors)))


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple):
        self.terms = terms
        self._init_key((5, tuple(t.key for t in terms)))


ZERO = Const(0)
ONE = Const(1)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(value)


def const(value) -> Const:
    return Const(value)


def var(name: str) -> Var:
    return Var(name)


def is_zero(e: Expr) -> bool:
    """Structural zero test (no sampling)."""
    return isinstance(e, Const) and e.value == 0


# ---------------------------------------------------------------------------
# normalizing constructors


def _split_coeff(e: Expr) -> tuple[Number, Expr]:
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        rest = e.factors[1:]
        return e.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return Fraction(1), e


def _scale(rest: Expr, c: Number) -> Expr:
    if c == 1:
        return rest
    if isinstance(rest, Mul):
        return Mul((Const(c),) + rest.factors)
    return Mul((Const(c), rest))


def add(*terms: Expr) -> Expr:
    constant: Number = Fraction(0)
    collected: dict[tuple, list] = {}
    stack = list(terms)
    flat = []
    while stack:
        t = stack.pop(0)
        if isinstance(t, Add):
            stack[0:0] = list(t.terms)
        else:
            flat.append(as_expr(t))
    for t in flat:
        if isinstance(t, Const):
            constant = constant + t.value
            continue
        c, rest = _split_coeff(t)
        slot = collected.get(rest.key)
        if slot is None:
            collected[rest.key] = [c, rest]
        else:
            slot[0] = slot[0] + c
    out = [_scale(rest, c) for c, rest in collected.values() if c != 0]
    out.sort()
    if constant != 0:
        out.insert(0, Const(constant))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Add(tuple(out))


def mul(*factors: Expr) -> Expr:
    coeff: Number = Fraction(1)
    bases: dict[tuple, list] = {}
    exp_args: list[Expr] = []
    stack = list(factors)
    while stack:
        f = as_expr(stack.pop(0))
        if isinstance(f, Mul):
            stack[0:0] = list(f.factors)
            continue
        if isinstance(f, Const):
            coeff = coeff * f.value
            if coeff == 0:
                return ZERO
            continue
        if isinstance(f, Func) and f.name == "exp":
            exp_args.append(f.arg)
            continue
        base, k = (f.base, f.exponent) if isinstance(f, Pow) else (f, 1)
        slot = bases.get(base.key)
        if slot is None:
            bases[base.key] = [base, k]
        else:
            slot[1] += k
    out = [power(b, k) for b, k in bases.values()]
    if exp_args:
        e = func("exp", add(*exp_args))
        if isinstance(e, Const):
            coeff = coeff * e.value
        else:
            out.append(e)
    flat = []
    for f in out:
        if isinstance(f, Const):
            coeff = coeff * f.value
        elif isinstance(f, Mul):
            c, rest = _split_coeff(f)
            coeff = coeff * c
            flat.extend(rest.factors if isinstance(rest, Mul) else [rest])
        else:
            flat.append(f)
    if coeff == 0:
        return ZERO
    flat.sort()
    if not flat:
        return Const(coeff)
    if coeff == 1 and len(flat) == 1:
        return flat[0]
    if coeff != 1:
        flat.insert(0, Const(coeff))
    return Mul(tuple(flat))


def neg(e: Expr) -> Expr:
    return mul(Const(-1), e)


def power(base: Expr, k) -> Expr:
    if isinstance(k, Expr):
        if not isinstance(k, Const):
            raise ExprError("exponent must be a constant")
        k = k.value
    if isinstance(k, float):
        if not k.is_integer():
            raise ExprError(f"fractional power {k}")
        k = int(k)
    if isinstance(k, Fraction):
        if k.denominator != 1:
            raise ExprError(f"fractional power {k}")
        k = int(k)
    if k < 0:
        raise ExprError(f"negative power {k}")
    base = as_expr(base)
    if k == 0:
        return ONE
    if k == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** k)
    if isinstance(base, Pow):
        return Pow(base.base, base.exponent * k)
    if isinstance(base, Mul):
        return mul(*(power(f, k) for f in base.factors))
    if isinstance(base, Func) and base.name == "exp":
        return func("exp", mul(Const(k), base.arg))
    return Pow(base, k)


def affine_form(e: Expr) -> tuple[Number, dict[str, Number]] | None:
    """Return ``(constant, {var: coefficient})`` if ``e`` is affine, else None."""
    if isinstance(e, Const):
        return e.value, {}
    if isinstance(e, Var):
        return Fraction(0), {e.name: Fraction(1)}
    if isinstance(e, Add):
        c0: Number = Fraction(0)
        coeffs: dict[str, Number] = {}
        for t in e.terms:
            part = affine_form(t)
            if part is None:
                return None
            c0 = c0 + part[0]
            for name, c in part[1].items():
                coeffs[name] = coeffs.get(name, Fraction(0)) + c
        return c0, {k: v for k, v in coeffs.items() if v != 0}
    if isinstance(e, Mul):
        c, rest = _split_coeff(e)
        if isinstance(rest, Mul):
            return None
        part = affine_form(rest)
        if part is None:
            return None
        return c * part[0], {k: c * v for k, v in part[1].items()}
    return None


def _affine_expr(c0: Number, coeffs: Mapping[str, Number]) -> Expr:
    return add(Const(c0), *(mul(Const(c), Var(v)) for v, c in coeffs.items()))


def func(name: str, arg: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ExprError(f"unknown function {name!r}")
    arg = as_expr(arg)
    form = affine_form(arg)
    if form is None:
        form = affine_form(expand(arg))
    if form is None:
        raise NonAffineError(f"argument of {name} is not affine: {to_str(arg)}")
    arg = _affine_expr(*form)
    if isinstance(arg, Const) and arg.value == 0:
        return ZERO if name == "sin" else ONE
    return Func(name, arg)


def exp(arg) -> Expr:
    return func("exp", as_expr(arg))


def sin(arg) -> Expr:
    return func("sin", as_expr(arg))


def cos(arg) -> Expr:
    return func("cos", as_expr(arg))


# ---------------------------------------------------------------------------
# structural operations


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    return frozenset().union(*(free_vars(c) for c in _children(e)))


def _children(e: Expr) -> tuple:
    if isinstance(e, Add):
        return e.terms
    if isinstance(e, Mul):
        return e.factors
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, Func):
        return (e.arg,)
    return ()


def is_exact(e: Expr) -> bool:
    """True when every constant in ``e`` is rational."""
    if isinstance(e, Const):
        return _is_exact(e.value)
    return all(is_exact(c) for c in _children(e))


@lru_cache(maxsize=200_000)
def differentiate(e: Expr, v: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Add):
        return add(*(differentiate(t, v) for t in e.terms))
    if isinstance(e, Mul):
        parts = []
        fs = e.factors
        for i, f in enumerate(fs):
            d = differentiate(f, v)
            if not is_zero(d):
                parts.append(mul(*fs[:i], d, *fs[i + 1:]))
        return add(*parts)
    if isinstance(e, Pow):
        d = differentiate(e.base, v)
        if is_zero(d):
            return ZERO
        return mul(Const(e.exponent), power(e.base, e.exponent - 1), d)
    if isinstance(e, Func):
        slope = differentiate(e.arg, v)
        if is_zero(slope):
            return ZERO
        if e.name == "exp":
            return mul(slope, e)
        if e.name == "sin":
            return mul(slope, Func("cos", e.arg))
        return mul(Const(-1), slope, Func("sin", e.arg))
    raise TypeError(type(e))


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions.

    Raises NonAffineError when a substituted exp/sin/cos argument stops being
    affine; callers fall back to numeric evaluation in that case.
    """
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict[tuple, Expr] = {}

    def go(x: Expr) -> Expr:
        got = memo.get(x.key)
        if got is not None:
            return got
        if isinstance(x, Const):
            out = x
        elif isinstance(x, Var):
            out = mapping.get(x.name, x)
        elif isinstance(x, Add):
            out = add(*(go(t) for t in x.terms))
        elif isinstance(x, Mul):
            out = mul(*(go(f) for f in x.factors))
        elif isinstance(x, Pow):
            out = power(go(x.base), x.exponent)
        else:
            out = func(x.name, go(x.arg))
        memo[x.key] = out
        return out

    return go(e)


def expand(e: Expr) -> Expr:
    """Distribute products and powers over sums."""
    if isinstance(e, (Const, Var, Func)):
        return e
    if isinstance(e, Add):
        return add(*(expand(t) for t in e.terms))
    if isinstance(e, Pow):
        b = expand(e.base)
        if not isinstance(b, Add):
            return power(b, e.exponent)
        out: Expr = ONE
        for _ in range(e.exponent):
            out = _mul_expanded(out, b)
        return out
    out = ONE
    for f in e.factors:
        out = _mul_expanded(out, expand(f))
    return out


def _mul_expanded(a: Expr, b: Expr) -> Expr:
    ta = a.terms if isinstance(a, Add) else (a,)
    tb = b.terms if isinstance(b, Add) else (b,)
    return add(*(mul(x, y) for x in ta for y in tb))


# ---------------------------------------------------------------------------
# printing


def _const_str(v: Number) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return repr(float(v))


def _is_negative_term(t: Expr) -> bool:
    if isinstance(t, Const):
        return t.value < 0
    c, _ = _split_coeff(t)
    return c < 0


def to_str(e: Expr) -> str:
    if isinstance(e, Const):
        return _const_str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_str(e.arg)})"
    if isinstance(e, Pow):
        b = to_str(e.base)
        if not isinstance(e.base, (Var, Func)):
            b = f"({b})"
        return f"{b}^{e.exponent}"
    if isinstance(e, Mul):
        parts = []
        for f in e.factors:
            s = to_str(f)
            if isinstance(f, Add):
                s = f"({s})"
            parts.append(s)
        return "*".join(parts)
    out = to_str(e.terms[0])
    for t in e.terms[1:]:
        if _is_negative_term(t):
            out += " - " + to_str(neg(t))
        else:
            out += " + " + to_str(t)
    return out


# ---------------------------------------------------------------------------
# parsing


@dataclass(frozen=True)
class VarSet:
    """Ordered variable names; ``time`` optionally marks one of them as t."""

    names: tuple[str, ...]
    time: str | None = None

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise ExprError(f"duplicate variable names in {names}")
        for n in names:
            if not _IDENT.match(n) or n in FUNCTIONS:
                raise ExprError(f"invalid variable name {n!r}")
        if self.time is not None and self.time not in names:
            raise ExprError(f"time variable {self.time!r} not among {names}")

    @classmethod
    def of(cls, *names: str, time: str | None = None) -> "VarSet":
        return cls(tuple(names), time)

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __getitem__(self, i: int) -> str:
        return self.names[i]

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def spatial(self) -> tuple[str, ...]:
        return tuple(n for n in self.names if n != self.time)

    def symbols(self) -> list[Var]:
        return [Var(n) for n in self.names]


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[a-zA-Z][a-zA-Z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, names: frozenset[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.names = names

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected {text!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else add(e, neg(rhs))
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            rhs = self.unary()
            if op == "*":
                e = mul(e, rhs)
            else:
                if not isinstance(rhs, Const):
                    raise ParseError("division is only allowed by a constant", pos)
                if rhs.value == 0:
                    raise ParseError("division by zero", pos)
                e = e / rhs
        return e

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return neg(self.unary())
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            _, _, pos = self.take()
            k = self.unary()
            if not isinstance(k, Const):
                raise ParseError("exponent must be a constant", pos)
            v = k.value
            if v < 0:
                raise ParseError(f"negative power {_const_str(v)}", pos)
            if (isinstance(v, Fraction) and v.denominator != 1) or (
                isinstance(v, float) and not v.is_integer()
            ):
                raise ParseError(f"fractional power {_const_str(v)}", pos)
            return power(base, int(v))
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(Fraction(text))
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                try:
                    return func(text, arg)
                except NonAffineError as exc:
                    raise ParseError(str(exc), pos) from None
            if text not in self.names:
                raise UnknownVariableError(f"unknown variable {text!r}", pos)
            return Var(text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def parse(text: str, vars: VarSet | Iterable[str]) -> Expr:
    names = frozenset(vars.names if isinstance(vars, VarSet) else vars)
    return _Parser(text, names).parse()


# ---------------------------------------------------------------------------
# evaluation

_NP_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}


def _float_pair(value) -> tuple[float, np.longdouble]:
    q = Fraction(value) if not isinstance(value, float) else None
    if q is None:
        return value, np.longdouble(value)
    return float(q), np.longdouble(q.numerator) / np.longdouble(q.denominator)


def _build(e: Expr, index: Mapping[str, int]) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(e, Const):
        v, vl = _float_pair(e.value)
        return lambda X: np.full(X.shape[:-1], vl if X.dtype == np.longdouble else v, dtype=X.dtype)
    if isinstance(e, Var):
        try:
            j = index[e.name]
        except KeyError:
            raise ExprError(f"variable {e.name!r} not in evaluation order") from None
        return lambda X: X[..., j]
    if isinstance(e, Add):
        parts = [_build(t, index) for t in e.terms]

        def f_add(X):
            out = parts[0](X).copy()
            for p in parts[1:]:
                out += p(X)
            return out

        return f_add
    if isinstance(e, Mul):
        c = cl = 1.0
        fs = list(e.factors)
        if isinstance(fs[0], Const):
            c, cl = _float_pair(fs.pop(0).value)
        parts = [_build(f, index) for f in fs]

        def f_mul(X):
            out = parts[0](X) * (cl if X.dtype == np.longdouble else c)
            for p in parts[1:]:
                out = out * p(X)
            return out

        return f_mul
    if isinstance(e, Pow):
        b = _build(e.base, index)
        k = e.exponent
        return lambda X: b(X) ** k
    fn = _NP_FUNCS[e.name]
    a = _build(e.arg, index)
    return lambda X: fn(a(X))


@lru_cache(maxsize=50_000)
def lambdify(e: Expr, names: tuple[str, ...]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``e`` to a vectorized function of an ``(..., len(names))`` array."""
    inner = _build(e, {n: i for i, n in enumerate(names)})

    def f(X):
        X = np.asarray(X)
        if X.dtype != np.longdouble:
            X = X.astype(float)
        return inner(X)

    return f


def evaluate(e: Expr, point: Sequence[float], vars: VarSet | Sequence[str]) -> float:
    names = tuple(vars.names if isinstance(vars, VarSet) else vars)
    point = np.asarray(point, dtype=float)
    if point.shape != (len(names),):
        raise ExprError(f"point has length {point.shape}, expected {len(names)}")
    return float(lambdify(e, names)(point))


def evaluate_many(e: Expr, points: np.ndarray, vars: VarSet | Sequence[str]) -> np.ndarray:
    names = tuple(vars.names if isinstance(vars, VarSet) else vars)
    return lambdify(e, names)(np.asarray(points, dtype=float))


def evaluate_exact(e: Expr, env: Mapping[str, Fraction]) -> Fraction | None:
    """Exact value at a rational point, or None when it is not provably rational."""
    if isinstance(e, Const):
        return e.value if _is_exact(e.value) else None
    if isinstance(e, Var):
        v = env[e.name]
        return v if isinstance(v, Fraction) else None
    if isinstance(e, Add):
        total = Fraction(0)
        for t in e.terms:
            v = evaluate_exact(t, env)
            if v is None:
                return None
            total += v
        return total
    if isinstance(e, Mul):
        prod = Fraction(1)
        for f in e.factors:
            v = evaluate_exact(f, env)
            if v is None:
                return None
            prod *= v
        return prod
    if isinstance(e, Pow):
        v = evaluate_exact(e.base, env)
        return None if v is None else v ** e.exponent
    a = evaluate_exact(e.arg, env)
    if a != 0:
        return None
    return Fraction(0) if e.name == "sin" else Fraction(1)


# ---------------------------------------------------------------------------
# sampling-based identity testing


@dataclass(frozen=True)
class Sampler:
    n: int = 64
    low: float = -2.0
    high: float = 2.0
    seed: int = 0

    def points(self, dim: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.low, self.high, size=(self.n, dim))


def equal_on_samples(
    e1: Expr,
    e2: Expr,
    vars: VarSet | Sequence[str],
    sampler: Sampler | None = None,
    atol: float = 1e-10,
    rtol: float = 1e-9,
) -> bool:
    names = tuple(vars.names if isinstance(vars, VarSet) else vars)
    X = (sampler or Sampler()).points(len(names))
    a = lambdify(e1, names)(X)
    b = lambdify(e2, names)(X)
    return bool(np.all(np.abs(a - b) <= atol + rtol * np.abs(a)))


# ---------------------------------------------------------------------------
# compactly supported test functions


@dataclass(frozen=True)
class BoxBump:
    """``expr(x) * prod_i (1 - ((x_i - c_i)/h_i)^2)_+^k`` on a box.

    Inside the box the function is the Expr ``inside``; outside it is zero,
    and it is of class C^(k-1) across the box faces.
    """

    expr: Expr
    center: tuple[Fraction, ...]
    halfwidth: tuple[Fraction, ...]
    vars: VarSet
    k: int = 3

    def __post_init__(self):
        if len(self.center) != len(self.vars) or len(self.halfwidth) != len(self.vars):
            raise ExprError("bump center/halfwidth must match the variable count")
        if any(_num(h) <= 0 for h in self.halfwidth):
            raise ExprError("bump halfwidths must be positive")
        object.__setattr__(self, "center", tuple(_num(c) for c in self.center))
        object.__setattr__(self, "halfwidth", tuple(_num(h) for h in self.halfwidth))

    @property
    def lo(self) -> np.ndarray:
        return np.array([float(c - h) for c, h in zip(self.center, self.halfwidth)])

    @property
    def hi(self) -> np.ndarray:
        return np.array([float(c + h) for c, h in zip(self.center, self.halfwidth)])

    @property
    def inside(self) -> Expr:
        factors = [self.expr]
        for name, c, h in zip(self.vars, self.center, self.halfwidth):
            s = (Var(name) - Const(c)) / h
            factors.append(power(ONE - s * s, self.k))
        return mul(*factors)

    def indicator(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.all((X > self.lo) & (X < self.hi), axis=-1)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        vals = lambdify(self.inside, self.vars.names)(X)
        return np.where(self.indicator(X), vals, 0.0)

    def derivative_inside(self, *names: str) -> Expr:
        e = self.inside
        for n in names:
            e = differentiate(e, n)
        return e


__all__ = [
    "Add", "BoxBump", "Const", "Expr", "ExprError", "Func", "Mul", "NonAffineError",
    "ParseError", "Pow", "Sampler", "UnknownVariableError", "Var", "VarSet", "add",
    "affine_form", "as_expr", "cos", "differentiate", "equal_on_samples", "evaluate",
    "evaluate_exact", "evaluate_many", "exp", "expand", "free_vars", "func", "is_exact",
    "is_zero", "lambdify", "mul", "neg", "parse", "power", "sin", "substitute", "to_str",
]
