"""Vector fields with symbolic coefficients, Lie brackets and Hörmander rank certificates."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import linalg
from . import symbolic as sym
from .group import GroupLaw, left_translate_jets
from .symbolic import Expr, Sampler, VarSet


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class VectorField:
    """The first-order operator sum_i coeffs[i] * d/d(vars[i])."""

    coeffs: tuple[Expr, ...]
    vars: VarSet
    label: str = ""

    def __post_init__(self):
        coeffs = tuple(sym.as_expr(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if len(coeffs) != len(self.vars):
            raise FieldError(f"field {self.label!r} has {len(coeffs)} coefficients for {len(self.vars)} variables")

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    @classmethod
    def coordinate(cls, vars: VarSet, name: str, scale=1) -> "VectorField":
        coeffs = tuple(sym.as_expr(scale) if v == name else sym.ZERO for v in vars)
        return cls(coeffs, vars, f"d{name}" if scale == 1 else f"{scale}*d{name}")

    @classmethod
    def parse(cls, coeffs: Sequence[str], vars: VarSet, label: str = "") -> "VectorField":
        return cls(tuple(sym.parse(c, vars) for c in coeffs), vars, label)

    def __call__(self, u: Expr) -> Expr:
        return apply_field(self, u)

    def scaled(self, c) -> "VectorField":
        return VectorField(tuple(sym.mul(sym.as_expr(c), a) for a in self.coeffs), self.vars, f"{c}*{self.label}")

    def plus(self, other: "VectorField") -> "VectorField":
        _same(self, other)
        return VectorField(tuple(sym.add(a, b) for a, b in zip(self.coeffs, other.coeffs)),
                           self.vars, f"{self.label}+{other.label}")

    def is_zero(self) -> bool:
        return all(sym.is_zero(c) for c in self.coeffs)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, float)
        return np.stack([sym.evaluate_many(c, X, self.vars) for c in self.coeffs], axis=-1)

    def __str__(self) -> str:
        parts = []
        for c, v in zip(self.coeffs, self.vars):
            if sym.is_zero(c):
                continue
            s = sym.to_str(c)
            parts.append(f"d{v}" if s == "1" else f"({s})*d{v}")
        return " + ".join(parts) or "0"


def _same(X: VectorField, Y: VectorField) -> None:
    if X.vars != Y.vars:
        raise FieldError("vector fields live on different variable sets")


def apply_field(X: VectorField, u: Expr) -> Expr:
    extra = sym.free_vars(u) - set(X.vars.names)
    if extra:
        raise FieldError(f"function uses variables {sorted(extra)} outside {X.vars.names}")
    return sym.add(*(sym.mul(c, sym.differentiate(u, v)) for c, v in zip(X.coeffs, X.vars) if not sym.is_zero(c)))


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """[X, Y] = XY - YX; its k-th coefficient is X(Y_k) - Y(X_k)."""
    _same(X, Y)
    coeffs = tuple(sym.add(apply_field(X, yk), sym.neg(apply_field(Y, xk))) for xk, yk in zip(X.coeffs, Y.coeffs))
    return VectorField(coeffs, X.vars, f"[{X.label},{Y.label}]")


def commutator_residual(X: VectorField, Y: VectorField, u: Expr, sampler: Sampler | None = None) -> float:
    """max |[X,Y]u - (X(Yu) - Y(Xu))| on samples."""
    lhs = apply_field(lie_bracket(X, Y), u)
    rhs = sym.add(apply_field(X, apply_field(Y, u)), sym.neg(apply_field(Y, apply_field(X, u))))
    P = (sampler or Sampler()).points(X.dim)
    return float(np.max(np.abs(sym.evaluate_many(lhs, P, X.vars) - sym.evaluate_many(rhs, P, X.vars))))


def field_residual(X: VectorField, Y: VectorField, sampler: Sampler | None = None) -> float:
    """max over samples and components of |X - Y|."""
    P = (sampler or Sampler()).points(X.dim)
    return float(np.max(np.abs(X.evaluate(P) - Y.evaluate(P))))


def jacobi_residual(X: VectorField, Y: VectorField, Z: VectorField, sampler: Sampler | None = None) -> float:
    s = lie_bracket(X, lie_bracket(Y, Z)).plus(lie_bracket(Y, lie_bracket(Z, X))).plus(lie_bracket(Z, lie_bracket(X, Y)))
    P = (sampler or Sampler()).points(X.dim)
    return float(np.max(np.abs(s.evaluate(P))))


def left_invariant_frame(G: GroupLaw) -> list[VectorField]:
    """Columns of the Jacobian of y -> x.y at y = e, as fields in x."""
    J = G.left_jacobian_at_identity
    out = []
    for j, name in enumerate(G.vars.names):
        coeffs = tuple(J[i][j] for i in range(G.dim))
        f = VectorField(coeffs, G.vars, "")
        label = _frame_label(f, name, G)
        out.append(VectorField(coeffs, G.vars, label))
    return out


def _frame_label(f: VectorField, name: str, G: GroupLaw) -> str:
    nz = [i for i, c in enumerate(f.coeffs) if not sym.is_zero(c)]
    if len(nz) == 1 and f.coeffs[nz[0]] == sym.ONE:
        return f"d{G.vars.names[nz[0]]}"
    if name == G.vars.time:
        return "T"
    return f"X{name[1:] if name.startswith('x') else name}"


def left_invariance_residual(X: VectorField, G: GroupLaw, u: Expr, sampler: Sampler | None = None) -> float:
    """max over sampled (g, x) of |X(u o tau_g)(x) - (Xu)(g.x)|, tau_g(x) = g.x."""
    sampler = sampler or Sampler()
    P = sampler.points(G.dim)
    g_pts = Sampler(sampler.n, sampler.low, sampler.high, sampler.seed + 11).points(G.dim)
    worst = 0.0
    Xu = apply_field(X, u)
    C = X.evaluate(P)
    for g, x, c in zip(g_pts, P, C):
        _, grad, _ = left_translate_jets(G, u, g, x[None, :], order=1)
        lhs = float(grad[0] @ c)
        rhs = float(sym.evaluate_many(Xu, G.multiply(g, x)[None, :], G.vars)[0])
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(rhs)))
    return worst


@dataclass(frozen=True)
class BracketCertificate:
    achieved_rank: int
    depth: int
    witnesses: tuple[str, ...]
    dim: int
    exact: bool
    point: tuple = ()
    ranks_by_depth: tuple[int, ...] = field(default=())

    @property
    def full(self) -> bool:
        return self.achieved_rank == self.dim

    def summary(self, max_depth: int) -> str:
        state = "verified" if self.full else "failed"
        return f"Hörmander condition: {state} up to depth {self.depth if self.full else max_depth}"


def _fingerprint(f: VectorField, P: np.ndarray) -> tuple:
    vals = f.evaluate(P)
    return tuple(np.round(vals.ravel(), 9).tolist())


def _exact_column(f: VectorField, env: dict) -> list[Fraction] | None:
    col = []
    for c in f.coeffs:
        v = sym.evaluate_exact(c, env)
        if v is None:
            return None
        col.append(v)
    return col


def _rank(cols: list[VectorField], point: Sequence, vars: VarSet) -> tuple[int, bool]:
    if not cols:
        return 0, True
    exact_pt = all(isinstance(p, (int, Fraction)) for p in point)
    if exact_pt:
        env = {n: Fraction(p) for n, p in zip(vars, point)}
        rows = [_exact_column(f, env) for f in cols]
        if all(r is not None for r in rows):
            return linalg.bareiss_rank(rows), True
    M = np.array([f.evaluate(np.asarray(point, float)[None, :])[0] for f in cols])
    return linalg.numeric_rank(M, tol=1e-9), False


def hormander_rank(fields: Sequence[VectorField], point: Sequence, max_depth: int | None = None) -> BracketCertificate:
    """Breadth-first iterated brackets of ``fields`` evaluated at ``point``.

    Depth 0 is the fields themselves; depth k adds [F, W] for generators F and
    words W of depth k-1.  Stops at the first depth with full rank.
    """
    if not fields:
        raise FieldError("need at least one field")
    vars = fields[0].vars
    for f in fields:
        _same(fields[0], f)
    dim = len(vars)
    if max_depth is None:
        max_depth = dim + 2
    if max_depth < 0:
        raise FieldError("max_depth must be >= 0")
    point = tuple(sym._num(p) if not isinstance(p, float) else p for p in point)
    if len(point) != dim:
        raise FieldError("point dimension mismatch")
    fp_pts = Sampler(n=8, seed=12345).points(dim)
    seen: dict[tuple, VectorField] = {}

    def admit(f: VectorField) -> bool:
        if f.is_zero():
            return False
        key = _fingerprint(f, fp_pts)
        other = seen.get(key)
        if other is not None and sym.equal_on_samples(
                sym.add(*f.coeffs, *[sym.mul(sym.Const(k + 2), c) for k, c in enumerate(f.coeffs)]),
                sym.add(*other.coeffs, *[sym.mul(sym.Const(k + 2), c) for k, c in enumerate(other.coeffs)]),
                vars):
            return False
        seen[key] = f
        return True

    gens = [f for f in fields]
    level = [f for f in gens if admit(f)]
    basis: list[VectorField] = []
    exact_all = True
    ranks = []

    def extend(cands):
        nonlocal exact_all
        for f in sorted(cands, key=lambda v: (len(v.label), v.label)):
            r_old, _ = _rank(basis, point, vars) if basis else (0, True)
            r_new, ex = _rank(basis + [f], point, vars)
            exact_all = exact_all and ex
            if r_new > r_old:
                basis.append(f)
            if len(basis) == dim:
                return

    extend(level)
    ranks.append(len(basis))
    depth = 0
    while len(basis) < dim and depth < max_depth:
        depth += 1
        new = []
        for W in level:
            for F in gens:
                b = lie_bracket(F, W)
                if admit(b):
                    new.append(b)
        extend(new)
        ranks.append(len(basis))
        level = new
        if not level:
            break
    achieved_depth = next(i for i, r in enumerate(ranks) if r == len(basis))
    return BracketCertificate(len(basis), achieved_depth, tuple(f.label for f in basis), dim, exact_all,
                              tuple(str(p) for p in point), tuple(ranks))
