"""Lie group laws on R^n, translation Jacobians and right-invariant densities.

A :class:`GroupLaw` stores the product as ``dim`` expressions in ``2*dim``
variables: the left factor uses the base names (``t``, ``x1``, ...) and the
right factor the same names with an ``_r`` suffix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linalg
from . import quadrature as quad
from . import symbolic as sym
from .symbolic import Expr, Sampler, VarSet

FAMILIES = ("abelian", "matrix_exponential", "inverse_matrix_exponential", "product_with_time", "custom")


class GroupError(ValueError):
    pass


class DensityError(GroupError):
    pass


def right_name(name: str) -> str:
    return f"{name}_r"


@dataclass(frozen=True, eq=False)
class GroupLaw:
    dim: int
    vars: VarSet
    product: tuple[Expr, ...]
    identity: tuple[Fraction, ...]
    inverse: tuple[Expr, ...] | None
    family: str
    B: tuple[tuple[Fraction, ...], ...] | None = None
    inner: "GroupLaw | None" = None
    exact: bool = True
    label: str = ""
    density_note: str = field(default="", compare=False)

    @property
    def right_vars(self) -> VarSet:
        return VarSet(tuple(right_name(n) for n in self.vars.names))

    @property
    def all_names(self) -> tuple[str, ...]:
        return self.vars.names + self.right_vars.names

    @property
    def flags(self) -> list[str]:
        return [] if self.exact else ["numeric-coefficients"]

    @cached_property
    def _product_fns(self):
        return [sym.lambdify(p, self.all_names) for p in self.product]

    def multiply(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Numeric product of (broadcastable) arrays of points, shape (..., dim)."""
        X, Y = np.broadcast_arrays(np.asarray(X, float), np.asarray(Y, float))
        Z = np.concatenate([X, Y], axis=-1)
        return np.stack([f(Z) for f in self._product_fns], axis=-1)

    @cached_property
    def _inverse_fns(self):
        if self.inverse is None:
            return None
        return [sym.lambdify(p, self.vars.names) for p in self.inverse]

    def invert(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, float)
        if self._inverse_fns is not None:
            return np.stack([f(X) for f in self._inverse_fns], axis=-1)
        return numeric_inverse(self, X)

    @cached_property
    def jac_left_block(self) -> list[list[Expr]]:
        """d product_k / d (left factor)_j."""
        return [[sym.differentiate(p, n) for n in self.vars.names] for p in self.product]

    @cached_property
    def jac_right_block(self) -> list[list[Expr]]:
        """d product_k / d (right factor)_j."""
        return [[sym.differentiate(p, n) for n in self.right_vars.names] for p in self.product]

    @cached_property
    def hess_right_block(self) -> list[list[list[Expr]]]:
        rn = self.right_vars.names
        return [[[sym.differentiate(d, b) for b in rn] for d in row] for row in self.jac_right_block]

    def _eval_matrix(self, M, X, Y) -> np.ndarray:
        X, Y = np.broadcast_arrays(np.asarray(X, float), np.asarray(Y, float))
        Z = np.concatenate([X, Y], axis=-1)
        return np.stack([np.stack([sym.lambdify(e, self.all_names)(Z) for e in row], axis=-1) for row in M], axis=-2)

    def _at_identity(self, e: Expr, block: str) -> Expr:
        """Substitute the identity into one factor; rename the other to base names."""
        base, right = self.vars.names, self.right_vars.names
        e_id = [sym.Const(c) for c in self.identity]
        if block == "left":
            mapping = dict(zip(base, e_id))
            mapping.update({r: sym.Var(b) for b, r in zip(base, right)})
        else:
            mapping = dict(zip(right, e_id))
        return sym.substitute(e, mapping)

    @cached_property
    def right_jacobian_at_identity(self) -> list[list[Expr]]:
        """Jacobian of y -> y.x at y = e, as expressions in x."""
        return [[self._at_identity(e, "left") for e in row] for row in self.jac_left_block]

    @cached_property
    def left_jacobian_at_identity(self) -> list[list[Expr]]:
        """Jacobian of y -> x.y at y = e, as expressions in x."""
        return [[self._at_identity(e, "right") for e in row] for row in self.jac_right_block]


@dataclass(frozen=True)
class DensityFn:
    w: Expr
    vars: VarSet
    note: str = ""

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return sym.evaluate_many(self.w, X, self.vars)

    def __str__(self) -> str:
        return sym.to_str(self.w)


@dataclass(frozen=True)
class GroupCheck:
    identity_residual: float
    associativity_residual: float
    inverse_residual: float
    inverse_method: str

    @property
    def ok(self) -> bool:
        return self.identity_residual <= 1e-10 and self.associativity_residual <= 1e-8 \
            and self.inverse_residual <= 1e-8


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(a)))) if a.size else 0.0


def check_group(G: GroupLaw, sampler: Sampler | None = None) -> GroupCheck:
    """Identity, associativity and inverse residuals on fixed-seed samples.

    Residuals are ``max |a - b| / (1 + |a|)`` over samples and coordinates.
    """
    sampler = sampler or Sampler()
    X = sampler.points(G.dim)
    Y = Sampler(sampler.n, sampler.low, sampler.high, sampler.seed + 1).points(G.dim)
    Z = Sampler(sampler.n, sampler.low, sampler.high, sampler.seed + 2).points(G.dim)
    e = np.array([float(c) for c in G.identity])
    ident = max(_rel(X, G.multiply(e, X)), _rel(X, G.multiply(X, e)))
    assoc = _rel(G.multiply(G.multiply(X, Y), Z), G.multiply(X, G.multiply(Y, Z)))
    inv = G.invert(X)
    inv_res = max(_rel(np.broadcast_to(e, X.shape), G.multiply(X, inv)),
                  _rel(np.broadcast_to(e, X.shape), G.multiply(inv, X)))
    return GroupCheck(ident, assoc, inv_res, "closed form" if G.inverse is not None else "newton")


def numeric_inverse(G: GroupLaw, X: np.ndarray, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Solve x.z = e for z by Newton's method on the product map."""
    X = np.atleast_2d(np.asarray(X, float))
    e = np.array([float(c) for c in G.identity])
    Zs = []
    for x in X:
        z = 2 * e - x
        for _ in range(max_iter):
            r = G.multiply(x, z) - e
            if np.max(np.abs(r)) <= tol:
                break
            J = G._eval_matrix(G.jac_right_block, x, z)
            z = z - np.linalg.solve(J, r)
        Zs.append(z)
    return np.array(Zs).reshape(np.shape(X))


def _names_default(n: int, prefix: str = "x") -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(n))


def _matrix_tuple(B) -> tuple[tuple[Fraction, ...], ...]:
    M = linalg.to_fractions(B)
    if not M or not linalg.is_square(M):
        raise GroupError("B must be a non-empty square matrix")
    return tuple(tuple(r) for r in M)


def make_group(
    family: str,
    *,
    n: int | None = None,
    B=None,
    inner: GroupLaw | None = None,
    product: Sequence[Expr | str] | None = None,
    identity: Sequence | None = None,
    inverse: Sequence[Expr | str] | None = None,
    names: Sequence[str] | None = None,
    time: str = "t",
    label: str = "",
    validate: bool = True,
) -> GroupLaw:
    """Build a group law from a family tag.

    ``matrix_exponential``: (t, x).(t', x') = (t + t', x + exp(tB) x').
    ``inverse_matrix_exponential``: (t, x).(t', x') = (t + t', x' + exp(t'B) x).
    ``product_with_time``: direct product of ``inner`` with (R, +), time last.
    """
    if family not in FAMILIES:
        raise GroupError(f"unknown family {family!r}")
    if family in ("matrix_exponential", "inverse_matrix_exponential") and B is None:
        raise GroupError(f"family {family} requires B")
    if family not in ("matrix_exponential", "inverse_matrix_exponential") and B is not None:
        raise GroupError(f"family {family} does not take B")
    if family == "product_with_time" and inner is None:
        raise GroupError("product_with_time requires an inner group")
    if family != "product_with_time" and inner is not None:
        raise GroupError(f"family {family} does not take an inner group")

    if family == "abelian":
        if n is None or n < 1:
            raise GroupError("abelian family requires n >= 1")
        vs = VarSet(tuple(names) if names else _names_default(n))
        prod = tuple(sym.Var(v) + sym.Var(right_name(v)) for v in vs)
        G = GroupLaw(n, vs, prod, (Fraction(0),) * n, tuple(-sym.Var(v) for v in vs), family,
                     label=label or f"R^{n}")
    elif family in ("matrix_exponential", "inverse_matrix_exponential"):
        Bt = _matrix_tuple(B)
        m = len(Bt)
        xs = tuple(names) if names else _names_default(m)
        if len(xs) != m:
            raise GroupError("names must match the order of B")
        vs = VarSet((time,) + xs, time=time)
        E, exact = linalg.expm_symbolic(Bt, time)
        t, tr = sym.Var(time), sym.Var(right_name(time))
        if family == "matrix_exponential":
            prod = [t + tr] + [
                sym.add(sym.Var(xs[i]), *(sym.mul(E[i][j], sym.Var(right_name(xs[j]))) for j in range(m)))
                for i in range(m)]
        else:
            Er = [[sym.substitute(e, {time: tr}) for e in row] for row in E]
            prod = [t + tr] + [
                sym.add(sym.Var(right_name(xs[i])), *(sym.mul(Er[i][j], sym.Var(xs[j])) for j in range(m)))
                for i in range(m)]
        Eneg = [[sym.substitute(e, {time: -t}) for e in row] for row in E]
        inv = [-t] + [sym.neg(sym.add(*(sym.mul(Eneg[i][j], sym.Var(xs[j])) for j in range(m)))) for i in range(m)]
        G = GroupLaw(m + 1, vs, tuple(prod), (Fraction(0),) * (m + 1), tuple(inv), family, B=Bt,
                     exact=exact, label=label or ("G(B)" if family == "matrix_exponential" else "Ghat(B)"))
    elif family == "product_with_time":
        tname = time
        while tname in inner.vars.names:
            tname = tname + "t"
        vs = VarSet(inner.vars.names + (tname,), time=tname)
        prod = tuple(inner.product) + (sym.Var(tname) + sym.Var(right_name(tname)),)
        inv = None if inner.inverse is None else tuple(inner.inverse) + (-sym.Var(tname),)
        G = GroupLaw(inner.dim + 1, vs, prod, tuple(inner.identity) + (Fraction(0),), inv, family,
                     inner=inner, exact=inner.exact, label=label or f"{inner.label} x R")
    else:
        if product is None or identity is None:
            raise GroupError("custom family requires product and identity")
        d = len(product)
        vs = VarSet(tuple(names) if names else _names_default(d), time=time if names and time in names else None)
        allv = vs.names + tuple(right_name(v) for v in vs)
        prod = tuple(p if isinstance(p, Expr) else sym.parse(p, allv) for p in product)
        inv = None
        if inverse is not None:
            inv = tuple(p if isinstance(p, Expr) else sym.parse(p, vs) for p in inverse)
            if len(inv) != d:
                raise GroupError("inverse length must match dim")
        ident = tuple(sym._num(c) if not isinstance(c, float) else Fraction(c) for c in identity)
        if len(ident) != d:
            raise GroupError("identity length must match dim")
        exact = all(sym.is_exact(p) for p in prod)
        G = GroupLaw(d, vs, prod, ident, inv, family, exact=exact, label=label or "custom")

    if validate:
        chk = check_group(G)
        if not chk.ok:
            raise GroupError(f"group axioms fail on samples: {chk}")
    return G


def translation_jacobian(G: GroupLaw, side: str, g: Sequence[float], at: Sequence[float]) -> np.ndarray:
    """Jacobian of y -> y.g (``right``) or y -> g.y (``left``) evaluated at y = ``at``."""
    g = np.asarray(g, float)
    at = np.asarray(at, float)
    if side == "right":
        return G._eval_matrix(G.jac_left_block, at, g)
    if side == "left":
        return G._eval_matrix(G.jac_right_block, g, at)
    raise ValueError("side must be 'left' or 'right'")


def _reciprocal_structural(D: Expr) -> Expr | None:
    """1/D when D is c * exp(affine) (or a nonzero constant)."""
    if isinstance(D, sym.Const):
        return None if D.value == 0 else sym.Const(1 / D.value)
    if isinstance(D, sym.Func) and D.name == "exp":
        return sym.exp(sym.neg(D.arg))
    if isinstance(D, sym.Mul) and len(D.factors) == 2 and isinstance(D.factors[0], sym.Const):
        c, f = D.factors
        if isinstance(f, sym.Func) and f.name == "exp" and c.value != 0:
            return sym.mul(sym.Const(1 / c.value), sym.exp(sym.neg(f.arg)))
    return None


def _reciprocal_fitted(D: Expr, vars: VarSet, sampler: Sampler) -> Expr | None:
    """Fit log D by an affine form, rationalize, and verify 1/D = exp(-fit)."""
    X = sampler.points(len(vars))
    vals = sym.evaluate_many(D, X, vars)
    if np.any(vals <= 0):
        return None
    A = np.hstack([np.ones((len(X), 1)), X])
    coef, *_ = np.linalg.lstsq(A, np.log(vals), rcond=None)
    c0 = Fraction(float(coef[0])).limit_denominator(10_000)
    lin = [Fraction(float(c)).limit_denominator(10_000) for c in coef[1:]]
    cand = sym.exp(sym.neg(sym.add(sym.Const(c0), *(sym.mul(sym.Const(c), sym.Var(v)) for c, v in zip(lin, vars)))))
    if sym.equal_on_samples(sym.mul(cand, D), sym.ONE, vars, sampler, atol=1e-10, rtol=1e-9):
        return cand
    return None


def _positive_reciprocal(D: Expr, vars: VarSet, sampler: Sampler, what: str) -> tuple[Expr, str]:
    vals = sym.evaluate_many(D, sampler.points(len(vars)), vars)
    if np.any(np.abs(vals) < 1e-300):
        raise DensityError(f"{what} vanishes at a sampled point; invalid group law")
    D = sym.expand(D)
    w = _reciprocal_structural(D)
    if w is not None:
        sign = np.sign(vals)
        if np.any(sign < 0):
            w = sym.neg(w)
        return w, "exact reciprocal of the symbolic determinant"
    w = _reciprocal_fitted(D if np.all(vals > 0) else sym.neg(D), vars, sampler)
    if w is None:
        raise DensityError(f"1/({what}) is not representable in the expression ring")
    return w, "closed form recovered from log-affine fit of the symbolic determinant, verified on samples"


def right_invariant_density(G: GroupLaw, sampler: Sampler | None = None) -> DensityFn:
    """w(x) = 1 / det J_{rho_x}(e) with rho_x(y) = y.x."""
    sampler = sampler or Sampler()
    D = linalg.det_expr(G.right_jacobian_at_identity)
    w, note = _positive_reciprocal(D, G.vars, sampler, "det of right-translation Jacobian")
    if np.any(sym.evaluate_many(w, sampler.points(G.dim), G.vars) <= 0):
        raise DensityError("right-invariant density is not positive on samples")
    return DensityFn(w, G.vars, note)


def left_invariant_density(G: GroupLaw, sampler: Sampler | None = None) -> DensityFn:
    """1 / det J_{tau_x}(e) with tau_x(y) = x.y (a left Haar density)."""
    sampler = sampler or Sampler()
    D = linalg.det_expr(G.left_jacobian_at_identity)
    w, note = _positive_reciprocal(D, G.vars, sampler, "det of left-translation Jacobian")
    return DensityFn(w, G.vars, note)


def _det_at(M: list[list[Expr]], vars: VarSet, X: np.ndarray) -> np.ndarray:
    vals = np.stack([np.stack([sym.evaluate_many(e, X, vars) for e in row], axis=-1) for row in M], axis=-2)
    return np.linalg.det(vals)


def is_unimodular(G: GroupLaw, sampler: Sampler | None = None, rtol: float = 1e-8) -> bool:
    """Left and right Haar densities agree up to one global constant on samples."""
    sampler = sampler or Sampler()
    X = sampler.points(G.dim)
    left = 1.0 / _det_at(G.left_jacobian_at_identity, G.vars, X)
    right = 1.0 / _det_at(G.right_jacobian_at_identity, G.vars, X)
    ratio = right / left
    return bool(np.all(np.abs(ratio - ratio[0]) <= rtol * np.abs(ratio[0])))


def right_invariance_residual(G: GroupLaw, w: DensityFn | None = None, sampler: Sampler | None = None) -> float:
    """max |w(y.x) |det J_{rho_x}(y)| - w(y)| / w(y) over sampled pairs."""
    sampler = sampler or Sampler()
    w = w or right_invariant_density(G)
    Y = sampler.points(G.dim)
    X = Sampler(sampler.n, sampler.low, sampler.high, sampler.seed + 7).points(G.dim)
    J = G._eval_matrix(G.jac_left_block, Y, X)
    lhs = w(G.multiply(Y, X)) * np.abs(np.linalg.det(J))
    rhs = w(Y)
    return float(np.max(np.abs(lhs - rhs) / rhs))


def haar_mass_partial(G: GroupLaw, R: float, order: int = 32, w: DensityFn | None = None) -> float:
    """Integral of the right-invariant density over [-R, R]^dim (tensor Gauss-Legendre)."""
    if R <= 0:
        raise ValueError("R must be positive")
    w = w or right_invariant_density(G)
    return quad.box_integrate(w, [-R] * G.dim, [R] * G.dim, order=order)


def left_translate_jets(G: GroupLaw, u: Expr, g: Sequence[float], X: np.ndarray, order: int = 2):
    """Value, gradient and Hessian of x -> u(g.x) at points X, by the exact chain rule.

    Uses symbolic derivatives of u and of the product map in its right factor,
    so no finite differences are involved.
    """
    X = np.atleast_2d(np.asarray(X, float))
    gg = np.broadcast_to(np.asarray(g, float), X.shape)
    Y = G.multiply(gg, X)
    names = G.vars.names
    du = np.stack([sym.evaluate_many(sym.differentiate(u, v), Y, names) for v in names], axis=-1)
    J = G._eval_matrix(G.jac_right_block, gg, X)
    val = sym.evaluate_many(u, Y, names)
    grad = np.einsum("nk,nkj->nj", du, J)
    if order < 2:
        return val, grad, None
    d = G.dim
    ddu = np.empty(X.shape[:1] + (d, d))
    for a in range(d):
        for b in range(a, d):
            col = sym.evaluate_many(sym.differentiate(sym.differentiate(u, names[a]), names[b]), Y, names)
            ddu[:, a, b] = ddu[:, b, a] = col
    Hs = np.stack([G._eval_matrix(G.hess_right_block[k], gg, X) for k in range(d)], axis=1)
    hess = np.einsum("nkl,nki,nlj->nij", ddu, J, J) + np.einsum("nk,nkij->nij", du, Hs)
    return val, grad, hess
