"""Second-order operators sum a_ij d_i d_j + sum b_j d_j with symbolic coefficients.

Covers the coordinate and quasi-divergence forms, the quadratic form Psi_A,
the chain rule for F(u), the non-degeneracy and left-invariance checks, the
formal adjoint and a sign classification of L u on samples.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import quadrature as quad
from . import symbolic as sym
from .fields import VectorField
from .group import GroupLaw, left_translate_jets
from .symbolic import BoxBump, Expr, Sampler, VarSet

PSD_TOL = 1e-10
FD_STEP = 5e-4  # balances O(h^4) truncation against longdouble rounding / h^2


class OperatorError(ValueError):
    pass


def _matrix_at(M, vars: VarSet, X: np.ndarray) -> np.ndarray:
    return np.stack([np.stack([sym.evaluate_many(e, X, vars) for e in row], axis=-1) for row in M], axis=-2)


@dataclass(frozen=True, eq=False)
class SecondOrderOperator:
    """L = sum_{i,j} a_ij d_i d_j + sum_j b_j d_j; A is kept symmetric."""

    A: tuple[tuple[Expr, ...], ...]
    b: tuple[Expr, ...]
    vars: VarSet
    label: str = ""

    @property
    def dim(self) -> int:
        return len(self.vars)

    def __call__(self, u: Expr) -> Expr:
        return apply(self, u)

    def A_at(self, X: np.ndarray) -> np.ndarray:
        return _matrix_at(self.A, self.vars, X)

    def b_at(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, float)
        return np.stack([sym.evaluate_many(e, X, self.vars) for e in self.b], axis=-1)

    def __str__(self) -> str:
        terms = []
        names = self.vars.names
        for i in range(self.dim):
            for j in range(i, self.dim):
                a = self.A[i][j]
                if sym.is_zero(a):
                    continue
                c = a if i == j else sym.mul(sym.Const(2), a)
                d = f"d{names[i]}^2" if i == j else f"d{names[i]}d{names[j]}"
                terms.append(_coef_term(c, d))
        for j, bj in enumerate(self.b):
            if not sym.is_zero(bj):
                terms.append(_coef_term(bj, f"d{names[j]}"))
        if not terms:
            return "0"
        out = terms[0]
        for t in terms[1:]:
            out += f" - {t[1:]}" if t.startswith("-") else f" + {t}"
        return out


def _coef_term(c: Expr, d: str) -> str:
    if not isinstance(c, sym.Add) and sym._is_negative_term(c):
        return "-" + _coef_term(sym.neg(c), d)
    s = sym.to_str(c)
    if s == "1":
        return d
    if s == "-1":
        return f"-{d}"
    if isinstance(c, (sym.Add,)):
        return f"({s})*{d}"
    return f"{s}*{d}"


def make_operator(
    A: Sequence[Sequence],
    b: Sequence,
    vars: VarSet,
    label: str = "",
    sampler: Sampler | None = None,
    check_psd: bool = True,
) -> SecondOrderOperator:
    """Build an operator from explicit data (Expr, number or string entries).

    A must be symmetric on samples and positive semidefinite at every sampled
    point (smallest eigenvalue >= -1e-10); otherwise OperatorError.
    """
    d = len(vars)

    def conv(e):
        return sym.parse(e, vars) if isinstance(e, str) else sym.as_expr(e)

    if len(A) != d or any(len(r) != d for r in A) or len(b) != d:
        raise OperatorError(f"operator data must be {d}x{d} and length {d}")
    M = [[conv(e) for e in row] for row in A]
    bb = tuple(conv(e) for e in b)
    for i in range(d):
        for j in range(i + 1, d):
            if M[i][j] != M[j][i] and not sym.equal_on_samples(M[i][j], M[j][i], vars):
                raise OperatorError(f"A is not symmetric at entry ({i + 1},{j + 1})")
    sym_A = tuple(tuple(M[min(i, j)][max(i, j)] for j in range(d)) for i in range(d))
    L = SecondOrderOperator(sym_A, bb, vars, label)
    if check_psd:
        P = (sampler or Sampler()).points(d)
        ev = np.linalg.eigvalsh(L.A_at(P))
        if np.min(ev) < -PSD_TOL:
            raise OperatorError(f"A is not positive semidefinite (eigenvalue {np.min(ev):.3g} at a sampled point)")
    return L


def _names(n: int, prefix: str = "x") -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(n))


def laplacian(n: int, names: Sequence[str] | None = None) -> SecondOrderOperator:
    vs = VarSet(tuple(names) if names else _names(n))
    A = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    return make_operator(A, [0] * n, vs, label=f"Laplacian on R^{n}")


def heat(n: int, names: Sequence[str] | None = None, time: str = "t") -> SecondOrderOperator:
    """Sum of d_xi^2 minus d_t on variables (x1, ..., xn, t)."""
    vs = VarSet((tuple(names) if names else _names(n)) + (time,), time=time)
    d = n + 1
    A = [[1 if i == j and i < n else 0 for j in range(d)] for i in range(d)]
    b = [0] * n + [-1]
    return make_operator(A, b, vs, label=f"heat operator on R^{n} x R")


def apply(L: SecondOrderOperator, u: Expr) -> Expr:
    extra = sym.free_vars(u) - set(L.vars.names)
    if extra:
        raise OperatorError(f"function uses variables {sorted(extra)} outside {L.vars.names}")
    names = L.vars.names
    terms = []
    grads = [sym.differentiate(u, v) for v in names]
    for i in range(L.dim):
        for j in range(i, L.dim):
            a = L.A[i][j]
            if sym.is_zero(a):
                continue
            c = a if i == j else sym.mul(sym.Const(2), a)
            terms.append(sym.mul(c, sym.differentiate(grads[i], names[j])))
    for j, bj in enumerate(L.b):
        if not sym.is_zero(bj):
            terms.append(sym.mul(bj, grads[j]))
    return sym.add(*terms)


def psi_A(L: SecondOrderOperator, u: Expr) -> Expr:
    """The quadratic form <A grad u, grad u>."""
    names = L.vars.names
    g = [sym.differentiate(u, v) for v in names]
    terms = []
    for i in range(L.dim):
        for j in range(i, L.dim):
            a = L.A[i][j]
            if sym.is_zero(a) or sym.is_zero(g[i]) or sym.is_zero(g[j]):
                continue
            c = a if i == j else sym.mul(sym.Const(2), a)
            terms.append(sym.mul(c, g[i], g[j]))
    return sym.add(*terms)


# ---------------------------------------------------------------------------
# quasi-divergence form


@dataclass(frozen=True)
class DecomposedOperator:
    """L = sum_i d_i (X_i) + X_0 with X_i = sum_j a_ij d_j."""

    fields: tuple[VectorField, ...]
    drift: VectorField

    @property
    def vars(self) -> VarSet:
        return self.drift.vars

    def nonzero_fields(self) -> list[VectorField]:
        return [f for f in self.fields if not f.is_zero()]

    def apply(self, u: Expr) -> Expr:
        names = self.vars.names
        parts = [sym.differentiate(f(u), names[i]) for i, f in enumerate(self.fields)]
        return sym.add(*parts, self.drift(u))


def decompose(L: SecondOrderOperator) -> DecomposedOperator:
    names = L.vars.names
    fields = tuple(VectorField(L.A[i], L.vars, f"X{i + 1}") for i in range(L.dim))
    drift = tuple(
        sym.add(L.b[j], sym.neg(sym.add(*(sym.differentiate(L.A[i][j], names[i]) for i in range(L.dim)))))
        for j in range(L.dim))
    return DecomposedOperator(fields, VectorField(drift, L.vars, "X0"))


def from_frame(
    fields: Sequence[VectorField],
    drift: VectorField | Sequence[VectorField] | None = None,
    signs: Sequence[int] | None = None,
    weights: Sequence | None = None,
    label: str = "",
) -> SecondOrderOperator:
    """Coordinate form of sum_j w_j X_j^2 + sum_k s_k Y_k.

    ``weights`` (default 1, must be >= 0) allow exact rational factors such
    as (1/2) X^2 in place of (X/sqrt 2)^2; ``signs`` are +-1 per drift field.
    """
    if not fields:
        raise OperatorError("from_frame needs at least one field")
    vars = fields[0].vars
    d = len(vars)
    names = vars.names
    drifts = [] if drift is None else ([drift] if isinstance(drift, VectorField) else list(drift))
    signs = list(signs) if signs is not None else [1] * len(drifts)
    if len(signs) != len(drifts) or any(s not in (1, -1) for s in signs):
        raise OperatorError("signs must be +1/-1, one per drift field")
    weights = [sym._num(w) if not isinstance(w, Expr) else w.value for w in weights] if weights else [Fraction(1)] * len(fields)
    if len(weights) != len(fields) or any(w < 0 for w in weights):
        raise OperatorError("weights must be nonnegative, one per field")
    A = [[sym.ZERO] * d for _ in range(d)]
    b = [sym.ZERO] * d
    for f, w in zip(fields, weights):
        if f.vars != vars:
            raise OperatorError("fields live on different variable sets")
        c = f.coeffs
        wc = sym.Const(w)
        for i in range(d):
            for k in range(d):
                if not (sym.is_zero(c[i]) or sym.is_zero(c[k])):
                    A[i][k] = sym.add(A[i][k], sym.mul(wc, c[i], c[k]))
        for k in range(d):
            # first-order part of X^2: sum_i c_i d_i(c_k) d_k
            extra = sym.add(*(sym.mul(c[i], sym.differentiate(c[k], names[i])) for i in range(d) if not sym.is_zero(c[i])))
            b[k] = sym.add(b[k], sym.mul(wc, extra))
    for Y, s in zip(drifts, signs):
        if Y.vars != vars:
            raise OperatorError("drift lives on a different variable set")
        for k in range(d):
            b[k] = sym.add(b[k], sym.mul(sym.Const(s), Y.coeffs[k]))
    return make_operator(A, b, vars, label=label)


# ---------------------------------------------------------------------------
# chain rule


def _fd_operator(L: SecondOrderOperator, f: Callable[[np.ndarray], np.ndarray], X: np.ndarray,
                 h: float = FD_STEP) -> np.ndarray:
    """L f at points X by central differences with one Richardson step.

    Function values are taken in extended precision (np.longdouble) so that
    rounding stays well below the O(h^4) truncation left after extrapolation.
    """
    X = np.asarray(X, dtype=np.longdouble)
    d = L.dim
    A = L.A_at(np.asarray(X, float))
    bv = L.b_at(np.asarray(X, float))
    need = [(i, j) for i in range(d) for j in range(i, d) if np.any(A[:, i, j] != 0)]
    need_b = [j for j in range(d) if np.any(bv[:, j] != 0)]

    def stencil(step):
        out = {}
        f0 = f(X)
        for j in set(need_b) | {i for i, k in need if i == k}:
            e = np.zeros(d, dtype=np.longdouble)
            e[j] = step
            fp, fm = f(X + e), f(X - e)
            out[("d", j)] = (fp - fm) / (2 * step)
            out[("dd", j)] = (fp - 2 * f0 + fm) / (step * step)
        for i, k in need:
            if i == k:
                continue
            ei = np.zeros(d, dtype=np.longdouble)
            ek = np.zeros(d, dtype=np.longdouble)
            ei[i] = step
            ek[k] = step
            out[("m", i, k)] = (f(X + ei + ek) - f(X + ei - ek) - f(X - ei + ek) + f(X - ei - ek)) / (4 * step * step)
        return out

    coarse = stencil(np.longdouble(h))
    fine = stencil(np.longdouble(h) / 2)
    D = {k: (4 * fine[k] - coarse[k]) / 3 for k in coarse}
    total = np.zeros(len(X), dtype=np.longdouble)
    for i, k in need:
        if i == k:
            total += A[:, i, i] * D[("dd", i)]
        else:
            total += 2 * A[:, i, k] * D[("m", i, k)]
    for j in need_b:
        total += bv[:, j] * D[("d", j)]
    return np.asarray(total, dtype=float)


def chain_rule_residual(
    L: SecondOrderOperator,
    u: Expr,
    F,
    sampler: Sampler | None = None,
    aux: str = "s",
) -> float:
    """max over samples of |L(F(u)) - F'(u) L u - F''(u) Psi_A(u)|.

    ``F`` is either an Expr in the auxiliary variable ``aux`` (composition by
    substitution, everything symbolic) or an object with numeric callables
    ``F``, ``dF``, ``ddF`` (left side by finite differences).
    """
    sampler = sampler or Sampler()
    P = sampler.points(L.dim)
    Lu = sym.evaluate_many(apply(L, u), P, L.vars)
    psi = sym.evaluate_many(psi_A(L, u), P, L.vars)
    uv = sym.evaluate_many(u, P, L.vars)
    if isinstance(F, Expr):
        dF = sym.differentiate(F, aux)
        ddF = sym.differentiate(dF, aux)
        rhs = sym.evaluate_many(dF, uv[:, None], (aux,)) * Lu + sym.evaluate_many(ddF, uv[:, None], (aux,)) * psi
        try:
            comp = sym.substitute(F, {aux: u})
            lhs = sym.evaluate_many(apply(L, comp), P, L.vars)
        except sym.NonAffineError:
            f1 = sym.lambdify(F, (aux,))
            fu = sym.lambdify(u, L.vars.names)
            lhs = _fd_operator(L, lambda X: f1(fu(X)[..., None]), P)
        return float(np.max(np.abs(lhs - rhs)))
    rhs = F.dF(uv) * Lu + F.ddF(uv) * psi
    fu = sym.lambdify(u, L.vars.names)
    lhs = _fd_operator(L, lambda X: F.F(fu(X)), P)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# hypotheses


@dataclass(frozen=True)
class NDReport:
    holds: bool
    n_points: int
    failing: tuple[int, ...]
    note: str = "under left invariance a single point with A != 0 suffices"


def nd_report(L: SecondOrderOperator, points: np.ndarray) -> NDReport:
    P = np.atleast_2d(np.asarray(points, float))
    if len(P) == 0:
        raise OperatorError("need at least one point")
    A = L.A_at(P)
    ok = np.max(np.abs(A.reshape(len(P), -1)), axis=1) > 1e-12
    return NDReport(bool(np.all(ok)), len(P), tuple(int(i) for i in np.nonzero(~ok)[0]))


def check_nd(L: SecondOrderOperator, points: np.ndarray) -> bool:
    """True iff A(x) has an entry with |value| > 1e-12 at every point."""
    return nd_report(L, points).holds


def function_bank(vars: VarSet) -> list[Expr]:
    """Fixed polynomial / exponential / trigonometric functions of moderate size on [-2, 2]^d."""
    v = [sym.Var(n) for n in vars]
    d = len(v)
    last = v[-1]
    bank = [v[0], sym.mul(v[0], last), sym.add(sym.power(last, 2), sym.mul(v[0], v[d // 2]))]
    if d > 1:
        bank.append(sym.add(sym.mul(v[1], sym.power(v[0], 2)), sym.neg(v[d - 1])))
    half = sym.Const(Fraction(1, 2))
    third = sym.Const(Fraction(1, 3))
    bank.append(sym.exp(sym.add(sym.mul(half, v[0]), sym.neg(sym.mul(third, last)))))
    bank.append(sym.sin(sym.add(v[0], sym.mul(third, last))))
    bank.append(sym.mul(sym.cos(sym.mul(half, v[d // 2])), sym.add(v[0], last)))
    return bank


def _rename_positional(u: Expr, src: VarSet, dst: VarSet) -> Expr:
    if src.names == dst.names:
        return u
    tmp = {a: sym.Var(f"{a}__tmp") for a in src}
    back = {f"{a}__tmp": sym.Var(b) for a, b in zip(src, dst)}
    return sym.substitute(sym.substitute(u, tmp), back)


def check_left_invariance(
    L: SecondOrderOperator,
    G: GroupLaw,
    sampler: Sampler | None = None,
    bank: Sequence[Expr] | None = None,
) -> float:
    """max over sampled (g, x) and bank functions u of |L(u o tau_g)(x) - (L u)(g.x)|.

    Coordinates of L and G are matched by position.  The left side uses the
    exact chain rule through the product map (no finite differences).
    """
    if L.dim != G.dim:
        raise OperatorError(f"operator dimension {L.dim} does not match group dimension {G.dim}")
    sampler = sampler or Sampler()
    bank = list(bank) if bank is not None else function_bank(L.vars)
    X = sampler.points(G.dim)
    gs = Sampler(sampler.n, sampler.low, sampler.high, sampler.seed + 11).points(G.dim)
    A = L.A_at(X)
    bv = L.b_at(X)
    worst = 0.0
    for u in bank:
        uG = _rename_positional(u, L.vars, G.vars)
        LuG = _rename_positional(apply(L, u), L.vars, G.vars)
        for k in range(len(X)):
            _, grad, hess = left_translate_jets(G, uG, gs[k], X[k:k + 1])
            lhs = float(np.sum(A[k] * hess[0]) + bv[k] @ grad[0])
            rhs = float(sym.evaluate_many(LuG, G.multiply(gs[k], X[k])[None, :], G.vars)[0])
            worst = max(worst, abs(lhs - rhs))
    return worst


# ---------------------------------------------------------------------------
# adjoint


@dataclass(frozen=True, eq=False)
class AdjointOperator:
    """L* phi = sum a_ij d_i d_j phi + sum bt_j d_j phi + c phi."""

    A: tuple[tuple[Expr, ...], ...]
    b: tuple[Expr, ...]
    c: Expr
    vars: VarSet

    def __call__(self, phi: Expr) -> Expr:
        base = SecondOrderOperator(self.A, self.b, self.vars)
        return sym.add(apply(base, phi), sym.mul(self.c, phi))


def formal_adjoint(L: SecondOrderOperator) -> AdjointOperator:
    """sum d_i d_j (a_ij phi) - sum d_j (b_j phi), in coordinate form."""
    names = L.vars.names
    d = L.dim
    da = [sym.add(*(sym.differentiate(L.A[i][j], names[i]) for i in range(d))) for j in range(d)]
    bt = tuple(sym.add(sym.mul(sym.Const(2), da[j]), sym.neg(L.b[j])) for j in range(d))
    c = sym.add(
        *(sym.differentiate(da[j], names[j]) for j in range(d)),
        *(sym.neg(sym.differentiate(L.b[j], names[j])) for j in range(d)),
    )
    return AdjointOperator(L.A, bt, c, L.vars)


def duality_residual(L: SecondOrderOperator, u: Expr, phi: BoxBump, order: int = 24) -> float:
    """|int (L u) phi - int u (L* phi)| over the support box of ``phi``."""
    Ls = formal_adjoint(L)
    lhs_e = sym.mul(apply(L, u), phi.inside)
    rhs_e = sym.mul(u, Ls(phi.inside))
    f = sym.lambdify(sym.add(lhs_e, sym.neg(rhs_e)), L.vars.names)
    return abs(quad.box_integrate(f, phi.lo, phi.hi, order=order))


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Classification:
    kind: str
    n_points: int
    min_value: float
    max_value: float
    exact_zero: bool

    def __str__(self) -> str:
        return f"{self.kind} (on {self.n_points} sampled points)"


def classify(L: SecondOrderOperator, u: Expr, sampler: Sampler | None = None, tol: float = 1e-10) -> Classification:
    """Sign of L u on samples: harmonic, subharmonic, superharmonic or none.

    This can falsify but never prove a global sign condition.
    """
    sampler = sampler or Sampler()
    Lu = apply(L, u)
    vals = sym.evaluate_many(Lu, sampler.points(L.dim), L.vars)
    exact_zero = sym.is_zero(Lu)
    if exact_zero or sym.equal_on_samples(Lu, sym.ZERO, L.vars, sampler):
        kind = "harmonic"
    elif np.all(vals >= -tol):
        kind = "subharmonic"
    elif np.all(vals <= tol):
        kind = "superharmonic"
    else:
        kind = "none"
    return Classification(kind, sampler.n, float(np.min(vals)), float(np.max(vals)), exact_zero)


def constancy_conditions(L: SecondOrderOperator, u: Expr, sampler: Sampler | None = None) -> dict[str, bool]:
    """The four equivalent conditions for constancy, each tested on samples.

    (1) u constant; (2) X_0 u, ..., X_n u vanish; (3) Psi_A(u) = 0 and X_0 u = 0;
    (4) L u = 0 and Psi_A(u) = 0.
    """
    sampler = sampler or Sampler()
    D = decompose(L)

    def zero(e):
        return sym.equal_on_samples(e, sym.ZERO, L.vars, sampler)

    psi0 = zero(psi_A(L, u))
    x0 = zero(D.drift(u))
    return {
        "constant": all(zero(sym.differentiate(u, v)) for v in L.vars),
        "fields_vanish": x0 and all(zero(f(u)) for f in D.fields),
        "psi_and_drift_vanish": psi0 and x0,
        "harmonic_and_psi_vanish": zero(apply(L, u)) and psi0,
    }
