"""Kolmogorov-type operators div(A grad) + <Bx, grad> - d_t with constant A, B.

Variables are ordered (x1, ..., xn, t).  E(s) = exp(-sB) and the covariance
C(t) = int_0^t E(s) A E(s)^T ds decide hypoellipticity: C(t) positive
definite for t > 0, cross-checked against the Kalman rank of [S, BS, ...]
with A = S S^T.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import linalg
from . import quadrature as quad
from . import symbolic as sym
from .group import DensityFn, GroupLaw, make_group
from .operator import SecondOrderOperator, formal_adjoint, make_operator
from .symbolic import BoxBump, Expr, Sampler, VarSet

DEFAULT_T_SAMPLES = (1e-3, 1e-2, 1e-1, 1.0, 10.0)


class KolmogorovError(ValueError):
    pass


@dataclass(frozen=True)
class KolmogorovSpec:
    A: tuple[tuple[Fraction, ...], ...]
    B: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        A = tuple(tuple(r) for r in linalg.to_fractions(self.A))
        B = tuple(tuple(r) for r in linalg.to_fractions(self.B))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        n = len(A)
        if n == 0 or not linalg.is_square(A) or not linalg.is_square(B) or len(B) != n:
            raise KolmogorovError("A and B must be square matrices of the same order")
        if any(A[i][j] != A[j][i] for i in range(n) for j in range(n)):
            raise KolmogorovError("A must be symmetric")
        if np.min(np.linalg.eigvalsh(self.A_float)) < -1e-12:
            raise KolmogorovError("A must be positive semidefinite")

    @property
    def n(self) -> int:
        return len(self.A)

    @property
    def A_float(self) -> np.ndarray:
        return np.array(self.A, dtype=float)

    @property
    def B_float(self) -> np.ndarray:
        return np.array(self.B, dtype=float)

    @property
    def trace_B(self) -> Fraction:
        return linalg.trace(self.B)

    @property
    def vars(self) -> VarSet:
        return VarSet(tuple(f"x{i + 1}" for i in range(self.n)) + ("t",), time="t")

    def E(self, s: float) -> np.ndarray:
        """exp(-sB) by scaling and squaring (Pade 13)."""
        return scipy.linalg.expm(-s * self.B_float)


def operator_of(spec: KolmogorovSpec) -> SecondOrderOperator:
    n = spec.n
    x = [sym.Var(f"x{i + 1}") for i in range(n)]
    A = [[spec.A[i][j] if i < n and j < n else 0 for j in range(n + 1)] for i in range(n + 1)]
    b = [sym.add(*(sym.mul(sym.Const(spec.B[i][j]), x[j]) for j in range(n))) for i in range(n)] + [sym.Const(-1)]
    return make_operator(A, b, spec.vars, label="Kolmogorov-type operator")


# ---------------------------------------------------------------------------
# covariance


@lru_cache(maxsize=4096)
def _covariance_cached(spec: KolmogorovSpec, t: float) -> np.ndarray:
    A = spec.A_float

    def integrand(s):
        E = spec.E(s)
        return E @ A @ E.T

    norm_A = float(np.linalg.norm(A, 2))

    def noise(s):
        return norm_A * np.linalg.norm(spec.E(s), 2) ** 2 * spec.n

    C = quad.adaptive(integrand, 0.0, t, rtol=1e-13, atol=0.0, order=12, max_depth=30, noise=noise)
    C = 0.5 * (C + C.T)
    C.setflags(write=False)
    return C


def covariance(spec: KolmogorovSpec, t: float) -> np.ndarray:
    """C(t) by adaptive Gauss-Legendre quadrature; symmetrized."""
    if not t > 0:
        raise KolmogorovError("covariance needs t > 0")
    return _covariance_cached(spec, float(t)).copy()


def covariance_exact(spec: KolmogorovSpec, t: Fraction | int | str) -> list[list[Fraction]]:
    """Exact C(t) for nilpotent B: E(s) is a matrix polynomial, integrated term by term."""
    n = spec.n
    t = Fraction(t)
    B = [list(r) for r in spec.B]
    powers = [linalg.identity(n)]
    for _ in range(n):
        powers.append(linalg.matmul(powers[-1], B))
    if any(v != 0 for row in powers[n] for v in row):
        raise KolmogorovError("exact covariance oracle requires nilpotent B")
    # E(s) = sum_k (-s)^k B^k / k!
    coeffs = [[[Fraction((-1) ** k, factorial(k)) * v for v in row] for row in powers[k]] for k in range(n)]
    A = [list(r) for r in spec.A]
    C = [[Fraction(0)] * n for _ in range(n)]
    for k in range(n):
        for m in range(n):
            # s^(k+m) term of E_k A E_m^T
            Ek = coeffs[k]
            EmT = [list(col) for col in zip(*coeffs[m])]
            term = linalg.matmul(linalg.matmul(Ek, A), EmT)
            scale = t ** (k + m + 1) / (k + m + 1)
            for i in range(n):
                for j in range(n):
                    C[i][j] += term[i][j] * scale
    return C


def _kalman_factor(spec: KolmogorovSpec) -> np.ndarray:
    lam, V = np.linalg.eigh(spec.A_float)
    keep = lam > 1e-12
    return V[:, keep] * np.sqrt(lam[keep])


def kalman_rank(spec: KolmogorovSpec) -> int:
    """Rank of [S, BS, ..., B^(n-1) S] by singular values (relative tolerance 1e-9)."""
    S = _kalman_factor(spec)
    if S.shape[1] == 0:
        return 0
    B = spec.B_float
    blocks = [S]
    for _ in range(spec.n - 1):
        blocks.append(B @ blocks[-1])
    return linalg.numeric_rank(np.hstack(blocks), tol=1e-9)


@dataclass(frozen=True)
class CovarianceReport:
    t_samples: tuple[float, ...]
    min_eigenvalues: tuple[float, ...]
    scaled_min_eigenvalues: tuple[float, ...]
    kalman_rank: int
    n: int
    tol: float
    pd_verdict: bool
    kalman_verdict: bool

    @property
    def verdict(self) -> str:
        if self.pd_verdict and self.kalman_verdict:
            return "pass"
        if not self.pd_verdict and not self.kalman_verdict:
            return "fail"
        return "inconsistent"


def _pd_scaled(C: np.ndarray, floor: float, tol: float) -> tuple[bool, float]:
    """Positive definiteness after diagonal scaling to unit diagonal.

    Diagonal entries at or below the rounding floor count as zero.  The
    scaled matrix has eigenvalues in [0, n], so ``tol`` is scale-free.
    """
    d = np.diag(C)
    if np.any(d <= floor):
        return False, 0.0
    s = 1.0 / np.sqrt(d)
    R = C * s[:, None] * s[None, :]
    lam = float(np.min(np.linalg.eigvalsh(R)))
    return lam > tol, lam


def hypoellipticity_check(
    spec: KolmogorovSpec,
    t_samples: Sequence[float] = DEFAULT_T_SAMPLES,
    tol: float = 1e-10,
) -> CovarianceReport:
    """Quadrature positive-definiteness of C(t) at each t, and the Kalman rank."""
    if not t_samples or any(not t > 0 for t in t_samples):
        raise KolmogorovError("t samples must be nonempty and positive")
    norm_A = float(np.max(np.abs(spec.A_float))) if spec.n else 0.0
    raw, scaled, ok = [], [], True
    for t in t_samples:
        C = covariance(spec, t)
        # rounding floor for an entry of int_0^t E A E^T
        grid = np.linspace(0.0, t, 9)
        e_norm = max(np.linalg.norm(spec.E(s), 2) for s in grid)
        floor = 10 * spec.n * np.finfo(float).eps * norm_A * t * e_norm ** 2
        good, lam = _pd_scaled(C, floor, tol)
        ok = ok and good
        raw.append(float(np.min(np.linalg.eigvalsh(C))))
        scaled.append(lam)
    kr = kalman_rank(spec)
    return CovarianceReport(tuple(float(t) for t in t_samples), tuple(raw), tuple(scaled), kr, spec.n, tol,
                            ok, kr == spec.n)


# ---------------------------------------------------------------------------
# weight and group law


def weight(spec: KolmogorovSpec) -> DensityFn:
    """exp(t * trace B) on (x, t)."""
    w = sym.exp(sym.mul(sym.Const(spec.trace_B), sym.Var("t")))
    return DensityFn(w, spec.vars, "exp(t trace B)")


def group_law(spec: KolmogorovSpec) -> GroupLaw:
    """(x, t).(x', t') = (x' + E(t') x, t + t') with E(s) = exp(-sB)."""
    n = spec.n
    names = spec.vars.names
    if all(v == 0 for row in spec.B for v in row):
        return make_group("abelian", n=n + 1, names=names)
    negB = [[-v for v in row] for row in spec.B]
    E, _ = linalg.expm_symbolic(negB, "t")
    x = [sym.Var(f"x{i + 1}") for i in range(n)]
    xr = [sym.Var(f"x{i + 1}_r") for i in range(n)]
    Er = [[sym.substitute(e, {"t": sym.Var("t_r")}) for e in row] for row in E]
    prod = [sym.add(xr[i], *(sym.mul(Er[i][j], x[j]) for j in range(n))) for i in range(n)]
    prod.append(sym.add(sym.Var("t"), sym.Var("t_r")))
    Einv = [[sym.substitute(e, {"t": sym.neg(sym.Var("t"))}) for e in row] for row in E]
    inv = [sym.neg(sym.add(*(sym.mul(Einv[i][j], x[j]) for j in range(n)))) for i in range(n)]
    inv.append(sym.neg(sym.Var("t")))
    return make_group("custom", product=prod, identity=[0] * (n + 1), inverse=inv, names=names, time="t",
                      label="Kolmogorov group")


# ---------------------------------------------------------------------------
# Gaussian kernel


def gaussian_kernel(spec: KolmogorovSpec, t: float, x: Sequence[float], pole: Sequence[float] | None = None) -> float:
    """Fundamental solution with pole (pole, 0), evaluated at (x, t).

    Gamma = (4 pi)^(-n/2) det C(t)^(-1/2) exp(-t tr B) exp(-<C(t)^-1 z, z>/4),
    z = x - E(t) pole; zero for t <= 0.  Annihilated by the operator for t > 0.
    """
    if t <= 0:
        return 0.0
    n = spec.n
    C = covariance(spec, t)
    lam = np.linalg.eigvalsh(C)
    if lam[0] <= 1e-14 * max(lam[-1], 1e-300):
        raise KolmogorovError(f"covariance is singular at t={t}")
    p = np.zeros(n) if pole is None else np.asarray(pole, float)
    z = np.asarray(x, float) - spec.E(t) @ p
    q = float(z @ np.linalg.solve(C, z))
    return float((4 * np.pi) ** (-n / 2) / np.sqrt(np.linalg.det(C)) * np.exp(-float(spec.trace_B) * t - q / 4))


def kernel_field(spec: KolmogorovSpec, pole: Sequence[float] | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized Gamma on (..., n+1) arrays of (x, t) points."""
    n = spec.n
    p = np.zeros(n) if pole is None else np.asarray(pole, float)
    tr = float(spec.trace_B)

    def f(P):
        P = np.asarray(P, dtype=float)
        flat = P.reshape(-1, n + 1)
        out = np.zeros(len(flat))
        pos = flat[:, n] > 0
        if np.any(pos):
            ts, inv = np.unique(flat[pos, n], return_inverse=True)
            Cinv = np.empty((len(ts), n, n))
            mean = np.empty((len(ts), n))
            scale = np.empty(len(ts))
            for k, t in enumerate(ts):
                C = covariance(spec, t)
                Cinv[k] = np.linalg.inv(C)
                mean[k] = spec.E(t) @ p
                scale[k] = (4 * np.pi) ** (-n / 2) / np.sqrt(np.linalg.det(C)) * np.exp(-tr * t)
            z = flat[pos, :n] - mean[inv]
            q = np.einsum("ki,kij,kj->k", z, Cinv[inv], z)
            out[pos] = scale[inv] * np.exp(-q / 4)
        return out.reshape(P.shape[:-1])

    return f


def kernel_mass(spec: KolmogorovSpec, t: float, over: str = "x", pole=None, point=None,
                halfwidth: float = 12.0, order: int = 24) -> float:
    """Mass of Gamma at time t.

    ``over="x"``: integral over x of Gamma * exp(t tr B) (the weighted mass,
    equal to the plain mass when tr B = 0).  ``over="pole"``: integral over
    the pole position with x fixed.
    """
    n = spec.n
    C = covariance(spec, t)
    sd = np.sqrt(np.diag(C) * 2)
    if over == "x":
        center = spec.E(t) @ (np.zeros(n) if pole is None else np.asarray(pole, float))
        f = kernel_field(spec, pole)
        lo, hi = center - halfwidth * sd, center + halfwidth * sd

        def g(X):
            pts = np.concatenate([X, np.full((len(X), 1), t)], axis=1)
            return f(pts) * np.exp(float(spec.trace_B) * t)

        return quad.box_integrate(g, lo, hi, order=order, max_width=float(np.max(sd)))
    if over == "pole":
        x = np.zeros(n) if point is None else np.asarray(point, float)
        Einv = np.linalg.inv(spec.E(t))
        center = Einv @ x
        M = Einv @ C @ Einv.T
        sdp = np.sqrt(np.diag(M) * 2)
        lo, hi = center - halfwidth * sdp, center + halfwidth * sdp
        tr = float(spec.trace_B)
        Cinv = np.linalg.inv(C)
        const = (4 * np.pi) ** (-n / 2) / np.sqrt(np.linalg.det(C)) * np.exp(-tr * t)
        Et = spec.E(t)

        def g(Y):
            z = x[None, :] - Y @ Et.T
            return const * np.exp(-np.einsum("ki,ij,kj->k", z, Cinv, z) / 4)

        return quad.box_integrate(g, lo, hi, order=order, max_width=float(np.max(sdp)))
    raise ValueError("over must be 'x' or 'pole'")


def _fd_terms(spec: KolmogorovSpec, f: Callable, P: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference L f at points P (central differences, one Richardson step).

    Returns (L f, sum of absolute values of the individual terms).
    """
    n = spec.n
    A = spec.A_float
    B = spec.B_float

    def derivs(step):
        f0 = f(P)
        D1, D2 = {}, {}
        for j in range(n + 1):
            e = np.zeros(n + 1)
            e[j] = step
            fp, fm = f(P + e), f(P - e)
            D1[j] = (fp - fm) / (2 * step)
            D2[(j, j)] = (fp - 2 * f0 + fm) / step ** 2
        for i in range(n):
            for k in range(i + 1, n):
                if A[i, k] == 0:
                    continue
                ei = np.zeros(n + 1)
                ek = np.zeros(n + 1)
                ei[i] = step
                ek[k] = step
                D2[(i, k)] = (f(P + ei + ek) - f(P + ei - ek) - f(P - ei + ek) + f(P - ei - ek)) / (4 * step ** 2)
        return D1, D2

    c1, c2 = derivs(h)
    f1, f2 = derivs(h / 2)
    D1 = {k: (4 * f1[k] - c1[k]) / 3 for k in c1}
    D2 = {k: (4 * f2[k] - c2[k]) / 3 for k in c2}
    terms = []
    for i in range(n):
        for k in range(i, n):
            if A[i, k] != 0:
                terms.append((A[i, k] if i == k else 2 * A[i, k]) * D2[(i, k)])
    x = P[:, :n]
    drift = x @ B.T
    for j in range(n):
        terms.append(drift[:, j] * D1[j])
    terms.append(-D1[n])
    T = np.array(terms)
    return T.sum(axis=0), np.abs(T).sum(axis=0)


def kernel_annihilation_residual(spec: KolmogorovSpec, points: np.ndarray, pole=None, h: float = 1e-4) -> float:
    """max |L Gamma| / max (sum of |terms|) over the given (x, t) points, t > 0."""
    P = np.atleast_2d(np.asarray(points, float))
    if np.any(P[:, -1] <= 2 * h):
        raise KolmogorovError("annihilation check needs t well above the step")
    val, scale = _fd_terms(spec, kernel_field(spec, pole), P, h)
    return float(np.max(np.abs(val)) / np.max(scale))


# ---------------------------------------------------------------------------
# weak formulation


def weak_prolongation_residual(
    spec: KolmogorovSpec,
    u,
    phi: BoxBump,
    order: int = 24,
    box: tuple[Sequence[float], Sequence[float]] | None = None,
    max_width: float | None = 0.25,
    t_breakpoints: Sequence[float] = (),
) -> float:
    """|int u_bar L* phi| over the support of phi, u_bar = u for t > 0 and 0 for t <= 0.

    ``u`` is an Expr in (x, t) or a vectorized callable on (..., n+1) points;
    it must vanish at t = 0 on the support of phi.
    """
    vars = spec.vars
    n = spec.n
    if phi.vars.names != vars.names:
        raise KolmogorovError("test function must use the operator's variables")
    lo, hi = phi.lo, phi.hi
    if box is not None:
        blo, bhi = np.asarray(box[0], float), np.asarray(box[1], float)
        if np.any(blo > lo) or np.any(bhi < hi):
            raise KolmogorovError("support box of the test function is not covered by the quadrature box")
        lo, hi = blo, bhi
    ufun = sym.lambdify(u, vars.names) if isinstance(u, Expr) else u
    # zero trace on the support
    X0 = Sampler(n=64, seed=3).points(n) * 0.5 + 0.5
    X0 = phi.lo[:n] + X0 * (phi.hi[:n] - phi.lo[:n])
    trace = ufun(np.concatenate([X0, np.zeros((len(X0), 1))], axis=1))
    if np.max(np.abs(trace)) > 1e-10:
        raise KolmogorovError("u does not vanish at t = 0")
    Ls = formal_adjoint(operator_of(spec))
    Lphi = sym.lambdify(Ls(phi.inside), vars.names)

    def integrand(P):
        val = np.where(P[:, n] > 0, ufun(P), 0.0)
        return val * Lphi(P) * phi.indicator(P)

    bps = [()] * n + [(0.0, *t_breakpoints)]
    return abs(quad.box_integrate(integrand, lo, hi, order=order, max_width=max_width, breakpoints=bps))
