"""Weighted L^p scans over growing boxes, the convexity gadgets F, and scripted demonstrations.

A scan can only show a trend: growth between the last two radii is reported
as "no evidence of finiteness", never as a proof of divergence.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import fields as fl
from . import group as grp
from . import kolmogorov as kol
from . import operator as op
from . import quadrature as quad
from . import symbolic as sym
from .group import DensityFn, GroupLaw
from .operator import SecondOrderOperator
from .symbolic import Expr, Sampler, VarSet

DEFAULT_RADII = (1.0, 2.0, 4.0, 8.0, 16.0)
GROWTH_THRESHOLD = 1.1
UNRELIABLE = 0.01
REFINE_RTOL = 1e-10


class LiouvilleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# L^p scans


@dataclass(frozen=True)
class LpScan:
    u: Expr | Callable
    p: float
    w: DensityFn
    radii: tuple[float, ...]
    values: tuple[float, ...]
    errors: tuple[float, ...]
    unreliable: tuple[bool, ...]
    method: str

    @property
    def growth_ratio(self) -> float:
        a, b = self.values[-2], self.values[-1]
        if a == 0:
            return float("inf") if b > 0 else 1.0
        return b / a

    @property
    def trend(self) -> str:
        if len(self.values) < 2:
            return "insufficient radii"
        if self.values[-1] == 0:
            return "identically zero on the scanned boxes"
        if self.growth_ratio > GROWTH_THRESHOLD:
            return "no evidence of finiteness"
        return "values level off"

    @property
    def diverging(self) -> bool:
        return self.trend == "no evidence of finiteness"

    def as_dict(self) -> dict:
        return {
            "u": sym.to_str(self.u) if isinstance(self.u, Expr) else getattr(self.u, "__name__", "callable"),
            "p": self.p,
            "weight": str(self.w),
            "radii": list(self.radii),
            "values": list(self.values),
            "error_estimates": list(self.errors),
            "unreliable": list(self.unreliable),
            "growth_ratio": self.growth_ratio,
            "trend": self.trend,
            "method": self.method,
        }


def lp_partial_scan(
    u: Expr | Callable[[np.ndarray], np.ndarray],
    p: float,
    w: DensityFn,
    radii: Sequence[float] = DEFAULT_RADII,
    order: int = 16,
    min_width: float = 2.0,
    max_points: int = 8_000_000,
) -> LpScan:
    """Partial integrals of |u|^p w over [-R, R]^dim by composite tensor Gauss-Legendre.

    Each value is computed with ``order`` and ``order + 4`` nodes per panel;
    the higher-order value is kept and their difference is the error estimate.
    Panels start at width R (split at 0) and are halved while the estimate
    exceeds a relative 1e-10 and the node budget allows; entries whose
    estimate still exceeds 1% are flagged unreliable.
    ``u`` is an Expr or a callable vectorized over (N, dim) arrays.
    """
    if not p > 0:
        raise LiouvilleError("p must be positive")
    radii = tuple(float(r) for r in radii)
    if not radii or any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise LiouvilleError("radii must be positive and strictly increasing")
    names = w.vars.names
    d = len(names)
    uf = sym.lambdify(u, names) if isinstance(u, Expr) else u

    def integrand(X):
        return np.abs(uf(X)) ** p * w(X)

    vals, errs, flags = [], [], []
    for R in radii:
        lo, hi = [-R] * d, [R] * d
        bp = [(0.0,)] * d
        width = R
        while True:
            coarse = quad.box_integrate(integrand, lo, hi, order=order, max_width=width, breakpoints=bp)
            fine = quad.box_integrate(integrand, lo, hi, order=order + 4, max_width=width, breakpoints=bp)
            err = abs(fine - coarse)
            converged = bool(np.isfinite(fine) and err <= REFINE_RTOL * abs(fine))
            nodes = (int(np.ceil(R / (width / 2))) * (order + 4)) ** d
            if converged or width / 2 < min_width or nodes > max_points:
                break
            width /= 2
        vals.append(float(fine))
        errs.append(float(err))
        flags.append(bool(not np.isfinite(fine) or err > UNRELIABLE * abs(fine)))
    method = f"composite tensor Gauss-Legendre, orders {order}/{order + 4}, panels halved from R down to {min_width}"
    return LpScan(u, float(p), w, radii, tuple(vals), tuple(errs), tuple(flags), method)


# ---------------------------------------------------------------------------
# convexity gadgets


@dataclass(frozen=True)
class ConvexityGadget:
    """F with closed-form F' and F''; numeric callables accept numpy arrays."""

    kind: str
    p: float
    F: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    dF: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    ddF: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    domain: tuple[float, float]
    formula: str

    def invariants(self, n: int = 10_000, lo: float = -50.0, hi: float = 50.0) -> dict[str, bool]:
        """The defining properties of the gadget, tested on a uniform grid."""
        a = max(lo, self.domain[0])
        t = np.linspace(a, hi, n)
        F, d1, d2 = self.F(t), self.dF(t), self.ddF(t)
        out = {"finite": bool(np.all(np.isfinite(F) & np.isfinite(d1) & np.isfinite(d2)))}
        tp = np.abs(t) ** self.p
        slack = 1e-12 * (1 + tp)
        if self.kind == "harmonic_pge1":
            nz = np.abs(t) > 1e-3
            out["bounds"] = bool(np.all(F >= -1e-15) and np.all(F <= tp + slack))
            out["strictly_convex_off_zero"] = bool(np.all(d2[nz] > 0))
        elif self.kind == "harmonic_plt1":
            out["bounds"] = bool(np.all(F >= -1e-15) and np.all(F <= tp + slack))
            out["strictly_concave"] = bool(np.all(d2 < 0))
        else:
            pos = t > 1e-3
            neg = t <= 0
            out["zero_for_nonpositive"] = bool(np.all(F[neg] == 0) and np.all(d1[neg] == 0) and np.all(d2[neg] == 0))
            out["increasing_convex_on_positive"] = bool(np.all(d1[pos] > 0) and np.all(d2[pos] > 0))
            out["bounds"] = bool(np.all(F >= 0) and np.all(F[t >= 0] <= tp[t >= 0] + slack[t >= 0]))
        return out


def _pge1(p: float) -> ConvexityGadget:
    def F(t):
        s = np.sqrt(1 + t * t)
        return (t * t / (s + 1)) ** p

    def dF(t):
        s = np.sqrt(1 + t * t)
        g = t * t / (s + 1)
        return p * g ** (p - 1) * t / s

    def ddF(t):
        s = np.sqrt(1 + t * t)
        g = t * t / (s + 1)
        return p * g ** (p - 1) * ((p - 1) * (s + 1) / s ** 2 + 1 / s ** 3)

    return ConvexityGadget("harmonic_pge1", p, F, dF, ddF, (-np.inf, np.inf), "(sqrt(1+t^2) - 1)^p")


def _plt1(p: float) -> ConvexityGadget:
    def F(t):
        return (1 + t) ** p - 1

    def dF(t):
        return p * (1 + t) ** (p - 1)

    def ddF(t):
        return p * (p - 1) * (1 + t) ** (p - 2)

    return ConvexityGadget("harmonic_plt1", p, F, dF, ddF, (0.0, np.inf), "(1+t)^p - 1 for t >= 0")


def _sub(p: float) -> ConvexityGadget:
    def parts(t):
        t = np.asarray(t)
        pos = t > 0
        tt = np.where(pos, t, 1)
        q = (1 + tt ** 4) ** 0.25
        g = tt ** 4 / ((q + 1) * (q * q + 1))
        return pos, tt, q, g

    def F(t):
        pos, tt, q, g = parts(t)
        return np.where(pos, g ** p, 0)

    def dF(t):
        pos, tt, q, g = parts(t)
        return np.where(pos, p * g ** (p - 1) * tt ** 3 / q ** 3, 0)

    def ddF(t):
        pos, tt, q, g = parts(t)
        val = p * g ** (p - 1) * ((p - 1) * tt ** 2 * (q + 1) * (q * q + 1) / q ** 6 + 3 * tt ** 2 / q ** 7)
        return np.where(pos, val, 0)

    return ConvexityGadget("subharmonic", p, F, dF, ddF, (-np.inf, np.inf), "0 for t <= 0, ((1+t^4)^(1/4) - 1)^p for t > 0")


GADGET_KINDS = ("harmonic_pge1", "harmonic_plt1", "subharmonic")


def gadget(kind: str, p: float) -> ConvexityGadget:
    p = float(p)
    if kind == "harmonic_pge1":
        if p < 1:
            raise LiouvilleError("harmonic_pge1 needs p >= 1")
        return _pge1(p)
    if kind == "harmonic_plt1":
        if not 0 < p < 1:
            raise LiouvilleError("harmonic_plt1 needs 0 < p < 1")
        return _plt1(p)
    if kind == "subharmonic":
        if p < 1:
            raise LiouvilleError("subharmonic gadget needs p >= 1")
        return _sub(p)
    raise LiouvilleError(f"unknown gadget kind {kind!r}")


# ---------------------------------------------------------------------------
# demonstration scenarios

HARMONIC_VERDICT = "consistent with the L^p Liouville theorem for harmonic functions"
SUBHARMONIC_VERDICT = "consistent with the L^p Liouville theorem for subharmonic functions"
MASS_VERDICT = "consistent with infinite total mass of the right-invariant measure"


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    description: str
    operator: Callable[[], SecondOrderOperator]
    group: Callable[[], GroupLaw]
    u: str
    p_values: tuple[float, ...]
    frame: Callable[[GroupLaw], list] | None = None


def _heat():
    return op.heat(2)


def _heat_group():
    return grp.make_group("abelian", n=3, names=("x1", "x2", "t"))


def _kol1():
    return kol.operator_of(kol.KolmogorovSpec([[1, 0], [0, 0]], [[0, 0], [1, 0]]))


def _kol1_group():
    return kol.group_law(kol.KolmogorovSpec([[1, 0], [0, 0]], [[0, 0], [1, 0]]))


def _heis_group():
    return grp.make_group("inverse_matrix_exponential", B=[[0, 0], [1, 0]])


def _heis_L2():
    G = _heis_group()
    T = fl.VectorField.parse(["1", "0", "x1"], G.vars, "T")
    X1 = fl.VectorField.coordinate(G.vars, "x1")
    return op.from_frame([X1], T, [-1], label="dx1^2 - T on the polarized Heisenberg group")


OU_B = [[1, 1], [-1, 0]]


def _ou_group():
    return grp.make_group("inverse_matrix_exponential", B=OU_B)


def _ou_operator():
    G = _ou_group()
    T = fl.left_invariant_frame(G)[0]
    X1 = fl.VectorField.coordinate(G.vars, "x1")
    return op.from_frame([X1], T, [-1], weights=[Fraction(1, 2)], label="(1/2) dx1^2 - T")


COMPANION_B = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]


def _companion_group():
    return grp.make_group("matrix_exponential", B=COMPANION_B)


def companion_operators() -> dict[str, SecondOrderOperator]:
    """The five second-order polynomials in {d_t, X_1} for the nilpotent companion matrix."""
    G = _companion_group()
    frame = fl.left_invariant_frame(G)
    Dt, X1 = frame[0], frame[1]
    return {
        "dt^2 + X1^2": op.from_frame([Dt, X1]),
        "dt^2 + X1": op.from_frame([Dt], X1, [1]),
        "dt^2 - X1": op.from_frame([Dt], X1, [-1]),
        "X1^2 + dt": op.from_frame([X1], Dt, [1]),
        "X1^2 - dt": op.from_frame([X1], Dt, [-1]),
    }


def _companion_operator():
    return companion_operators()["X1^2 - dt"]


def _lap2():
    return op.laplacian(2)


def _lap2_group():
    return grp.make_group("abelian", n=2)


SCENARIOS: dict[str, Scenario] = {
    s.name: s for s in [
        Scenario("heat_counterexample", "heat operator on R^2 x R with the positive harmonic exp(x1+x2+2t)",
                 _heat, _heat_group, "exp(x1 + x2 + 2*t)", (1.0, 2.0)),
        Scenario("kolmogorov_n1", "classical Kolmogorov operator dx1^2 + x1 dx2 - dt with exp(x1+t)",
                 _kol1, _kol1_group, "exp(x1 + t)", (1.0, 2.0)),
        Scenario("polarized_heisenberg_L2", "dx1^2 - dt - x1 dx2 on the polarized Heisenberg group, u = x1",
                 _heis_L2, _heis_group, "x1", (1.0, 2.0)),
        Scenario("ou_rotation_hatG", "(1/2) dx1^2 - (x1+x2) dx1 + x1 dx2 - dt on hat-G(B), B = [[1,1],[-1,0]], u = 1",
                 _ou_operator, _ou_group, "1", (1.0,)),
        Scenario("companion_example", "X1^2 - dt for the nilpotent companion matrix of order 3, u = t + x1^2/2",
                 _companion_operator, _companion_group, "t + x1^2/2", (1.0, 2.0),
                 frame=lambda G: fl.left_invariant_frame(G)[:2]),
        Scenario("constant_one_hatG_trace1", "u = 1 against the weight exp(-t) of hat-G(B), trace B = 1",
                 _ou_operator, _ou_group, "1", (1.0,)),
        Scenario("laplacian_subharmonic", "Laplacian on R^2 with the subharmonic x1^2",
                 _lap2, _lap2_group, "x1^2", (1.0,)),
    ]
}


def _nonnegative(u: Expr, vars: VarSet, sampler: Sampler) -> bool:
    return bool(np.all(sym.evaluate_many(u, sampler.points(len(vars)), vars) >= 0))


def liouville_demonstration(
    name: str,
    radii: Sequence[float] = DEFAULT_RADII,
    seed: int = 0,
    max_depth: int | None = None,
) -> dict:
    """Run the hypothesis checks, classification and L^p scans of one scenario."""
    if name not in SCENARIOS:
        raise LiouvilleError(f"unknown scenario {name!r}; known: {', '.join(sorted(SCENARIOS))}")
    sc = SCENARIOS[name]
    L = sc.operator()
    G = sc.group()
    sampler = Sampler(seed=seed)
    u = sym.parse(sc.u, L.vars)
    origin = [0] * L.dim
    nd = op.check_nd(L, sampler.points(L.dim))
    D = op.decompose(L)
    gens = D.nonzero_fields() + ([D.drift] if not D.drift.is_zero() else [])
    cert = fl.hormander_rank(gens, origin, max_depth)
    li = op.check_left_invariance(L, G, Sampler(n=16, seed=seed))
    cls = op.classify(L, u, sampler)
    w = grp.right_invariant_density(G)
    w_L = DensityFn(op._rename_positional(w.w, G.vars, L.vars), L.vars, w.note)
    scans = [lp_partial_scan(u, p, w_L, radii) for p in sc.p_values]
    nonneg = _nonnegative(u, L.vars, sampler)
    u_zero = sym.is_zero(u)
    constant = all(sym.is_zero(sym.differentiate(u, v)) for v in L.vars)
    converging = any(not s.diverging for s in scans)
    report = {
        "scenario": name,
        "description": sc.description,
        "operator": str(L),
        "group": G.label,
        "density": str(w),
        "u": sym.to_str(u),
        "hypotheses": {
            "non_degenerate": nd,
            "hormander": cert.summary(max_depth if max_depth is not None else L.dim + 2),
            "hormander_rank": cert.achieved_rank,
            "hormander_depth": cert.depth,
            "hormander_witnesses": list(cert.witnesses),
            "left_invariance_residual": li,
        },
        "classification": str(cls),
        "harmonic": cls.kind == "harmonic",
        "exact_symbolic_zero": cls.exact_zero,
        "nonnegative_on_samples": nonneg,
        "scans": [s.as_dict() for s in scans],
    }
    if sc.frame is not None:
        report["frame_checks"] = _frame_checks(G, sc.frame(G), max_depth)
    if u_zero:
        verdict = f"{HARMONIC_VERDICT} (u is identically zero)"
    elif cls.kind == "harmonic":
        if converging:
            verdict = "inconsistent with the L^p Liouville theorem for harmonic functions"
        else:
            verdict = MASS_VERDICT if constant else HARMONIC_VERDICT
    elif cls.kind == "subharmonic":
        positive = bool(np.any(sym.evaluate_many(u, sampler.points(L.dim), L.vars) > 0))
        if converging and positive:
            verdict = "inconsistent with the L^p Liouville theorem for subharmonic functions"
        else:
            verdict = SUBHARMONIC_VERDICT
    else:
        verdict = "negative control: u is neither harmonic nor subharmonic on samples"
    report["verdict"] = verdict
    return report


def _frame_checks(G: GroupLaw, frame: list, max_depth: int | None) -> dict:
    cert = fl.hormander_rank(frame, [0] * G.dim, max_depth)
    ops = companion_operators()
    return {
        "frame": [f.label for f in frame],
        "frame_rank": cert.achieved_rank,
        "frame_depth": cert.depth,
        "operators": {
            k: {
                "non_degenerate": op.check_nd(L, Sampler(n=16).points(L.dim)),
                "left_invariance_residual": op.check_left_invariance(L, G, Sampler(n=8)),
            }
            for k, L in ops.items()
        },
    }


def scenario_names() -> list[str]:
    return list(SCENARIOS)
