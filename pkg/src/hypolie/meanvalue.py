"""Mean-value operators M, N built from a boundary measure mu and an interior measure nu.

Only the Laplacian on Euclidean balls centred at the identity is instantiated:
mu is the normalized surface measure of the sphere and nu has the Green
function of the ball (pole at the centre) as density.  M and N accept any
MeasurePair, so other families can be plugged in.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi
from typing import Callable, Sequence

import numpy as np

from . import quadrature as quad
from . import symbolic as sym
from .group import GroupLaw, right_invariant_density
from .operator import SecondOrderOperator, apply
from .symbolic import Expr, Sampler


class MeanValueError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MeasurePair:
    """Discrete realizations of mu (on the sphere) and nu (on the ball) of radius r."""

    n: int
    r: float
    sphere_nodes: np.ndarray
    sphere_weights: np.ndarray
    ball_nodes: np.ndarray
    ball_weights: np.ndarray
    boundary_density: Callable[[np.ndarray], np.ndarray]
    volume_density: Callable[[np.ndarray], np.ndarray]
    method: str

    @property
    def mu_mass(self) -> float:
        return float(np.sum(self.sphere_weights))

    @property
    def nu_mass(self) -> float:
        return float(np.sum(self.ball_weights))


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n (2 for n = 1)."""
    return 2 * pi ** (n / 2) / gamma(n / 2)


def green_at_center(n: int, r: float) -> Callable[[np.ndarray], np.ndarray]:
    """Green function of the ball of radius r with pole at the centre, as a function of |y|."""
    if n == 1:
        return lambda rho: (r - rho) / 2
    if n == 2:
        return lambda rho: np.log(r / rho) / (2 * pi)
    c = 1.0 / ((n - 2) * sphere_area(n))
    return lambda rho: c * (rho ** (2.0 - n) - r ** (2.0 - n))


def unit_sphere_rule(n: int, resolution: int = 256) -> tuple[np.ndarray, np.ndarray, str]:
    """Nodes and weights (summing to 1) of the normalized surface measure."""
    if n == 1:
        return np.array([[-1.0], [1.0]]), np.array([0.5, 0.5]), "two-point rule"
    if n == 2:
        a = 2 * pi * np.arange(resolution) / resolution
        return np.stack([np.cos(a), np.sin(a)], axis=1), np.full(resolution, 1.0 / resolution), \
            f"trapezoid rule, {resolution} nodes"
    if n == 3:
        m = max(2, resolution // 8)
        k = max(4, 2 * m)
        c, wc = quad.gauss_legendre(m)
        phi = 2 * pi * np.arange(k) / k
        s = np.sqrt(1 - c ** 2)
        nodes = np.stack([
            np.outer(s, np.cos(phi)).ravel(),
            np.outer(s, np.sin(phi)).ravel(),
            np.repeat(c, k),
        ], axis=1)
        w = np.repeat(wc / 2, k) / k
        return nodes, w, f"product rule: Gauss-Legendre in cos(theta) ({m}) x trapezoid in phi ({k})"
    raise MeanValueError("sphere quadrature is implemented for n <= 3")


def _radial_rule(n: int, r: float, radial_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes rho and weights for int_0^r f(rho) |S^(n-1)| g(rho) rho^(n-1) d rho."""
    if n == 2:
        # rho = r s^2 removes the logarithmic factor's effect on smoothness
        s, ws = quad.rule(0.0, 1.0, radial_nodes)
        rho = r * s * s
        h = -4 * r * r * s ** 3 * np.log(s)
        return rho, ws * h
    rho, w = quad.rule(0.0, r, radial_nodes)
    if n == 1:
        return rho, w * (r - rho)
    return rho, w * (rho - rho ** (n - 1) * r ** (2.0 - n)) / (n - 2)


def laplacian_ball_measures(n: int, r: float, sphere_resolution: int = 256, radial_nodes: int = 64) -> MeasurePair:
    """Harmonic measure of the centre (mu) and Green measure of the centre (nu) for the ball B(0, r)."""
    if n < 1 or not r > 0:
        raise MeanValueError("need n >= 1 and r > 0")
    U, wu, method = unit_sphere_rule(n, sphere_resolution)
    rho, wr = _radial_rule(n, r, radial_nodes)
    ball = (rho[:, None, None] * U[None, :, :]).reshape(-1, n)
    wb = np.outer(wr, wu).ravel()
    g = green_at_center(n, r)

    def boundary_density(Y):
        return np.full(np.shape(Y)[:-1], 1.0 / (sphere_area(n) * r ** (n - 1)))

    def volume_density(Y):
        rr = np.linalg.norm(np.asarray(Y, float), axis=-1)
        with np.errstate(divide="ignore"):
            return np.where(rr < r, g(rr), 0.0)

    return MeasurePair(n, float(r), r * U, wu, ball, wb, boundary_density, volume_density,
                       f"sphere: {method}; radial: Gauss-Legendre ({radial_nodes})")


def _values(u, G: GroupLaw, x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    pts = G.multiply(np.broadcast_to(x, Y.shape), Y)
    if isinstance(u, Expr):
        return sym.evaluate_many(u, pts, G.vars)
    return np.asarray(u(pts), float)


def _check(G: GroupLaw, mp: MeasurePair) -> None:
    if G.dim != mp.n:
        raise MeanValueError(f"measure pair lives in R^{mp.n}, group has dimension {G.dim}")


def M_op(u, G: GroupLaw, mp: MeasurePair, x: Sequence[float]) -> float:
    """int u(x.y) d mu(y)."""
    _check(G, mp)
    return float(_values(u, G, np.asarray(x, float), mp.sphere_nodes) @ mp.sphere_weights)


def N_op(f, G: GroupLaw, mp: MeasurePair, x: Sequence[float]) -> float:
    """int f(x.y) d nu(y)."""
    _check(G, mp)
    return float(_values(f, G, np.asarray(x, float), mp.ball_nodes) @ mp.ball_weights)


def M_many(u, G: GroupLaw, mp: MeasurePair, X: np.ndarray) -> np.ndarray:
    """M(u) at each row of X, vectorized over the nodes of mu."""
    _check(G, mp)
    X = np.atleast_2d(np.asarray(X, float))
    out = np.zeros(len(X))
    for y, w in zip(mp.sphere_nodes, mp.sphere_weights):
        out += w * _eval_at(u, G, G.multiply(X, np.broadcast_to(y, X.shape)))
    return out


def _eval_at(u, G: GroupLaw, pts: np.ndarray) -> np.ndarray:
    if isinstance(u, Expr):
        return sym.evaluate_many(u, pts, G.vars)
    return np.asarray(u(pts), float)


def _is_laplacian(L: SecondOrderOperator) -> bool:
    d = L.dim
    return all(L.A[i][j] == (sym.ONE if i == j else sym.ZERO) for i in range(d) for j in range(d)) \
        and all(sym.is_zero(b) for b in L.b)


def representation_residual(u: Expr, L: SecondOrderOperator, G: GroupLaw, mp: MeasurePair,
                            X: np.ndarray) -> float:
    """max over x of |u(x) - M(u)(x) + N(L u)(x)|."""
    if not _is_laplacian(L) or G.family != "abelian":
        raise MeanValueError("measures are instantiated only for the Laplacian on abelian R^n")
    _check(G, mp)
    Lu = apply(L, u)
    X = np.atleast_2d(np.asarray(X, float))
    res = [abs(sym.evaluate(u, x, G.vars) - M_op(u, G, mp, x) + N_op(Lu, G, mp, x)) for x in X]
    return float(max(res))


def mass_identity_residual(
    u,
    G: GroupLaw,
    mp: MeasurePair,
    R: float,
    support: tuple[Sequence[float], Sequence[float]],
    order: int = 16,
    max_width: float = 0.25,
    face_samples: int = 2000,
) -> tuple[float, float]:
    """|int M(u) w dx - int u w dx| over [-R, R]^dim, w the right-invariant density.

    ``u`` is an Expr or a vectorized callable supported in the box ``support``.
    Both integrands are checked to vanish on the faces of [-R, R]^dim
    (sampled), otherwise the truncation would lose mass.  Returns the
    residual and the value of int u w dx.
    """
    _check(G, mp)
    d = G.dim
    lo, hi = np.asarray(support[0], float), np.asarray(support[1], float)
    if np.any(lo < -R) or np.any(hi > R):
        raise MeanValueError("support of u is not inside [-R, R]^dim")
    w = right_invariant_density(G)

    def f_u(P):
        return _eval_at(u, G, P) * w(P)

    def f_m(P):
        return M_many(u, G, mp, P) * w(P)

    rng = np.random.default_rng(0)
    for k in range(d):
        for side in (-R, R):
            F = rng.uniform(-R, R, size=(face_samples, d))
            F[:, k] = side
            if np.max(np.abs(M_many(u, G, mp, F))) > 1e-14:
                raise MeanValueError("M(u) does not vanish on the boundary of the truncation box")
    bps = []
    for k in range(d):
        pts = {lo[k], hi[k]}
        bps.append(tuple(sorted(pts)))
    lhs = quad.box_integrate(f_m, [-R] * d, [R] * d, order=order, max_width=max_width, breakpoints=bps)
    rhs = quad.box_integrate(f_u, lo, hi, order=order, max_width=max_width)
    return abs(lhs - rhs), rhs
