"""Exact rational linear algebra and the closed-form matrix exponential exp(tB).

exp(tB) is assembled from the fundamental system of the scalar ODE whose
characteristic polynomial is that of B: ``exp(tB) = sum_k phi_k(t) B^k`` where
``phi_k`` solves the ODE with ``phi_k^(j)(0) = delta_jk``.  When every root of
the characteristic polynomial is rational (or a complex pair ``a +- i w`` with
rational ``a`` and ``w``) all coefficients stay rational; otherwise floats are
used and the result is flagged inexact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Sequence

import numpy as np

from . import symbolic as sym

Matrix = list[list[Fraction]]


def to_fractions(M) -> Matrix:
    rows = [list(r) for r in M]
    if rows and any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("ragged matrix")
    return [[sym._num(x) if not isinstance(x, float) else Fraction(x) for x in r] for r in rows]


def is_square(M) -> bool:
    return all(len(r) == len(M) for r in M)


def identity(n: int) -> Matrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def matmul(A: Matrix, B: Matrix) -> Matrix:
    return [[sum((A[i][k] * B[k][j] for k in range(len(B))), Fraction(0))
             for j in range(len(B[0]))] for i in range(len(A))]


def trace(A: Matrix) -> Fraction:
    return sum((A[i][i] for i in range(len(A))), Fraction(0))


def _integer_rows(M: Sequence[Sequence[Fraction]]) -> list[list[int]]:
    out = []
    for r in M:
        den = 1
        for x in r:
            den = den * x.denominator // math.gcd(den, x.denominator)
        out.append([int(x * den) for x in r])
    return out


def bareiss_rank(M: Sequence[Sequence[Fraction]]) -> int:
    """Rank by fraction-free (Bareiss) elimination after clearing denominators."""
    A = _integer_rows(M)
    if not A or not A[0]:
        return 0
    rows, cols = len(A), len(A[0])
    rank = 0
    prev = 1
    for c in range(cols):
        piv = next((r for r in range(rank, rows) if A[r][c] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        p = A[rank][c]
        for r in range(rank + 1, rows):
            for j in range(c + 1, cols):
                A[r][j] = (A[r][j] * p - A[rank][j] * A[r][c]) // prev
            A[r][c] = 0
        prev = p
        rank += 1
        if rank == rows:
            break
    return rank


def bareiss_det(M: Sequence[Sequence[Fraction]]) -> Fraction:
    n = len(M)
    if n == 0:
        return Fraction(1)
    A = [list(r) for r in M]
    sign = 1
    prev = Fraction(1)
    for k in range(n - 1):
        if A[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if A[r][k] != 0), None)
            if swap is None:
                return Fraction(0)
            A[k], A[swap] = A[swap], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) / prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def solve_exact(A: Matrix, B: Matrix) -> Matrix:
    """Solve A X = B by Gauss-Jordan over the rationals."""
    n = len(A)
    aug = [list(A[i]) + list(B[i]) for i in range(n)]
    for c in range(n):
        piv = next((r for r in range(c, n) if aug[r][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular system")
        aug[c], aug[piv] = aug[piv], aug[c]
        p = aug[c][c]
        aug[c] = [x / p for x in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[c])]
    return [row[n:] for row in aug]


def numeric_rank(M: np.ndarray, tol: float = 1e-9) -> int:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def charpoly(B: Matrix) -> list[Fraction]:
    """Monic characteristic polynomial coefficients, lowest degree first.

    Faddeev-LeVerrier recursion in exact arithmetic.
    """
    n = len(B)
    c = [Fraction(0)] * (n + 1)
    c[n] = Fraction(1)
    M = [[Fraction(0)] * n for _ in range(n)]
    I = identity(n)
    for k in range(1, n + 1):
        BM = matmul(B, M)
        M = [[BM[i][j] + c[n - k + 1] * I[i][j] for j in range(n)] for i in range(n)]
        c[n - k] = -trace(matmul(B, M)) / k
    return c


@dataclass(frozen=True)
class Root:
    """A real root (``imag is None``) or a conjugate pair ``real +- i*imag``."""

    real: Fraction | float
    imag: Fraction | float | None
    multiplicity: int

    @property
    def exact(self) -> bool:
        return isinstance(self.real, Fraction) and (self.imag is None or isinstance(self.imag, Fraction))


def _divisors(n: int) -> list[int]:
    n = abs(n)
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def _poly_eval(coeffs: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _deflate(coeffs: list[Fraction], r: Fraction) -> list[Fraction]:
    # synthetic division by (x - r); coefficients lowest degree first
    n = len(coeffs) - 1
    out = [Fraction(0)] * n
    acc = Fraction(0)
    for i in range(n, 0, -1):
        acc = acc * r + coeffs[i]
        out[i - 1] = acc
    return out


def _rational_sqrt(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    a, b = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if a * a == q.numerator and b * b == q.denominator:
        return Fraction(a, b)
    return None


def roots(coeffs: Sequence[Fraction]) -> list[Root]:
    """Roots of a rational polynomial (lowest degree first) with multiplicities."""
    coeffs = [Fraction(c) for c in coeffs]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    found: dict[Fraction, int] = {}
    while len(coeffs) > 1 and coeffs[0] == 0:
        coeffs.pop(0)
        found[Fraction(0)] = found.get(Fraction(0), 0) + 1
    progress = True
    while progress and len(coeffs) > 1:
        progress = False
        ints = _integer_rows([coeffs])[0]
        lead, tail = ints[-1], ints[0]
        for q in _divisors(lead):
            for p in _divisors(tail):
                for cand in (Fraction(p, q), Fraction(-p, q)):
                    if _poly_eval(coeffs, cand) == 0:
                        coeffs = _deflate(coeffs, cand)
                        found[cand] = found.get(cand, 0) + 1
                        progress = True
                        break
                if progress:
                    break
            if progress:
                break
    out = [Root(r, None, m) for r, m in sorted(found.items())]
    deg = len(coeffs) - 1
    if deg == 0:
        return out
    if deg == 2:
        c0, c1, c2 = coeffs
        b, c = c1 / c2, c0 / c2
        re = -b / 2
        disc = b * b - 4 * c
        if disc < 0:
            w2 = -disc / 4
            w = _rational_sqrt(w2)
            out.append(Root(re, w if w is not None else math.sqrt(w2), 1))
        else:
            s = math.sqrt(disc)
            out.append(Root(float(re) - s / 2, None, 1))
            out.append(Root(float(re) + s / 2, None, 1))
        return out
    # irreducible factors of degree >= 3: numeric roots, clustered
    z = np.roots([float(c) for c in reversed(coeffs)])
    used = [False] * len(z)
    for i, zi in enumerate(z):
        if used[i] or zi.imag < -1e-12:
            continue
        group = [j for j in range(len(z)) if not used[j] and abs(z[j] - zi) < 1e-6]
        for j in group:
            used[j] = True
        m = len(group)
        zm = np.mean(z[group])
        if abs(zm.imag) <= 1e-12:
            out.append(Root(float(zm.real), None, m))
        else:
            for j in range(len(z)):
                if not used[j] and abs(z[j] - np.conj(zm)) < 1e-6:
                    used[j] = True
            out.append(Root(float(zm.real), float(abs(zm.imag)), m))
    return out


def _basis(rts: Sequence[Root], t: sym.Var) -> list[sym.Expr]:
    funcs = []
    for r in rts:
        for j in range(r.multiplicity):
            tj = sym.power(t, j)
            if r.imag is None:
                funcs.append(sym.mul(tj, sym.exp(sym.mul(sym.Const(r.real), t))))
            else:
                growth = sym.exp(sym.mul(sym.Const(r.real), t))
                arg = sym.mul(sym.Const(r.imag), t)
                funcs.append(sym.mul(tj, growth, sym.cos(arg)))
                funcs.append(sym.mul(tj, growth, sym.sin(arg)))
    return funcs


def expm_symbolic(B, var: str = "t") -> tuple[list[list[sym.Expr]], bool]:
    """Entries of exp(var * B) as expressions in ``var``; flag is True when exact."""
    B = to_fractions(B)
    n = len(B)
    if not is_square(B):
        raise ValueError("B must be square")
    if n == 0:
        return [], True
    t = sym.Var(var)
    rts = roots(charpoly(B))
    exact = all(r.exact for r in rts)
    basis = _basis(rts, t)
    if len(basis) != n:
        raise ArithmeticError("root multiplicities do not match the matrix order")
    # Wronskian at t = 0
    W = []
    derivs = list(basis)
    for _ in range(n):
        row = []
        for d in derivs:
            v = sym.evaluate_exact(d, {var: Fraction(0)}) if exact else None
            row.append(v if v is not None else sym.evaluate(d, [0.0], [var]))
        W.append(row)
        derivs = [sym.differentiate(d, var) for d in derivs]
    powers = [identity(n)]
    for _ in range(1, n):
        powers.append(matmul(powers[-1], B))
    if exact:
        C = solve_exact(W, identity(n))
    else:
        C = np.linalg.solve(np.array(W, dtype=float), np.eye(n)).tolist()
    out = []
    for r in range(n):
        row = []
        for c in range(n):
            terms = []
            for i, f in enumerate(basis):
                coef = sum((C[i][k] * powers[k][r][c] for k in range(n)), Fraction(0) if exact else 0.0)
                if not exact:
                    coef = float(coef)
                    if abs(coef) < 1e-13:
                        continue
                if coef != 0:
                    terms.append(sym.mul(sym.Const(coef), f))
            row.append(sym.add(*terms))
        out.append(row)
    return out, exact


def det_expr(M: Sequence[Sequence[sym.Expr]]) -> sym.Expr:
    """Symbolic determinant by Laplace expansion along the sparsest row."""
    n = len(M)
    if n == 0:
        return sym.ONE
    if n == 1:
        return M[0][0]
    if n <= 3:
        terms = []
        for perm in permutations(range(n)):
            factors = [M[i][perm[i]] for i in range(n)]
            if any(sym.is_zero(f) for f in factors):
                continue
            inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
            terms.append(sym.mul(sym.Const(-1 if inv % 2 else 1), *factors))
        return sym.add(*terms)
    row = min(range(n), key=lambda i: sum(not sym.is_zero(x) for x in M[i]))
    terms = []
    for j in range(n):
        if sym.is_zero(M[row][j]):
            continue
        minor = [[M[i][k] for k in range(n) if k != j] for i in range(n) if i != row]
        sign = -1 if (row + j) % 2 else 1
        terms.append(sym.mul(sym.Const(sign), M[row][j], det_expr(minor)))
    return sym.add(*terms)
