from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from hypolie import fields as fl, group as grp, kolmogorov as kol, liouville as lv, operator as op, symbolic as sym
from hypolie.symbolic import BoxBump, Sampler, VarSet


def kolmogorov1():
    return kol.operator_of(kol.KolmogorovSpec([[1, 0], [0, 0]], [[0, 0], [1, 0]]))


def sympy_apply(L, text):
    xs = [sympy.Symbol(n) for n in L.vars]
    loc = {n: s for n, s in zip(L.vars, xs)}
    u = sympy.sympify(text, convert_xor=True, locals=loc)
    cv = lambda e: sympy.sympify(sym.to_str(e), convert_xor=True, locals=loc)
    d = L.dim
    Lu = sum(cv(L.A[i][j]) * sympy.diff(u, xs[i], xs[j]) for i in range(d) for j in range(d))
    Lu += sum(cv(L.b[j]) * sympy.diff(u, xs[j]) for j in range(d))
    psi = sum(cv(L.A[i][j]) * sympy.diff(u, xs[i]) * sympy.diff(u, xs[j]) for i in range(d) for j in range(d))
    return xs, Lu, psi


FUNCS = ["exp(x1 + x2 + 2*t)", "x1^2*x2 - t", "sin(x1)*cos(1/2*t) + x2^3", "exp(1/2*x1)*x2 + t^2"]


@pytest.mark.parametrize("L", [op.heat(2), kolmogorov1(), op.laplacian(3, ("x1", "x2", "t"))],
                         ids=["heat", "kolmogorov", "laplacian"])
@pytest.mark.parametrize("text", FUNCS)
def test_apply_and_psi_match_sympy(L, text):
    xs, Lu, psi = sympy_apply(L, text)
    u = sym.parse(text, L.vars)
    X = Sampler(n=12).points(L.dim)
    for mine, oracle in [(op.apply(L, u), Lu), (op.psi_A(L, u), psi)]:
        f = sympy.lambdify(xs, oracle, "numpy")
        want = np.broadcast_to(np.asarray(f(*X.T), float), (12,))
        assert np.allclose(sym.evaluate_many(mine, X, L.vars), want, rtol=1e-10, atol=1e-10)


def test_heat_counterexample_exact_zero():
    L = op.heat(2)
    u = sym.parse("exp(x1 + x2 + 2*t)", L.vars)
    assert sym.is_zero(op.apply(L, u))
    c = op.classify(L, u)
    assert c.kind == "harmonic" and c.exact_zero
    assert str(c) == "harmonic (on 64 sampled points)"


def test_printing_of_operators():
    assert str(op.heat(2)) == "dx1^2 + dx2^2 - dt"
    assert str(kolmogorov1()) == "dx1^2 + x1*dx2 - dt"


def test_make_operator_validation():
    V = VarSet.of("x", "y")
    with pytest.raises(op.OperatorError):
        op.make_operator([[1, "x"], [0, 1]], [0, 0], V)
    with pytest.raises(op.OperatorError):
        op.make_operator([[-1, 0], [0, 1]], [0, 0], V)
    with pytest.raises(op.OperatorError):
        op.make_operator([[1]], [0, 0], V)


@given(st.lists(st.sampled_from(["0", "1", "x1", "t", "x2 - t", "2"]), min_size=3, max_size=3),
       st.lists(st.sampled_from(["0", "1", "x1", "-1", "x1*x2"]), min_size=3, max_size=3),
       st.sampled_from([-1, 1]))
def test_decompose_reproduces_operator(coeffs, drift, sign):
    V = VarSet.of("x1", "x2", "t", time="t")
    X = fl.VectorField.parse(coeffs, V)
    Y = fl.VectorField.parse(drift, V)
    L = op.from_frame([X], Y, [sign])
    D = op.decompose(L)
    for u in op.function_bank(V):
        assert sym.equal_on_samples(D.apply(u), op.apply(L, u), V, atol=1e-9)


def test_from_frame_weights():
    H = grp.make_group("inverse_matrix_exponential", B=[[1, 1], [-1, 0]])
    T = fl.left_invariant_frame(H)[0]
    X1 = fl.VectorField.coordinate(H.vars, "x1")
    L = op.from_frame([X1], T, [-1], weights=[Fraction(1, 2)])
    assert str(L) == "1/2*dx1^2 - dt - (x1 + x2)*dx1 + x1*dx2"
    assert op.check_left_invariance(L, H) <= 1e-12


def test_left_invariance_positive_and_negative():
    G = grp.make_group("inverse_matrix_exponential", B=[[0, 0], [1, 0]])
    T, X1 = (f for f in fl.left_invariant_frame(G) if f.label in ("T", "dx1"))
    L2 = op.from_frame([X1], T, [-1])
    assert str(L2) == "dx1^2 - dt - x1*dx2"
    assert op.check_left_invariance(L2, G) <= 1e-12
    # the heat-type operator dx1^2 - dt is not invariant under this group law
    bad = op.from_frame([X1], fl.VectorField.coordinate(G.vars, "t"), [-1])
    assert op.check_left_invariance(bad, G) > 1.0


GADGETS = [("harmonic_pge1", 1.0), ("harmonic_pge1", 1.5), ("harmonic_pge1", 2.0),
           ("subharmonic", 1.0), ("subharmonic", 2.0)]


@pytest.mark.parametrize("kind,p", GADGETS)
def test_chain_rule_with_gadgets(kind, p):
    L = kolmogorov1()
    u = sym.parse("x1^2 + 2*t", L.vars)
    s = Sampler(n=32, low=-0.5, high=0.5)
    assert op.chain_rule_residual(L, u, lv.gadget(kind, p), s) <= 1e-6


def test_chain_rule_symbolic_route():
    L = op.heat(2)
    u = sym.parse("x1*x2 + t", L.vars)
    assert op.chain_rule_residual(L, u, sym.parse("s^3 - 2*s", ["s"])) <= 1e-9
    v = sym.parse("x1 - 2*x2 + t", L.vars)
    assert op.chain_rule_residual(L, v, sym.parse("exp(1/3*s) + s^3", ["s"])) <= 1e-9


def test_chain_rule_finite_difference_route():
    # exp(u/3) with u non-affine cannot be composed symbolically
    L = op.heat(2)
    u = sym.parse("x1*x2 + t", L.vars)
    F = sym.parse("exp(1/3*s) + s^3", ["s"])
    assert op.chain_rule_residual(L, u, F, Sampler(n=32, low=-1, high=1)) <= 1e-6


def test_chain_rule_detects_wrong_derivative():
    class Wrong:
        def F(self, t):
            return t ** 3

        def dF(self, t):
            return 3 * t ** 2

        def ddF(self, t):
            return 3 * t

    L = op.heat(1)
    u = sym.parse("x1 + t", L.vars)
    assert op.chain_rule_residual(L, u, Wrong(), Sampler(n=8, low=-1, high=1)) > 1e-2


def test_formal_adjoint_duality():
    L = kolmogorov1()
    u = sym.parse("sin(x1) + x2*t", L.vars)
    phi = BoxBump(sym.parse("1 + x1", L.vars), (0, 0, 0), (1, 1, 1), L.vars)
    assert op.duality_residual(L, u, phi) <= 1e-12


def test_constancy_conditions():
    L = kolmogorov1()
    assert all(op.constancy_conditions(L, sym.Const(3)).values())
    c = op.constancy_conditions(L, sym.parse("x1^2 + 2*t", L.vars))
    assert c == {"constant": False, "fields_vanish": False, "psi_and_drift_vanish": False,
                 "harmonic_and_psi_vanish": False}
    # x2 - ... : harmonic but with nonzero carre du champ would still fail (4)
    h = sym.parse("x1", L.vars)
    assert not op.constancy_conditions(L, h)["harmonic_and_psi_vanish"]


def test_nd_report():
    L = op.laplacian(2)
    assert op.check_nd(L, Sampler(n=4).points(2))
    zero = op.make_operator([[0, 0], [0, 0]], [1, 0], VarSet.of("x", "y"))
    r = op.nd_report(zero, Sampler(n=4).points(2))
    assert not r.holds and r.failing == (0, 1, 2, 3)


def test_drift_acting_on_time():
    L = kolmogorov1()
    assert op.apply(L, sym.Var("t")) == sym.Const(-1)
    # L(t x1) = -x1: the drift -dt hits t, and x1 dx2 sees no x2
    assert sym.equal_on_samples(op.apply(L, sym.parse("t*x1", L.vars)), sym.parse("-1*x1", L.vars), L.vars)
