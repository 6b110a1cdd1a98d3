from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypolie import group as grp, meanvalue as mv, operator as op, symbolic as sym
from hypolie.symbolic import BoxBump, Sampler


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("r", [0.25, 0.5, 1.5])
def test_measure_masses(n, r):
    mp = mv.laplacian_ball_measures(n, r)
    assert mp.mu_mass == pytest.approx(1.0, abs=1e-12)
    # closed form: int_B G_r(0, y) dy = r^2 / (2n)
    assert mp.nu_mass == pytest.approx(r * r / (2 * n), rel=1e-10)


def test_sphere_area():
    assert mv.sphere_area(2) == pytest.approx(2 * np.pi)
    assert mv.sphere_area(3) == pytest.approx(4 * np.pi)


HARMONIC = {
    1: ["1", "x1", "3*x1 - 2"],
    2: ["x1*x2", "x1^2 - x2^2", "x1^3 - 3*x1*x2^2", "3*x1^2*x2 - x2^3", "x1 + 2*x2"],
}
OTHER = ["x1^2", "exp(x1)"]


@pytest.mark.parametrize("n", [1, 2])
def test_representation_formula(n):
    G = grp.make_group("abelian", n=n)
    L = op.laplacian(n, G.vars.names)
    mp = mv.laplacian_ball_measures(n, 0.5)
    X = Sampler(n=6, low=-1, high=1).points(n)
    for text in HARMONIC[n] + OTHER:
        u = sym.parse(text, G.vars)
        assert mv.representation_residual(u, L, G, mp, X) <= 1e-10, text


@given(st.floats(0.1, 2.0), st.floats(-2, 2), st.floats(-2, 2))
def test_mean_of_harmonic_equals_center_value(r, a, b):
    G = grp.make_group("abelian", n=2)
    mp = mv.laplacian_ball_measures(2, r)
    u = sym.parse("x1^3 - 3*x1*x2^2 + x1*x2", G.vars)
    assert mv.M_op(u, G, mp, [a, b]) == pytest.approx(sym.evaluate(u, [a, b], G.vars), rel=1e-10, abs=1e-10)


def test_representation_rejects_other_operators():
    G = grp.make_group("inverse_matrix_exponential", B=[[0, 0], [1, 0]])
    mp = mv.laplacian_ball_measures(3, 0.5)
    with pytest.raises(mv.MeanValueError):
        mv.representation_residual(sym.Var("x1"), op.heat(2), G, mp, np.zeros((1, 3)))


def test_mass_identity_abelian_line():
    G = grp.make_group("abelian", n=1)
    mp = mv.laplacian_ball_measures(1, 0.25)
    u = BoxBump(sym.Const(1), (0,), (1,), G.vars)
    res, total = mv.mass_identity_residual(u, G, mp, 3.0, (u.lo, u.hi))
    assert res <= 1e-12 and total == pytest.approx(32 / 35, rel=1e-12)


def test_mass_identity_polarized_heisenberg():
    G = grp.make_group("inverse_matrix_exponential", B=[[0, 0], [1, 0]])
    mp = mv.laplacian_ball_measures(3, 0.25, sphere_resolution=16)
    assert mp.mu_mass == pytest.approx(1.0, abs=1e-12)
    u = BoxBump(sym.Const(1), (Fraction(1, 4), 0, Fraction(-1, 4)), (1, 1, 1), G.vars, k=2)
    res, total = mv.mass_identity_residual(u, G, mp, 2.0, (u.lo, u.hi), order=8)
    assert total > 0.1
    assert res <= 1e-5


def test_mass_identity_requires_room_in_the_box():
    G = grp.make_group("abelian", n=1)
    mp = mv.laplacian_ball_measures(1, 0.5)
    u = BoxBump(sym.Const(1), (0,), (1,), G.vars)
    with pytest.raises(mv.MeanValueError):
        mv.mass_identity_residual(u, G, mp, 1.2, (u.lo, u.hi))
