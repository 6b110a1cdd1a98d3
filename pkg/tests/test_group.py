from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypolie import group as grp, symbolic as sym
from hypolie.symbolic import Sampler

B_SUITE = [
    [[0, 0], [1, 0]],                       # nilpotent
    [[0, 1], [-1, 0]],                      # trace zero, rotation
    [[1, 1], [-1, 0]],                      # trace one
    [[1, 0], [0, -1]],                      # trace zero, hyperbolic
    [[0, 0, 0], [1, 0, 0], [0, 1, 0]],      # nilpotent companion, order 3
    [[2, 1], [0, 2]],                       # trace four, Jordan block
]


def groups():
    out = [grp.make_group("abelian", n=n) for n in (1, 2, 3)]
    for B in B_SUITE:
        out.append(grp.make_group("matrix_exponential", B=B))
        out.append(grp.make_group("inverse_matrix_exponential", B=B))
    return out


@pytest.mark.parametrize("G", groups(), ids=lambda G: f"{G.family}-{G.dim}-{G.B}")
def test_axioms_and_right_invariance(G):
    chk = grp.check_group(G)
    assert chk.ok, chk
    w = grp.right_invariant_density(G)
    assert grp.right_invariance_residual(G, w) <= 1e-9


@pytest.mark.parametrize("B", B_SUITE)
def test_closed_form_densities(B):
    tr = sum(B[i][i] for i in range(len(B)))
    G = grp.make_group("matrix_exponential", B=B)
    H = grp.make_group("inverse_matrix_exponential", B=B)
    assert sym.equal_on_samples(grp.right_invariant_density(G).w, sym.Const(1), G.vars)
    want = sym.exp(sym.mul(sym.Const(-tr), sym.Var("t")))
    assert sym.equal_on_samples(grp.right_invariant_density(H).w, want, H.vars, rtol=1e-9)
    assert grp.is_unimodular(G) == (tr == 0)
    assert grp.is_unimodular(H) == (tr == 0)


def test_trace_one_density_prints_closed_form():
    H = grp.make_group("inverse_matrix_exponential", B=[[1, 1], [-1, 0]])
    assert str(grp.right_invariant_density(H)) == "exp(-1*t)"
    assert str(grp.left_invariant_density(H)) == "1"


@pytest.mark.parametrize("R", [1.0, 2.0, 3.0])
def test_haar_mass_closed_form(R):
    H = grp.make_group("inverse_matrix_exponential", B=[[1, 1], [-1, 0]])
    assert grp.haar_mass_partial(H, R) == pytest.approx(4 * R * R * (math.exp(R) - math.exp(-R)), rel=1e-9)


def test_translation_jacobian_matches_finite_differences():
    G = grp.make_group("inverse_matrix_exponential", B=[[1, 1], [-1, 0]])
    g = np.array([0.3, -0.7, 1.1])
    at = np.array([-0.2, 0.5, 0.4])
    h = 1e-6
    for side in ("left", "right"):
        J = grp.translation_jacobian(G, side, g, at)
        F = (lambda y: G.multiply(g[None], y[None])[0]) if side == "left" else \
            (lambda y: G.multiply(y[None], g[None])[0])
        fd = np.column_stack([(F(at + h * e) - F(at - h * e)) / (2 * h) for e in np.eye(3)])
        assert np.allclose(J, fd, atol=1e-8)


@given(st.lists(st.floats(-1.5, 1.5), min_size=6, max_size=6))
def test_left_translate_jets_match_finite_differences(coords):
    G = grp.make_group("inverse_matrix_exponential", B=[[0, 0], [1, 0]])
    u = sym.parse("sin(x1) * exp(1/2*x2) + t*x1^2", G.vars)
    g = np.array(coords[:3])
    x = np.array(coords[3:])[None]
    val, grad, hess = grp.left_translate_jets(G, u, g, x)
    f = lambda y: sym.evaluate_many(u, G.multiply(g[None], y), G.vars)
    h = 1e-4
    E = np.eye(3)
    fd_grad = np.array([(f(x + h * e) - f(x - h * e))[0] / (2 * h) for e in E])
    assert val[0] == pytest.approx(f(x)[0], rel=1e-12, abs=1e-12)
    assert np.allclose(grad[0], fd_grad, rtol=1e-6, atol=1e-6)
    fd_hess = np.array([[(f(x + h * a + h * b) - f(x + h * a - h * b) - f(x - h * a + h * b)
                          + f(x - h * a - h * b))[0] / (4 * h * h) for b in E] for a in E])
    assert np.allclose(hess[0], fd_hess, rtol=1e-4, atol=1e-4)


def test_custom_group_and_newton_inverse():
    G = grp.make_group("custom", product=["x + x_r", "y + y_r + x*x_r"], identity=[0, 0], names=["x", "y"])
    X = Sampler(n=8).points(2)
    inv = G.invert(X)
    assert np.allclose(G.multiply(X, inv), 0, atol=1e-10)
    assert grp.check_group(G).inverse_method == "newton"
    assert grp.is_unimodular(G)


def test_product_with_time():
    inner = grp.make_group("inverse_matrix_exponential", B=[[0, 0], [1, 0]])
    G = grp.make_group("product_with_time", inner=inner)
    assert G.dim == 4 and G.vars.time == G.vars.names[-1]
    assert grp.check_group(G).ok


def test_rejects_bad_family_inputs():
    with pytest.raises(grp.GroupError):
        grp.make_group("matrix_exponential")
    with pytest.raises(grp.GroupError):
        grp.make_group("nonsense", n=2)
    with pytest.raises(grp.GroupError):
        grp.make_group("custom", product=["x + x_r", "y + y_r + x*y_r"], identity=[0, 0], names=["x", "y"])
