from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypolie import fields as fl, group as grp, symbolic as sym
from hypolie.fields import VectorField
from hypolie.symbolic import VarSet

V = VarSet.of("t", "x1", "x2", time="t")


def poly_fields():
    coef = st.sampled_from(["0", "1", "x1", "t", "x2^2", "t*x1", "-2*x2 + 1"])
    return st.lists(coef, min_size=3, max_size=3).map(lambda c: VectorField.parse(c, V))


@given(poly_fields(), poly_fields())
def test_bracket_antisymmetry_and_action(X, Y):
    assert fl.field_residual(fl.lie_bracket(X, Y), fl.lie_bracket(Y, X).scaled(-1)) <= 1e-12
    u = sym.parse("exp(x1 - t) + x2^3", V)
    assert fl.commutator_residual(X, Y, u) <= 1e-9


@given(poly_fields(), poly_fields(), poly_fields())
def test_jacobi_identity(X, Y, Z):
    assert fl.jacobi_residual(X, Y, Z) <= 1e-9


def heisenberg():
    return grp.make_group("inverse_matrix_exponential", B=[[0, 0], [1, 0]])


def companion():
    return grp.make_group("matrix_exponential", B=[[0, 0, 0], [1, 0, 0], [0, 1, 0]])


@pytest.mark.parametrize("G", [heisenberg(), companion(),
                               grp.make_group("inverse_matrix_exponential", B=[[1, 1], [-1, 0]])])
def test_frame_is_left_invariant(G):
    u = sym.parse(" + ".join(f"sin({v})" for v in G.vars) + f" + {G.vars[1]}^2*{G.vars[0]}", G.vars)
    for X in fl.left_invariant_frame(G):
        assert fl.left_invariance_residual(X, G, u) <= 1e-10


def test_non_invariant_field_detected():
    G = heisenberg()
    X = VectorField.parse(["0", "t", "0"], G.vars)
    u = sym.parse("x1 + x2 + t", G.vars)
    assert fl.left_invariance_residual(X, G, u) > 1e-3


def test_heisenberg_certificate():
    G = heisenberg()
    frame = {f.label: f for f in fl.left_invariant_frame(G)}
    cert = fl.hormander_rank([frame["T"], frame["dx1"]], [0, 0, 0])
    assert (cert.achieved_rank, cert.depth, cert.full) == (3, 1, True)
    assert cert.witnesses[-1] == "[T,dx1]"
    assert cert.summary(3) == "Hörmander condition: verified up to depth 1"


def test_kolmogorov_certificate():
    W = VarSet.of("x1", "x2", "t", time="t")
    X1 = VectorField.coordinate(W, "x1")
    X0 = VectorField.parse(["0", "x1", "-1"], W, "X0")
    cert = fl.hormander_rank([X1, X0], [0, 0, 0])
    assert (cert.achieved_rank, cert.depth) == (3, 1)


def test_companion_frame_brute_force_table():
    G = companion()
    Dt, X1 = fl.left_invariant_frame(G)[:2]
    # brute-force oracle: all left-normed brackets up to depth 2 evaluated at the origin
    words = {"Dt": Dt, "X1": X1}
    layer = dict(words)
    words_all = dict(words)
    for _ in range(2):
        layer = {f"[{a},{b}]": fl.lie_bracket(words[a], layer[b]) for a in words for b in layer}
        words_all.update(layer)
    M = np.array([f.evaluate(np.zeros((1, 4)))[0] for f in words_all.values()])
    assert np.linalg.matrix_rank(M) == 4
    cert = fl.hormander_rank([Dt, X1], [0, 0, 0, 0])
    assert cert.full and cert.depth <= 2


def test_certificate_reports_failure():
    W = VarSet.of("x", "y")
    cert = fl.hormander_rank([VectorField.coordinate(W, "x")], [0, 0], max_depth=3)
    assert not cert.full
    assert cert.summary(3) == "Hörmander condition: failed up to depth 3"
