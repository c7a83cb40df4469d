import random

import pytest
from hypothesis import given, settings, strategies as st

from jetkt.cdiff import cdiff_adjoint, cdiff_apply, is_selfadjoint
from jetkt.expr import DiffPoly, JetContext, Q, multi_indices
from jetkt.jetcalc import (
    EquationSystem,
    HorizontalForm,
    NonConfluentError,
    Section,
    euler,
    evolutionary_apply,
    horizontal_d,
    ideal_decompose,
    linearize,
    reduce_mod_equation,
    total_derivative,
    total_derivative_sigma,
)

from conftest import even_symbols, heat_system, kdv_system, random_operator, random_poly, xt_context

CTX = xt_context()
S = CTX.sigma
X, U = CTX.x(0), CTX.u()
UX, UXX, UXXX = CTX.u(0, S(x=1)), CTX.u(0, S(x=2)), CTX.u(0, S(x=3))
UT = CTX.u(0, S(t=1))
SYMS = even_symbols(CTX, 2)


def sample(seed, terms=3, degree=3):
    return random_poly(random.Random(seed), CTX, SYMS, terms=terms, max_degree=degree)


# ------------------------------------------------------------------ examples


def test_total_derivative_examples():
    assert total_derivative(X, 0) == CTX.const(1)
    assert total_derivative(U * UX, 0) == UX * UX + U * UXX
    c = JetContext(("x", "t"), ("u",), (1,))
    assert total_derivative(c.c(1), 0) == c.c(1, 0, c.sigma(x=1))
    assert total_derivative(c.c(1), 0).parity == 1


def test_total_derivative_sigma_examples():
    assert total_derivative_sigma(U, S(x=2)) == UXX
    assert total_derivative_sigma(U, S(x=1, t=1)) == total_derivative(total_derivative(U, 1), 0)
    f = U * UX + X
    assert total_derivative_sigma(f, S()) == f


def test_linearize_examples():
    assert linearize(UXX).render() == [["D_{x^2}"]]
    assert linearize(U * UX).render() == [["u[1]_{x} + u[1]*D_{x}"]]
    kdv = kdv_system()
    assert linearize(kdv.F).render() == [["-u[1]_{x} + D_{t} - u[1]*D_{x} - D_{x^3}"]]


def test_euler_examples():
    assert euler(UX * UX * Q(1, 2))[0] == -UXX
    assert euler(total_derivative(U * UXX, 0))[0].is_zero()
    assert euler(U * U * U * Q(1, 6))[0] == U * U * Q(1, 2)


def test_evolutionary_examples():
    phi = sample(1)
    assert evolutionary_apply(Section([phi]), UX) == total_derivative(phi, 0)
    assert evolutionary_apply(Section([UX]), U * UX) == UX * UX + U * UXX
    assert evolutionary_apply(Section([phi]), X * X).is_zero()


def test_horizontal_d_examples():
    w = HorizontalForm(CTX, 1, {(0,): U})
    assert horizontal_d(w).components == {(0, 1): -UT}
    f = HorizontalForm(CTX, 0, {(): X * UX})
    d = horizontal_d(f)
    assert d.components[(0,)] == UX + X * UXX
    assert d.components[(1,)] == X * CTX.u(0, S(x=1, t=1))
    assert horizontal_d(horizontal_d(HorizontalForm(CTX, 0, {(): U * UX}))).is_zero()


def test_current_form_round_trip():
    flux = [U * U, -UXX]
    w = HorizontalForm.from_current(CTX, flux)
    assert w.current() == flux
    assert horizontal_d(w).top_coefficient() == total_derivative(U * U, 0) - total_derivative(UXX, 1)


def test_reduce_examples():
    kdv = kdv_system()
    assert kdv.reduce(UT) == U * UX + UXXX
    assert kdv.reduce(CTX.u(0, S(x=1, t=1))) == UX * UX + U * UXX + CTX.u(0, S(x=4))
    heat = heat_system()
    assert heat.reduce(CTX.u(0, S(t=2))) == CTX.u(0, S(x=4))


def test_ideal_decompose_examples():
    kdv = kdv_system()
    lam, r = ideal_decompose(kdv.F[0], kdv)
    assert lam.render() == [["1"]]
    assert r.is_zero()
    lam, r = ideal_decompose(CTX.u(0, S(x=1, t=1)), kdv)
    assert lam.render() == [["D_{x}"]]
    assert r == UX * UX + U * UXX + CTX.u(0, S(x=4))
    lam, r = ideal_decompose(U * UXX, kdv)
    assert lam.is_zero() and r == U * UXX


def test_non_confluent_system_rejected():
    c = JetContext(("x", "y"), ("u",))
    s = c.sigma
    with pytest.raises(NonConfluentError):
        EquationSystem(c, [(c.jet(0, s(x=1)), c.u()), (c.jet(0, s(y=1)), c.x(0) * c.u())])


def test_rhs_with_principal_symbol_rejected():
    with pytest.raises(ValueError):
        EquationSystem(CTX, [(CTX.jet(0, S(t=1)), CTX.u(0, S(x=1, t=1)))])


# ---------------------------------------------------------------- properties


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_total_derivatives_commute(seed):
    f = sample(seed)
    assert total_derivative(total_derivative(f, 0), 1) == total_derivative(total_derivative(f, 1), 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_linearization_product_rule(seed):
    f, g = sample(seed), sample(seed + 1)
    lhs = linearize(f * g)
    rhs = linearize(g).left_multiply(f)
    rhs_b = linearize(f).left_multiply(g)
    assert cdiff_apply(lhs, [U * X + UXX]) == cdiff_apply(rhs, [U * X + UXX]) + cdiff_apply(rhs_b, [U * X + UXX])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_evolutionary_commutes_with_total_derivatives(seed):
    f, phi = sample(seed), Section([sample(seed + 7, terms=2)])
    for i in range(2):
        assert evolutionary_apply(phi, total_derivative(f, i)) == total_derivative(evolutionary_apply(phi, f), i)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_euler_kills_divergences(seed):
    g = sample(seed)
    for i in range(2):
        assert euler(total_derivative(g, i)).is_zero()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_helmholtz_selfadjoint(seed):
    f = sample(seed, terms=3, degree=3)
    assert is_selfadjoint(linearize(euler(f)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_stokes_identity(seed):
    f = sample(seed, terms=3, degree=3)
    chi = Section([sample(seed + 3, terms=2, degree=2)])
    phi = euler(f)
    lhs = euler(evolutionary_apply(chi, f))
    rhs = cdiff_apply(linearize(phi), chi) + cdiff_apply(cdiff_adjoint(linearize(chi)), phi)
    assert lhs == rhs


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**9))
def test_square_of_ideal_has_vanishing_linearization(seed):
    rnd = random.Random(seed)
    kdv = kdv_system()
    syms = even_symbols(CTX, 1)
    d1 = random_operator(rnd, CTX, 1, 1, 1, syms)
    d2 = random_operator(rnd, CTX, 1, 1, 1, syms)
    f = cdiff_apply(d1, kdv.F)[0] * cdiff_apply(d2, kdv.F)[0]
    lf = linearize(f)
    for ent in lf.entries.values():
        for coef in ent.values():
            assert kdv.reduce(coef).is_zero()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_normal_form_is_homomorphism(seed):
    kdv = kdv_system()
    f, g = sample(seed, degree=2), sample(seed + 1, degree=2)
    assert kdv.reduce(f * g) == kdv.reduce(kdv.reduce(f) * kdv.reduce(g))
    assert reduce_mod_equation(Section([f]), kdv)[0] == kdv.reduce(f)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_ideal_decompose_reconstructs(seed):
    kdv = kdv_system()
    f = sample(seed, degree=2)
    lam, r = ideal_decompose(f, kdv)
    assert cdiff_apply(lam, kdv.F)[0] + r == f
    assert not any(kdv.is_principal(s) for s in r.symbols())


def test_multi_index_enumeration():
    assert len(multi_indices(2, 2)) == 6
    assert DiffPoly(CTX).is_zero()
