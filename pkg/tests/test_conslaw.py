import random

import pytest
from hypothesis import given, settings, strategies as st

from jetkt.cdiff import CDiffOp, cdiff_adjoint, cdiff_apply
from jetkt.conslaw import (
    ConsLawError,
    check_cosymmetry,
    compare_routes,
    cosymmetry_solve,
    current_divergence_check,
    current_to_cosymmetry,
    make_current,
    prop41_residual,
    prop42_certificate,
    round_trip,
    theta_membership,
    verify_certificate,
)
from jetkt.expr import Q
from jetkt.jetcalc import HorizontalForm, Section, horizontal_d, total_derivative
from jetkt.koszultate import TruncationSpec

from conftest import burgers_system, even_symbols, heat_system, kdv_system, random_operator, random_poly, xt_context

KDV = kdv_system()
CTX = KDV.ctx
S = CTX.sigma
X, T, U = CTX.x(0), CTX.x(1), CTX.u()
UX, UXX = CTX.u(0, S(x=1)), CTX.u(0, S(x=2))
F = KDV.F[0]
BOUNDS = TruncationSpec(1, 2, 2, 0)


def sec(*comps):
    return Section(list(comps), "P1_hat")


@pytest.fixture(scope="module")
def kdv_basis():
    return cosymmetry_solve(KDV, BOUNDS)


def test_kdv_basis(kdv_basis):
    assert [c.render() for c in kdv_basis] == [["1"], ["u[1]"], ["u[1]_{x^2} + 1/2*u[1]^2"]]
    for c in kdv_basis:
        assert check_cosymmetry(KDV, c.psi).is_zero()
        assert prop41_residual(KDV, c.psi).is_zero()


def test_heat_and_burgers_bases():
    heat = cosymmetry_solve(heat_system(), TruncationSpec(1, 0, 0, 2))
    assert [c.render() for c in heat] == [["1"], ["x"], ["-2*t + x^2"]]
    burgers = cosymmetry_solve(burgers_system(), BOUNDS)
    assert [c.render() for c in burgers] == [["1"]]


def test_negative_bounds_rejected():
    with pytest.raises(ValueError):
        TruncationSpec(1, -1, 0, 0)


def test_dimension_monotone_in_bounds():
    dims = [len(cosymmetry_solve(KDV, TruncationSpec(1, j, d, 0))) for j, d in [(0, 1), (1, 1), (2, 1), (2, 2)]]
    assert dims == sorted(dims)
    heat = heat_system()
    dims = [len(cosymmetry_solve(heat, TruncationSpec(1, 0, 0, b))) for b in range(4)]
    assert dims == sorted(dims) and dims[-1] >= 3


def test_prop41_examples():
    assert prop41_residual(KDV, sec(CTX.const(1))).is_zero()
    assert prop41_residual(KDV, sec(U)).is_zero()
    assert prop41_residual(KDV, sec(total_derivative(F, 0))).is_zero()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9))
def test_prop41_invariant_under_theta(seed):
    rnd = random.Random(seed)
    op = random_operator(rnd, CTX, 1, 1, 2, even_symbols(CTX, 1))
    box = op - cdiff_adjoint(op)
    psi = sec(random_poly(rnd, CTX, even_symbols(CTX, 2), terms=2, max_degree=2))
    shifted = psi + cdiff_apply(box, [F])
    assert prop41_residual(KDV, shifted) == prop41_residual(KDV, psi)


def test_theta_examples():
    v = theta_membership(KDV, sec(total_derivative(F, 0)), 1)
    assert v.member and v.witness.render() == [["D_{x}"]]
    one = theta_membership(KDV, sec(CTX.const(1)), 3)
    assert not one.member and one.certified_nonmember
    zero = theta_membership(KDV, sec(CTX.const(0)), 0)
    assert zero.member and zero.witness.is_zero()


def test_prop42_examples(kdv_basis):
    for c in kdv_basis:
        v = prop42_certificate(KDV, c, 2)
        assert v.certified and verify_certificate(KDV, c, v)
    v = prop42_certificate(KDV, sec(U), 2)
    assert v.Delta.render() == [["-1"]]
    assert v.nabla.is_zero()
    with pytest.raises(ConsLawError):
        prop42_certificate(KDV, sec(UX), 2)


def test_current_examples():
    om = make_current(KDV, [-(U * U * Q(1, 2) + UXX), U])
    ok, lam = current_divergence_check(KDV, om)
    assert ok and lam.render() == [["1"]]
    assert current_to_cosymmetry(KDV, om).render() == ["1"]
    flux = [-(U * U * U * Q(2, 3) + U * UXX * 2 - UX * UX), U * U]
    om = make_current(KDV, flux)
    ok, lam = current_divergence_check(KDV, om)
    assert ok
    assert horizontal_d(om).top_coefficient() == U * F * 2
    assert current_to_cosymmetry(KDV, om).render() == ["2*u[1]"]


def test_exact_current_maps_to_zero():
    eta = HorizontalForm(CTX, 0, {(): U * UX + X * U})
    om = horizontal_d(eta)
    assert horizontal_d(om).is_zero()
    ok, lam = current_divergence_check(KDV, om)
    assert ok and lam.is_zero()
    assert current_to_cosymmetry(KDV, om).psi.is_zero()


def test_non_conserved_current_rejected():
    om = make_current(KDV, [U, U])
    assert not current_divergence_check(KDV, om)[0]
    with pytest.raises(ConsLawError):
        current_to_cosymmetry(KDV, om)


def test_round_trip(kdv_basis):
    for c in kdv_basis:
        rt = round_trip(KDV, c)
        assert rt["status"] in ("ok", "skipped")
    assert [round_trip(KDV, c)["status"] for c in kdv_basis] == ["ok", "ok", "ok"]


def test_compare_routes_kdv():
    rep = compare_routes(KDV, BOUNDS, 2)
    d = rep.to_dict()
    assert d["basis_dimension"] == 3 and d["nontrivial_route41"] == 3 and d["nontrivial_route42"] == 3
    first, constructed = rep.probes
    assert first["route42_trivial"] and [v.member for v in first["route41"]] == [False, True, True]
    assert constructed["route42_trivial"]
    assert [v.member for v in constructed["route41"]][:2] == [False, True]


def test_compare_rejects_compat():
    ctx = xt_context()
    with pytest.raises(ConsLawError):
        compare_routes(KDV, BOUNDS, 1, compat_ops=[CDiffOp.derivative(ctx, S(x=1))])
