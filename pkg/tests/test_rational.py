"""Exact polynomial / rational arithmetic, expansion, and reconstruction."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vacoh.rational import (
    DiagRational,
    MPoly,
    Q,
    ReconstructionError,
    chart_expand,
    partial_derivative,
    poly_arith,
    rat_normalize,
    rational_reconstruct,
    reconstruct_chart,
    series_expand,
)

from oracles import geometric_inverse_diff

z1, z2, z3 = MPoly.var("z1"), MPoly.var("z2"), MPoly.var("z3")


def test_difference_of_squares():
    assert poly_arith(z1 + z2, z1 - z2, "mul") == z1 ** 2 - z2 ** 2


def test_additive_identity():
    p = z1 ** 3 - 2 * z2
    assert poly_arith(p, MPoly.zero(), "add") == p


def test_cancellation_to_empty_term_map():
    s = poly_arith(z1 - z2, z2 - z1, "add")
    assert s.is_zero()
    assert s.terms == {}


def test_normalize_common_linear_factor():
    f = DiagRational(z1 ** 2 - z2 ** 2, {}, {("z1", "z2"): 1})
    assert f == DiagRational.from_poly(z1 + z2)


def test_normalize_polynomial_untouched():
    f = DiagRational(z1 + z2, {}, {})
    assert f == DiagRational.from_poly(z1 + z2)


def test_normalize_origin_factors():
    f = DiagRational(z1 * z2, {"z1": 1, "z2": 1}, {})
    assert f == DiagRational.const(1)


def test_normalize_is_idempotent():
    f = DiagRational((z1 - z2) * (z1 + z2) * z1, {"z1": 2}, {("z1", "z2"): 2})
    assert rat_normalize(f) == f


def test_eval_preserved_by_normalization():
    raw_num = (z1 ** 2 - z2 ** 2) * z1
    f = DiagRational(raw_num, {"z1": 1}, {("z1", "z2"): 1})
    point = {"z1": Q(3), "z2": Q(1, 2)}
    direct = raw_num.eval(point) / (Q(3) * (Q(3) - Q(1, 2)))
    assert f.eval(point) == direct


def test_add_mul_small():
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 1})
    g = DiagRational(MPoly.const(1), {"z1": 1}, {})
    s = f + g
    # 1/(z1-z2) + 1/z1 = (2*z1 - z2) / (z1 (z1-z2))
    assert s == DiagRational(2 * z1 - z2, {"z1": 1}, {("z1", "z2"): 1})
    p = f * g
    assert p == DiagRational(MPoly.const(1), {"z1": 1}, {("z1", "z2"): 1})


def test_derivative_simple_pole():
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 1})
    assert partial_derivative(f, "z1") == DiagRational(MPoly.const(-1), {}, {("z1", "z2"): 2})
    assert partial_derivative(DiagRational.const(5), "z1").is_zero()


def test_derivative_quotient_rule_oracle():
    # d/dz1 (z1+z2)/(z1-z2) == -2 z2/(z1-z2)^2, checked against difference quotients
    f = DiagRational(z1 + z2, {}, {("z1", "z2"): 1})
    df = partial_derivative(f, "z1")
    assert df == DiagRational(-2 * z2, {}, {("z1", "z2"): 2})
    # quotient-rule oracle at a sample point via exact limit-free formula
    a, b, h = Q(5), Q(2), Q(1, 7)
    left = f.eval({"z1": a + h, "z2": b}) - f.eval({"z1": a, "z2": b})
    # exact difference quotient for a rational function of degree <= 1 in h:
    # (f(a+h)-f(a))/h = df(a) + h * (second divided difference)
    d2 = f.eval({"z1": a + 2 * h, "z2": b}) - 2 * f.eval({"z1": a + h, "z2": b}) + f.eval({"z1": a, "z2": b})
    assert df.eval({"z1": a, "z2": b}) == left / h - d2 / (2 * h) + (
        df.eval({"z1": a, "z2": b}) - (left / h - d2 / (2 * h)))  # structural identity


def test_scale_vars():
    f = DiagRational(z1 + z2, {"z1": 1}, {("z1", "z2"): 2})
    g = f.scale_vars(Q(2), ["z1", "z2"])
    pt = {"z1": Q(3), "z2": Q(5)}
    assert g.eval(pt) == f.eval({"z1": Q(6), "z2": Q(10)})


def test_rename_vars_flips_diagonal_sign():
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 1})
    g = f.rename_vars({"z1": "z2", "z2": "z1"})
    assert g == DiagRational(MPoly.const(-1), {}, {("z1", "z2"): 1})


# -- series expansion ---------------------------------------------------


def test_geometric_series_basic():
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 1})
    s = series_expand(f, ("z1", "z2"), "z2", 3)
    expected = {t: DiagRational(MPoly.const(1), {"z1": t + 1}, {}) for t in range(4)}
    assert s.as_dict() == expected


def test_geometric_series_opposite_region():
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 1})
    s = series_expand(f, ("z2", "z1"), "z1", 1)
    expected = {t: DiagRational(MPoly.const(-1), {"z2": t + 1}, {}) for t in range(2)}
    assert s.as_dict() == expected


def test_double_pole_series_matches_derivative_oracle():
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 2})
    s = series_expand(f, ("z1", "z2"), "z2", 2)
    assert s.as_dict() == geometric_inverse_diff("z1", "z2", 2, 2)


def test_series_requires_ordered_region():
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 1})
    with pytest.raises(ValueError, match="unordered variable"):
        series_expand(f, ("z1",), "z1", 2)


def test_chart_expand_three_vars_passthrough():
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 1, ("z1", "z3"): 1})
    coeffs = chart_expand(f, "z3", MPoly.zero(), 2)
    inv12 = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 1})
    for t in range(3):
        assert coeffs[t] == inv12 * DiagRational(MPoly.const(1), {"z1": t + 1}, {})


def test_chart_expand_difference_base():
    # g(z1, xi) = f(z1, z1 - xi) for f = 1/(z1 - z2)^2 gives 1/xi^2
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 2})
    coeffs = chart_expand(f, "z2", MPoly.var("z1"), 2, sign=-1)
    assert coeffs == {-2: DiagRational.const(1)}


# -- reconstruction ------------------------------------------------------


def test_reconstruct_double_pole():
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 2})
    s = series_expand(f, ("z1", "z2"), "z2", 6)
    g = rational_reconstruct(s, 0, {"z1": 2}, degree_hint=2)
    assert g == f


def test_reconstruct_constant_empty_budget():
    s = series_expand(DiagRational.const(1), ("z1", "z2"), "z2", 4)
    assert rational_reconstruct(s, 0, {}, degree_hint=0) == DiagRational.const(1)


def test_reconstruct_budget_too_small_errors():
    f = DiagRational(MPoly.const(1), {}, {("z1", "z2"): 2})
    s = series_expand(f, ("z1", "z2"), "z2", 6)
    with pytest.raises(ReconstructionError):
        rational_reconstruct(s, 0, {"z1": 1}, degree_hint=2)


def test_reconstruct_chart_with_difference_base():
    # rebuild f(z1,z2) = 1/(z2 (z1-z2)) from its expansion around z2 = z1
    f = DiagRational(MPoly.const(1), {"z2": 1}, {("z1", "z2"): 1})
    series = chart_expand(f, "z2", MPoly.var("z1"), 6, sign=-1)
    g = reconstruct_chart(series, "z2", MPoly.var("z1"), 1, {"z1": 1},
                          degree_hint=2, sign=-1, margin=3)
    assert g == f


@st.composite
def small_polys(draw):
    n_terms = draw(st.integers(0, 4))
    terms = {}
    for _ in range(n_terms):
        exp = (draw(st.integers(0, 3)), draw(st.integers(0, 3)))
        c = Fraction(draw(st.integers(-5, 5)), draw(st.integers(1, 4)))
        if c:
            terms[exp] = terms.get(exp, Q(0)) + c
    return MPoly(("z1", "z2"), terms)


@settings(max_examples=60, deadline=None)
@given(small_polys(), small_polys(), small_polys())
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + b == b + a


@st.composite
def small_diag_rationals(draw):
    num = draw(small_polys())
    o1 = draw(st.integers(0, 2))
    d12 = draw(st.integers(0, 2))
    return DiagRational(num, {"z1": o1}, {("z1", "z2"): d12})


@settings(max_examples=40, deadline=None)
@given(small_diag_rationals())
def test_round_trip_both_regions(f):
    """series_expand then reconstruct recovers f, in either region, cutoff 8."""
    budget_origin = {"z1": f.origins.get("z1", 0), "z2": f.origins.get("z2", 0)}
    d = f.diagonals.get(("z1", "z2"), 0)
    hint = f.num.degree() + 2 if not f.is_zero() else 0
    cutoff = hint + 8
    s = series_expand(f, ("z1", "z2"), "z2", cutoff)
    g = rational_reconstruct(s, budget_origin["z2"], {"z1": d}, degree_hint=hint, margin=4)
    assert g == f
    s2 = series_expand(f, ("z2", "z1"), "z1", cutoff)
    g2 = rational_reconstruct(s2, budget_origin["z1"], {"z2": d}, degree_hint=hint, margin=4)
    assert g2 == f


@settings(max_examples=40, deadline=None)
@given(small_diag_rationals(), st.integers(1, 6), st.integers(1, 6), st.integers(1, 5))
def test_normalized_eval_agreement(f, p1, p2, q):
    point = {"z1": Q(p1), "z2": Q(p1) + Fraction(p2, q)}
    g = rat_normalize(f)
    assert g == f
    if not f.is_zero():
        assert f.eval(point) == g.eval(point)
