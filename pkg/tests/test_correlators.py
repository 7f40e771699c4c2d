"""Matrix elements against the Wick oracle; duality; E-operator algebra."""

import itertools

from fractions import Fraction

import pytest

from vacoh.fock import (
    GEN_A,
    OMEGA,
    SIGN,
    PARITY,
    VACUUM,
    FockVector,
    Q,
    virasoro,
)
from vacoh.pairing import ModuleTag, paired
from vacoh.correlators import (
    CorrelationSpec,
    PoleBudget,
    correlate,
    correlate_fused,
    correlate_vectors,
    default_budget,
    duality_check,
)
from vacoh._eops import (
    PrefixableMap,
    e_compose,
    grouped_partial_sum,
    projected_module_sum,
    transversality_test,
)
from vacoh.rational import DiagRational, MPoly, ReconstructionError

from oracles import wick_correlator, all_pairings

A2 = FockVector.monomial((2,))      # a(-2)|0>
A11 = FockVector.monomial((1, 1))   # a(-1)^2|0>


def test_two_point_function():
    f = correlate_vectors(VACUUM, [(GEN_A, "z1"), (GEN_A, "z2")], VACUUM)
    assert f == DiagRational(MPoly.const(1), {}, {("z1", "z2"): 2})


def test_vacuum_insertion_weight_mismatch():
    f = correlate_vectors(VACUUM, [(VACUUM, "z1"), (GEN_A, "z2")], VACUUM)
    assert f.is_zero()


def test_four_point_matching_sum():
    variables = ["z1", "z2", "z3", "z4"]
    f = correlate_vectors(VACUUM, [(GEN_A, v) for v in variables], VACUUM)
    expected = DiagRational.zero()
    for pairing_ in all_pairings(variables):
        term = DiagRational.const(1)
        for a, b in pairing_:
            term = term * DiagRational(MPoly.const(1), {}, {tuple(sorted((a, b))): 2})
        expected = expected + term
    assert f == expected


def test_omega_omega_two_point():
    f = correlate_vectors(VACUUM, [(OMEGA, "z1"), (OMEGA, "z2")], VACUUM)
    assert f == DiagRational(MPoly.const(Fraction(1, 2)), {}, {("z1", "z2"): 4})


@pytest.mark.parametrize("probe,ins,term", [
    ((), [((1,), "z1"), ((1,), "z2")], ()),
    ((1,), [((1,), "z1"), ((2,), "z2")], (1,)),
    ((1,), [((2,), "z1"), ((1, 1), "z2")], (2,)),
    ((2, 1), [((1,), "z1"), ((1,), "z2"), ((1,), "z3")], ()),
    ((1, 1), [((2,), "z1"), ((1,), "z2")], (1,)),
    ((), [((1, 1), "z1"), ((1, 1), "z2")], ()),
    ((3,), [((1,), "z1"), ((2,), "z2")], ()),
])
def test_engine_matches_wick_oracle(probe, ins, term):
    for lam in (Q(1), Q(2)):
        got = correlate_vectors(FockVector.monomial(probe),
                                [(FockVector.monomial(p), v) for p, v in ins],
                                FockVector.monomial(term), lam)
        want = wick_correlator(probe, ins, term, lam)
        assert got == want


def test_twisted_terminal_matches_oracle():
    spec = CorrelationSpec(paired(GEN_A), ((GEN_A, "z1"), (A2, "z2")),
                           paired(GEN_A, ModuleTag(0, SIGN)))
    got = correlate(spec)
    want = wick_correlator((1,), [((1,), "z1"), ((2,), "z2")], (1,), twist="sign")
    assert got == want


def test_region_independence():
    # all admissible elimination orders rebuild one DiagRational
    ins = [(GEN_A, "z1"), (A2, "z2"), (GEN_A, "z3")]
    reference = correlate_vectors(GEN_A, ins, GEN_A)
    for perm in itertools.permutations(["z1", "z2", "z3"]):
        f = correlate_vectors(GEN_A, ins, GEN_A, region=perm)
        assert f == reference


def test_permutation_of_insertions():
    # exchanging two insertions (with their variables) leaves the function fixed
    f = correlate_vectors(VACUUM, [(GEN_A, "z1"), (A2, "z2")], A2)
    g = correlate_vectors(VACUUM, [(A2, "z2"), (GEN_A, "z1")], A2)
    assert f == g


def test_budget_violation_detected():
    spec = CorrelationSpec(paired(VACUUM), ((GEN_A, "z1"), (GEN_A, "z2")),
                           paired(VACUUM))
    tight = PoleBudget.from_maps({}, {("z1", "z2"): 1})
    with pytest.raises(ReconstructionError):
        correlate(spec, budget=tight)
    ok_budget = default_budget(spec.insertions, 0)
    assert correlate(spec, budget=ok_budget) == correlate(spec)


def test_l_minus_one_derivative_at_matrix_element_level():
    # d/dz_i F = F with L(-1)v_i at slot i
    ins = [(GEN_A, "z1"), (A2, "z2")]
    for probe, term in [(VACUUM, VACUUM), (GEN_A, GEN_A), (A11, VACUUM)]:
        f = correlate_vectors(probe, ins, term)
        for i, var in enumerate(["z1", "z2"]):
            modified = list(ins)
            modified[i] = (virasoro(-1, ins[i][0]), var)
            assert f.derivative(var) == correlate_vectors(probe, modified, term)


def test_sum_rule_for_derivatives():
    # sum_i d/dz_i F = <L(1)-moved probe, ...> for lambda = 1:
    # <w', L(-1) X> = -<L(1) w', X>
    ins = [(GEN_A, "z1"), (A2, "z2")]
    for probe, term in [(A11, GEN_A), (FockVector.monomial((2, 1)), VACUUM)]:
        f = correlate_vectors(probe, ins, term)
        total = f.derivative("z1") + f.derivative("z2")
        moved = correlate_vectors(virasoro(1, probe), ins, term) * Q(-1)
        # L(-1) acting on the terminal completes the product rule
        moved = moved - correlate_vectors(probe, ins, virasoro(-1, term))
        assert total == moved


def test_l0_conjugation_scaling():
    # F(a z) * a^{sum wt} = a^{wt probe - wt term} F(z) for homogeneous data
    a = Q(2)
    ins = [(GEN_A, "z1"), (A2, "z2")]
    for probe, term in [(VACUUM, GEN_A), (A11, GEN_A)]:
        f = correlate_vectors(probe, ins, term)
        if f.is_zero():
            continue
        lhs = f.scale_vars(a, ["z1", "z2"]) * a ** (1 + 2)
        rhs = f * a ** (probe.weight() - term.weight())
        assert lhs == rhs


# -- duality ------------------------------------------------------------------


DUALITY_VECTORS = [VACUUM, GEN_A, A2, OMEGA]


def test_duality_pairs_on_vacuum():
    ok, wit = duality_check(GEN_A, "z1", GEN_A, "z2", paired(VACUUM), paired(VACUUM))
    assert ok and wit["product"] == DiagRational(MPoly.const(1), {}, {("z1", "z2"): 2})


def test_duality_trivial_insertion():
    ok, _ = duality_check(VACUUM, "z1", GEN_A, "z2", paired(GEN_A), paired(GEN_A))
    assert ok


def test_duality_mixed_weights():
    ok, _ = duality_check(GEN_A, "z1", A2, "z2", paired(GEN_A), paired(A11))
    assert ok


def test_iterate_chart_standalone():
    # <vac, Y(Y(a, z1-z2) a, z2) vac> rebuilds 1/(z1-z2)^2
    f = correlate_fused(VACUUM, ((GEN_A, "z2"),), 0, GEN_A, "z1", VACUUM)
    assert f == DiagRational(MPoly.const(1), {}, {("z1", "z2"): 2})


# -- E-operator algebra ----------------------------------------------------------


def phi_gen(terminal, arity, twist=None):
    from vacoh.fock import Automorphism
    tag = ModuleTag(0, Automorphism(twist)) if twist else ModuleTag(0)
    return PrefixableMap(paired(terminal, tag), arity)


def test_e_module_composition_is_additive():
    # E^(p)_W . (E^(q)_W . phi) = E^(p+q)_W . phi on a sample map
    phi = phi_gen(GEN_A, 1)
    inner = e_compose("module", 1, phi)
    outer_inputs = ((GEN_A, "y1"), (A2, "y2"), (GEN_A, "z1"))
    probe = paired(FockVector.monomial((2, 1)))
    once = e_compose("module", 2, phi)(outer_inputs, probe)

    # e_module composes by prefix threading; build the nested version through
    # a wrapper that re-splits the prefix to exercise a second code path
    def nested(inputs, probe):
        first = inputs[:1]
        rest = inputs[1:]
        return phi.evaluate(rest[1:], probe, prefix=first + rest[:1])
    assert nested(outer_inputs, probe) == once


def test_e_module_identity_unit_split():
    # all group sizes one with sites at the variables themselves reduces to
    # the plain evaluation: E_{V;1} with unit splits is the identity
    phi = phi_gen(VACUUM, 2)
    inputs = ((GEN_A, "z1"), (GEN_A, "z2"))
    probe = paired(VACUUM)
    direct = phi.evaluate(inputs, probe)
    grouped = e_compose("groups", (1, 1), phi, ("s1", "s2"))
    partial = grouped(inputs, probe, 6)
    # unit groups around sites re-expand the same function; compare after
    # substituting the sites back: s_i -> z_i means zero shift
    collapsed = partial.substitute_poly("s1", MPoly.var("z1"))
    collapsed = collapsed.substitute_poly("s2", MPoly.var("z2"))
    assert collapsed == direct


def test_arity_mismatch_rejected():
    phi = phi_gen(VACUUM, 2)
    with pytest.raises(ValueError, match="arity"):
        e_compose("groups", (1,), phi, ("s1",))
    ev = e_compose("module", 1, phi)
    with pytest.raises(ValueError, match="arity"):
        ev(((GEN_A, "z1"),), paired(VACUUM))


# -- transversality ---------------------------------------------------------------


def test_generator_maps_are_transversal():
    phi = phi_gen(GEN_A, 1)
    inputs = ((GEN_A, "z1"), (GEN_A, "z2"))
    report = transversality_test(phi, 1, inputs, paired(GEN_A), depth=3)
    assert report["ok"], report


def test_transversality_m0_vacuous():
    phi = phi_gen(GEN_A, 1)
    report = transversality_test(phi, 0, (), paired(GEN_A), depth=2)
    assert report["ok"] and "vacuously" in report["note"]


def test_transversality_m2_with_twist():
    phi = phi_gen(GEN_A, 1, twist="sign")
    inputs = ((GEN_A, "z1"), (GEN_A, "z2"), (GEN_A, "z3"))
    report = transversality_test(phi, 2, inputs, paired(A2), depth=2)
    assert report["ok"], report


def test_projected_module_sum_reconstructs_composition():
    # the graded partial sum over q reproduces the composite correlate on
    # low-order slices: exercised through the certification
    phi = phi_gen(VACUUM, 1)
    outer = ((GEN_A, "z1"),)
    inner = ((GEN_A, "z2"),)
    probe = paired(VACUUM)
    direct = phi.evaluate(inner, probe, prefix=outer)
    partial = projected_module_sum(phi, outer, inner, probe, cap=4)
    from vacoh._eops import laurent_slices_vanish
    assert laurent_slices_vanish(direct - partial, {"z2": (None, "d@z2")}, 2)
