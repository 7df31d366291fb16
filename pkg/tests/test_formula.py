"""Parser, evaluator, and normalization tests.

Oracles: hand-computed truth tables and brute-force evaluation over small
assignments; normalization is checked for semantic equivalence against the
original atom via hypothesis.
"""

import pytest
from hypothesis import given, strategies as st

from ppsynth.formula import (
    MOD_THRESHOLD,
    REMAINDER,
    THRESHOLD,
    And,
    Atom,
    Formula,
    FormulaError,
    Not,
    Or,
    ParseError,
    evaluate,
    ge_bound,
    metrics,
    normalize_remainder,
    normalize_threshold,
    parse,
    reduce_mod_threshold,
)


class TestParse:
    def test_simple_threshold(self):
        phi = parse("x > 1")
        assert phi.node == Atom(THRESHOLD, (("x", 1),), 1)
        assert phi.vars == ("x",)

    def test_ge_is_sugar_for_strict(self):
        assert parse("x >= 2").node == Atom(THRESHOLD, (("x", 1),), 1)
        assert parse("x >= 2").node == parse("x > 1").node

    def test_signed_coefficients(self):
        phi = parse("2*x - y > 2")
        assert phi.node == Atom(THRESHOLD, (("x", 2), ("y", -1)), 2)
        assert phi.vars == ("x", "y")

    def test_leading_minus(self):
        assert parse("-x > -3").node == Atom(THRESHOLD, (("x", -1),), -3)

    def test_duplicate_variables_merge(self):
        assert parse("x + x > 0").node == Atom(THRESHOLD, (("x", 2),), 0)
        assert parse("3*x - x > 0").node == Atom(THRESHOLD, (("x", 2),), 0)

    def test_remainder(self):
        phi = parse("x = 1 (mod 2)")
        assert phi.node == Atom(REMAINDER, (("x", 1),), 1, 2)

    def test_mod_threshold_surface_forms(self):
        assert parse("x >= 2 (mod 3)").node == Atom(MOD_THRESHOLD, (("x", 1),), 2, 3)
        # strict > is sugar for >= bound+1 in the modular world as well
        assert parse("x > 1 (mod 3)").node == Atom(MOD_THRESHOLD, (("x", 1),), 2, 3)

    def test_boolean_connectives_left_associative(self):
        phi = parse("x > 0 & y > 0 | x > 2")
        assert isinstance(phi.node, Or)
        assert isinstance(phi.node.left, And)

    def test_negation_applies_to_atoms(self):
        phi = parse("!x > 0 & y > 0")
        assert isinstance(phi.node, And)
        assert isinstance(phi.node.left, Not)

    def test_atom_str_round_trip(self):
        for text in ("x > 1", "2*x - y > 2", "x = 1 (mod 2)", "x >= 2 (mod 3)"):
            phi = parse(text)
            assert parse(str(phi.node)).node == phi.node

    @pytest.mark.parametrize("bad", [
        "x <", "x", "> 1", "x = 1", "x > 1 (mod 1)", "x ? 1", "x > 1 y > 2",
        "x > 1 &", "2x > 1",
    ])
    def test_parse_errors(self, bad):
        with pytest.raises(ParseError):
            parse(bad)


class TestEvaluate:
    def test_threshold_truth_table(self):
        phi = parse("2*x - y > 2")
        assert evaluate(phi, {"x": 2, "y": 1}) == 1   # 3 > 2
        assert evaluate(phi, {"x": 2, "y": 2}) == 0   # 2 > 2 fails
        assert evaluate(phi, {"x": 0, "y": 0}) == 0
        assert evaluate(phi, {"x": 5}) == 1           # missing vars read as 0

    def test_remainder_truth_table(self):
        phi = parse("x = 1 (mod 2)")
        assert [evaluate(phi, {"x": n}) for n in range(5)] == [0, 1, 0, 1, 0]

    def test_mod_threshold_truth_table(self):
        phi = parse("x >= 2 (mod 3)")
        assert [evaluate(phi, {"x": n}) for n in range(7)] == [0, 0, 1, 0, 0, 1, 0]

    def test_connectives(self):
        phi = parse("x > 0 & !y > 0")
        assert evaluate(phi, {"x": 1, "y": 0}) == 1
        assert evaluate(phi, {"x": 1, "y": 1}) == 0
        phi = parse("x > 1 | y > 1")
        assert evaluate(phi, {"x": 0, "y": 2}) == 1


coeff_st = st.lists(
    st.tuples(st.sampled_from(["x", "y", "z"]), st.integers(-6, 6)),
    min_size=1, max_size=3, unique_by=lambda t: t[0],
).map(tuple)
assign_st = st.fixed_dictionaries(
    {}, optional={x: st.integers(0, 8) for x in ("x", "y", "z")})


class TestNormalizeThreshold:
    def test_positive_bound_unchanged(self):
        atom = Atom(THRESHOLD, (("x", 1),), 1)
        norm, neg = normalize_threshold(atom)
        assert (norm, neg) == (atom, 0)
        assert ge_bound(norm) == 2

    def test_nonpositive_bound_negates(self):
        atom = Atom(THRESHOLD, (("x", 1), ("y", -1)), -1)  # x - y > -1
        norm, neg = normalize_threshold(atom)
        assert neg == 1
        assert dict(norm.coeffs) == {"x": -1, "y": 1}
        assert ge_bound(norm) >= 1

    @given(coeffs=coeff_st, bound=st.integers(-10, 10), v=assign_st)
    def test_semantics_preserved(self, coeffs, bound, v):
        atom = Atom(THRESHOLD, coeffs, bound)
        norm, neg = normalize_threshold(atom)
        assert ge_bound(norm) >= 1
        got = evaluate(Not(norm) if neg else norm, v)
        assert got == evaluate(atom, v)


class TestNormalizeRemainder:
    @given(coeffs=coeff_st, bound=st.integers(-10, 10),
           m=st.integers(2, 7), v=assign_st)
    def test_semantics_preserved(self, coeffs, bound, m, v):
        atom = Atom(REMAINDER, coeffs, bound, m)
        tree = normalize_remainder(atom)
        assert evaluate(tree, v) == evaluate(atom, v)

    @given(coeffs=coeff_st, bound=st.integers(0, 10),
           m=st.integers(2, 7), v=assign_st)
    def test_reduce_mod_threshold_preserved(self, coeffs, bound, m, v):
        atom = Atom(MOD_THRESHOLD, coeffs, bound, m)
        red = reduce_mod_threshold(atom)
        assert all(0 <= c < m for _, c in red.coeffs)
        assert evaluate(red, v) == evaluate(atom, v)

    def test_wrong_kind_rejected(self):
        with pytest.raises(FormulaError):
            normalize_remainder(Atom(THRESHOLD, (("x", 1),), 1))
        with pytest.raises(FormulaError):
            normalize_threshold(Atom(REMAINDER, (("x", 1),), 1, 2))


class TestAtomValidation:
    def test_threshold_rejects_modulus(self):
        with pytest.raises(FormulaError):
            Atom(THRESHOLD, (("x", 1),), 1, 2)

    def test_modular_atoms_require_modulus(self):
        with pytest.raises(FormulaError):
            Atom(REMAINDER, (("x", 1),), 1)
        with pytest.raises(FormulaError):
            Atom(MOD_THRESHOLD, (("x", 1),), 1, 1)


def test_metrics():
    phi = parse("2*x - y > 2 & x = 1 (mod 5)")
    m = metrics(phi)
    assert m["norm"] == 5
    assert m["len"] == 1
    assert m["var_count"] == 2
    assert m["atom_count"] == 2


def test_formula_of_collects_vars_in_order():
    phi = Formula.of(And(Atom(THRESHOLD, (("b", 1),), 0),
                         Atom(THRESHOLD, (("a", 1),), 0)))
    assert phi.vars == ("b", "a")
