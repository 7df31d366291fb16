"""Large-input construction tests: atomic dynamically-initialized protocols,
value bookkeeping, boolean combination, k-way conversion, helper removal.

Oracles: closed-form state/helper counts, brute-force predicate evaluation,
and explicit value conservation over random initialization interleavings.
"""

import random

import pytest
from hypothesis import given, strategies as st

from ppsynth.construct_large import (
    bits,
    boolean_stage,
    build_remainder_rdi,
    build_threshold_rdi,
    canonical_rep,
    compile_large,
    config_value,
    kway_to_2way,
    normalize_formula,
    numeric_value,
    tilde_transform,
)
from ppsynth.formula import (
    Atom,
    FormulaError,
    Not,
    THRESHOLD,
    evaluate,
    parse,
)
from ppsynth.lazy import HelperFreeProtocol
from ppsynth.protocol import (
    Protocol,
    Transition,
    from_json,
    mset,
    successors,
    to_json,
)
from ppsynth.verify import check_computes, check_rdi


class TestNumericStates:
    def test_bits(self):
        assert bits(0) == []
        assert bits(13) == [0, 2, 3]

    @given(d=st.integers(-30, 30))
    def test_canonical_rep_sums_to_value(self, d):
        rep = canonical_rep(d, 5)
        assert sum(p * k for p, k in rep.items()) == d
        for p in rep:
            assert p == 0 or abs(p) & (abs(p) - 1) == 0  # signed powers of two

    def test_canonical_rep_overflow(self):
        with pytest.raises(FormulaError):
            canonical_rep(64, 4)  # 64 >= 2^(4+1)

    def test_numeric_value(self):
        assert numeric_value("n:+4") == 4
        assert numeric_value("n:-2@x") == -2
        assert numeric_value("n:0") == 0
        assert numeric_value("in:x") == 0
        assert numeric_value("out:f") == 0


class TestThresholdRdi:
    def test_exact_sizes_for_x_ge_2(self):
        rdi = build_threshold_rdi({"x": 1}, 2)
        assert len(rdi.states) == 17
        assert sum(rdi.leaders.values()) == 5

    def test_rejects_nonpositive_bound(self):
        with pytest.raises(FormulaError):
            build_threshold_rdi({"x": 1}, 0)

    def test_fragments(self):
        rdi = build_threshold_rdi({"x": 1}, 2)
        assert rdi.t_dag  # initialization-phase transitions exist
        inf = rdi.inf_protocol()
        full = rdi.full_protocol()
        assert inf.flavor == "simple"
        assert full.transition_count() == inf.transition_count() + len(rdi.t_dag)

    def test_json_round_trip(self):
        rdi = build_threshold_rdi({"x": 1, "y": -1}, 1)
        text = to_json(rdi)
        again = from_json(text)
        assert to_json(again) == text
        assert again.t_dag == rdi.t_dag

    def test_check_rdi_smoke(self):
        phi = parse("x > 1")
        rdi = build_threshold_rdi({"x": 1}, 2)
        rep = check_rdi(rdi, lambda w: evaluate(phi, w), max_depth=5,
                        max_pop=2, samples=30)
        assert rep.ok, rep.failures


class TestRemainderRdi:
    def test_exact_sizes(self):
        rdi = build_remainder_rdi({"x": 5, "y": 6}, 4, 7)
        assert len(rdi.states) == 19
        assert sum(rdi.leaders.values()) == 7

    def test_rejects_bad_bounds(self):
        with pytest.raises(FormulaError):
            build_remainder_rdi({"x": 1}, 0, 3)
        with pytest.raises(FormulaError):
            build_remainder_rdi({"x": 1}, 3, 3)
        with pytest.raises(FormulaError):
            build_remainder_rdi({"x": 5}, 1, 3)  # coefficient not in [0, m)


def _random_init_run(rdi, a, rng, steps, modulus=None):
    """Random interleaving of input pseudo-steps and protocol steps; checks
    value conservation val(C) = a.w (mod modulus) after every move."""
    conf = dict(rdi.leaders)
    w = {x: 0 for x in rdi.variables}
    full = rdi.full_protocol()
    for _ in range(steps):
        moves = []
        for x in rdi.variables:
            moves.append(("in", x))
            if conf.get(rdi.inputs[x], 0) > 0:
                moves.append(("out", x))
        succ = successors(full, conf)
        moves.extend(("fire", s) for s in succ)
        kind, arg = moves[rng.randrange(len(moves))]
        if kind == "in":
            conf[rdi.inputs[arg]] = conf.get(rdi.inputs[arg], 0) + 1
            w[arg] += 1
        elif kind == "out":
            conf[rdi.inputs[arg]] -= 1
            w[arg] -= 1
        else:
            conf = arg[1]
        val = config_value(rdi, a, conf)
        want = sum(a[x] * w[x] for x in rdi.variables)
        if modulus is None:
            assert val == want, (conf, w)
        else:
            assert val % modulus == want % modulus, (conf, w)


def test_threshold_value_conservation_quick():
    a = {"x": 2, "y": -1}
    rdi = build_threshold_rdi(a, 3)
    rng = random.Random(11)
    for _ in range(40):
        _random_init_run(rdi, a, rng, steps=25)


def test_remainder_value_conservation_quick():
    a = {"x": 2, "y": 1}
    rdi = build_remainder_rdi(a, 1, 3)
    rng = random.Random(12)
    for _ in range(40):
        _random_init_run(rdi, a, rng, steps=25, modulus=3)


class TestTildeTransform:
    @given(hi=st.integers(0, 5), lo=st.integers(0, 5),
           c=st.integers(-4, 4), b=st.integers(-10, 10), k=st.integers(2, 4))
    def test_split_semantics(self, hi, lo, c, b, k):
        atom = Atom(THRESHOLD, (("x", c),), b)
        tilde = tilde_transform(atom, k)
        n = k * hi + lo
        assert tilde.holds({"x~": hi, "x_": lo}) == atom.holds({"x": n})


class TestNormalizeFormula:
    def test_atoms_deduplicated(self):
        tree, atoms = normalize_formula(parse("x > 1 & x > 1"))
        assert len(atoms) == 1

    def test_nonpositive_threshold_negated(self):
        tree, atoms = normalize_formula(parse("-x > -2"))  # x <= 1
        assert isinstance(tree, Not)
        assert atoms == [Atom(THRESHOLD, (("x", 1),), 1)]

    def test_remainder_expands_to_mod_thresholds(self):
        tree, atoms = normalize_formula(parse("x = 1 (mod 3)"))
        assert all(a.kind == "mod_threshold" for a in atoms)
        for v in ({"x": n} for n in range(7)):
            assert evaluate(tree, v) == evaluate(parse("x = 1 (mod 3)"), v)


class TestBooleanStage:
    def test_single_atom_is_simple_with_helpers(self):
        comb = boolean_stage(parse("x > 1"))
        assert comb.flavor == "simple"
        assert sum(comb.leaders.values()) == 5

    def test_single_atom_computes_predicate(self):
        phi = parse("x > 1")
        comb = boolean_stage(phi)
        rep = check_computes(comb, lambda w: evaluate(phi, w),
                             [{"x": n} for n in range(4)])
        assert rep.ok, [r.verdict for r in rep.rows]

    def test_two_atoms_add_connective_helper(self):
        comb = boolean_stage(parse("x > 0 & y > 0"))
        assert comb.flavor == "simple"
        # per-atom helpers + dispatch helpers + one boolean helper
        assert sum(comb.leaders.values()) == 13


class TestKwayTo2way:
    def test_preserves_2way_protocols(self):
        t = Transition.make(mset("a", "a"), mset("a", "b"), "t")
        p = Protocol(["a", "b"], [t], {}, ("x",), {"x": "a"}, {"b": 1})
        q = kway_to_2way(p)
        assert q.transitions == p.transitions

    def test_3way_gadget_semantics(self):
        t = Transition.make({"a": 3}, {"b": 3}, "t3")
        p = Protocol(["a", "b"], [t], {}, ("x",), {"x": "a"},
                     {"a": 0, "b": 1}, flavor="full-output")
        q = kway_to_2way(p)
        assert q.max_width() == 2
        rep = check_computes(q, lambda v: 1, [{"x": 3}])
        assert rep.ok

    def test_gathering_is_reversible(self):
        t = Transition.make({"a": 4}, {"b": 4}, "t4")
        p = Protocol(["a", "b"], [t], {}, ("x",), {"x": "a"}, {"b": 1})
        q = kway_to_2way(p)
        labels = {tr.label for tr in q.transitions}
        for grab in [lb for lb in labels if "grab" in lb]:
            assert grab.replace("grab", "drop") in labels

    def test_boolean_stage_conversion_verifies(self):
        phi = parse("x > 1")
        two = kway_to_2way(boolean_stage(phi))
        assert two.max_width() == 2
        rep = check_computes(two, lambda w: evaluate(phi, w), [{"x": 2}],
                             node_cap=500_000)
        assert rep.ok


class TestCompileLarge:
    def test_returns_leaderless_lazy_protocol(self):
        p, ell = compile_large(parse("x > 1"))
        assert isinstance(p, HelperFreeProtocol)
        assert p.leaders == {}
        assert ell == 5
        assert p.ell == ell

    def test_census_states_output_one(self):
        # below the cutoff every agent stays in a census state with output 1
        p, ell = compile_large(parse("x > 1"))
        assert p.output(p.input_state("x")) == 1
