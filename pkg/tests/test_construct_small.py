"""Small-population construction tests: per-size halting protocols, tagged
boolean combination, the fixed-size dispatcher, and leader elimination.

Oracles: brute-force predicate evaluation over all inputs of the exact target
size, plus the halting check (verdict states are exclusive and absorbing).
"""

import pytest

from ppsynth.construct_small import (
    build_greater_sum_halting,
    build_mod_threshold_halting,
    build_part,
    build_remainder_halting,
    build_size_one_part,
    combine_fixed_sizes,
    compile_small,
    halting_combine_tree,
    probe_bit,
)
from ppsynth.formula import (
    Atom,
    FormulaError,
    MOD_THRESHOLD,
    Not,
    THRESHOLD,
    evaluate,
    parse,
)
from ppsynth.lazy import LeaderlessProtocol
from ppsynth.protocol import ProtocolError, validate
from ppsynth.verify import check_computes, check_halting


def _exact(size, xmax=None):
    """All inputs over x, y with x + y == size."""
    return [{"x": a, "y": size - a} for a in range(size + 1)]


def _gt(v):
    return 1 if v.get("x", 0) > v.get("y", 0) else 0


class TestGreaterSum:
    def test_probe_bit(self):
        # positions are 1-based from the least significant bit
        assert probe_bit([3, 1], 3) == 1
        assert probe_bit([3, 1], 1) == 0

    def test_rejects_bad_arguments(self):
        with pytest.raises(FormulaError):
            build_greater_sum_halting({"x": 1}, {"y": 1}, 1)
        with pytest.raises(FormulaError):
            build_greater_sum_halting({"x": -1}, {"y": 1}, 2)

    def test_validates(self):
        p = build_greater_sum_halting({"x": 1}, {"y": 1}, 2)
        assert validate(p) == []
        assert p.flavor == "halting-claimed"
        assert sum(p.leaders.values()) == 1

    @pytest.mark.parametrize("i", [2, 3])
    def test_computes_and_halts_at_exact_size(self, i):
        p = build_greater_sum_halting({"x": 1}, {"y": 1}, i)
        inputs = _exact(i)
        assert check_computes(p, _gt, inputs).ok
        assert check_halting(p, inputs).ok

    def test_constant_offset(self):
        # 2x - y > 1 at size 3
        p = build_greater_sum_halting({"x": 2}, {"y": 1}, 3, c=1)
        oracle = lambda v: 1 if 2 * v.get("x", 0) - v.get("y", 0) > 1 else 0
        assert check_computes(p, oracle, _exact(3)).ok


class TestRemainderAndModThreshold:
    def test_remainder_at_size_two(self):
        p = build_remainder_halting({"x": 1, "y": 2}, 3, 1, 2)
        oracle = lambda v: 1 if (v.get("x", 0) + 2 * v.get("y", 0)) % 3 == 1 else 0
        inputs = _exact(2)
        assert check_computes(p, oracle, inputs).ok
        assert check_halting(p, inputs).ok

    def test_mod_threshold_at_size_two(self):
        atom = Atom(MOD_THRESHOLD, (("x", 1), ("y", 0)), 1, 2)
        p = build_mod_threshold_halting(atom, 2)
        oracle = lambda v: 1 if v.get("x", 0) % 2 >= 1 else 0
        assert check_computes(p, oracle, _exact(2)).ok


class TestHaltingCombination:
    def test_negation_swaps_verdicts(self):
        tree = Not(Atom(THRESHOLD, (("x", 1), ("y", -1)), 0))
        p = halting_combine_tree(tree, 2)
        assert p.flavor == "halting-claimed"
        assert check_computes(p, lambda v: 1 - _gt(v), _exact(2)).ok

    def test_conjunction_of_atoms(self):
        phi = parse("x > 0 & y > 0")
        p = build_part(phi, 2)
        inputs = _exact(2)
        assert check_computes(p, lambda v: evaluate(phi, v), inputs).ok
        assert check_halting(p, inputs).ok

    def test_disjunction_of_atoms(self):
        phi = parse("x - y > 0 | y - x > 1")
        p = build_part(phi, 2)
        assert check_computes(p, lambda v: evaluate(phi, v), _exact(2)).ok

    def test_mixed_kind_part(self):
        phi = parse("x - y > -2 & x = 1 (mod 2)")
        p = build_part(phi, 2)
        assert check_computes(p, lambda v: evaluate(phi, v), _exact(2)).ok


class TestSizeOnePart:
    def test_precomputed_verdicts(self):
        phi = parse("x - y > 0")
        p = build_size_one_part(phi)
        assert check_computes(p, lambda v: evaluate(phi, v),
                              [{"x": 1}, {"y": 1}]).ok
        assert check_halting(p, [{"x": 1}, {"y": 1}]).ok


class TestCombineFixedSizes:
    def test_missing_part_rejected(self):
        with pytest.raises(ProtocolError):
            combine_fixed_sizes({}, 3, ("x",))

    def test_guarded_predicate(self):
        phi = parse("x - y > 0")
        fixed = combine_fixed_sizes({2: build_part(phi, 2)}, 3, phi.vars)

        def oracle(v):
            return 1 if sum(v.values()) >= 3 else evaluate(phi, v)

        inputs = _exact(2) + _exact(3)
        rep = check_computes(fixed, oracle, inputs)
        assert rep.ok, [r.verdict for r in rep.rows]

    def test_single_leader(self):
        phi = parse("x > 0")
        fixed = combine_fixed_sizes({2: build_part(phi, 2)}, 3, phi.vars)
        assert sum(fixed.leaders.values()) == 1
        assert validate(fixed) == []


class TestCompileSmall:
    def test_cutoff_lower_bound(self):
        with pytest.raises(FormulaError):
            compile_small(parse("x > 0"), 2)

    def test_returns_leaderless(self):
        p = compile_small(parse("x > 0"), 3)
        assert isinstance(p, LeaderlessProtocol)
        assert p.leaders == {}
        assert p.ell == 3

    def test_small_population_verdicts(self):
        phi = parse("x > 0")
        p = compile_small(phi, 3)

        def oracle(v):
            return 1 if sum(v.values()) >= 3 else evaluate(phi, v)

        rep = check_computes(p, oracle, [{"x": 2}, {"x": 3}])
        assert rep.ok, [r.verdict for r in rep.rows]
