"""Population protocol data model and operational semantics.

A protocol is a tuple (Q, T, L, X, I, O): states, k-way transitions
(pre/post multisets of equal size), a leader/helper multiset, input
variables with an input map, and a partial output map into {0, 1}.
Identity transitions are implicit and never stored.

Besides the concrete :class:`Protocol`, the module defines the small
interface (:class:`ProtocolBase`) that rule-based protocols with huge state
spaces implement, so exploration and simulation can enumerate transitions
from a configuration's support without materializing the full state set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

Multiset = dict[str, int]
Configuration = dict[str, int]


class ProtocolError(ValueError):
    pass


def mset(*items: str) -> Multiset:
    out: Multiset = {}
    for q in items:
        out[q] = out.get(q, 0) + 1
    return out


def mset_add(a: Multiset, b: Multiset) -> Multiset:
    out = dict(a)
    for q, k in b.items():
        out[q] = out.get(q, 0) + k
    return {q: k for q, k in out.items() if k != 0}


def mset_size(a: Multiset) -> int:
    return sum(a.values())


def canonical(a: Multiset) -> tuple[tuple[str, int], ...]:
    return tuple(sorted((q, k) for q, k in a.items() if k > 0))


def from_canonical(c: tuple[tuple[str, int], ...]) -> Multiset:
    return dict(c)


@dataclass(frozen=True)
class Transition:
    pre: tuple[tuple[str, int], ...]
    post: tuple[tuple[str, int], ...]
    label: str

    @staticmethod
    def make(pre: Multiset, post: Multiset, label: str) -> "Transition":
        t = Transition(canonical(pre), canonical(post), label)
        if t.width != sum(k for _, k in t.post):
            raise ProtocolError(f"width mismatch in transition {label!r}")
        if t.width < 1:
            raise ProtocolError(f"empty transition {label!r}")
        return t

    @property
    def width(self) -> int:
        return sum(k for _, k in self.pre)

    @property
    def pre_dict(self) -> Multiset:
        return dict(self.pre)

    @property
    def post_dict(self) -> Multiset:
        return dict(self.post)

    def is_identity(self) -> bool:
        return self.pre == self.post

    def sort_key(self):
        return (self.label, self.pre, self.post)


class ProtocolBase:
    """Interface shared by concrete and rule-based protocols."""

    variables: tuple[str, ...]
    leaders: Multiset
    flavor: str

    def input_state(self, x: str) -> str:
        raise NotImplementedError

    def output(self, q: str) -> int | None:
        """0, 1, or None for opinion-less states."""
        raise NotImplementedError

    def candidates(self, support: frozenset[str]) -> list[Transition]:
        """All non-identity transitions whose pre-support is within `support`."""
        raise NotImplementedError

    def pair_candidates(self, u: str, v: str) -> list[Transition]:
        """Non-identity transitions with pre-support exactly {u, v} when
        u != v, or within {u} when u == v."""
        raise NotImplementedError

    def state_count(self) -> int:
        raise NotImplementedError

    def transition_count(self) -> int | None:
        """Number of stored transitions, or None when only rule-defined."""
        return None

    def max_width(self) -> int | None:
        return None

    def to_json_obj(self) -> dict:
        raise NotImplementedError


class Protocol(ProtocolBase):
    """Concrete protocol with explicit state and transition lists."""

    def __init__(
        self,
        states: list[str],
        transitions: list[Transition],
        leaders: Multiset,
        variables: tuple[str, ...],
        inputs: dict[str, str],
        outputs: dict[str, int],
        flavor: str = "general",
    ):
        self.states = sorted(set(states))
        self.transitions = sorted(transitions, key=Transition.sort_key)
        self.leaders = {q: k for q, k in leaders.items() if k > 0}
        self.variables = tuple(variables)
        self.inputs = dict(inputs)
        self.outputs = dict(outputs)
        self.flavor = flavor
        self._cand_cache: dict[frozenset[str], list[Transition]] = {}

    def input_state(self, x: str) -> str:
        return self.inputs[x]

    def output(self, q: str) -> int | None:
        return self.outputs.get(q)

    def candidates(self, support: frozenset[str]) -> list[Transition]:
        hit = self._cand_cache.get(support)
        if hit is not None:
            return hit
        out = [
            t
            for t in self.transitions
            if not t.is_identity() and all(q in support for q, _ in t.pre)
        ]
        self._cand_cache[support] = out
        return out

    def pair_candidates(self, u: str, v: str) -> list[Transition]:
        index = getattr(self, "_support_index", None)
        if index is None:
            index = {}
            for t in self.transitions:
                if t.is_identity():
                    continue
                index.setdefault(frozenset(q for q, _ in t.pre), []).append(t)
            self._support_index = index
        if u == v:
            return index.get(frozenset((u,)), [])
        return index.get(frozenset((u, v)), [])

    def state_count(self) -> int:
        return len(self.states)

    def transition_count(self) -> int:
        return len(self.transitions)

    def max_width(self) -> int:
        return max((t.width for t in self.transitions), default=0)

    # -- simple-flavor helpers ------------------------------------------------

    def simple_states(self) -> tuple[str, str]:
        """(f, t) for a simple protocol."""
        zeros = [q for q, b in self.outputs.items() if b == 0]
        ones = [q for q, b in self.outputs.items() if b == 1]
        if len(zeros) != 1 or len(ones) != 1:
            raise ProtocolError("protocol is not simple")
        return zeros[0], ones[0]

    def to_json_obj(self) -> dict:
        obj = {
            "states": self.states,
            "transitions": [
                {"pre": dict(t.pre), "post": dict(t.post), "label": t.label}
                for t in self.transitions
            ],
            "leaders": dict(canonical(self.leaders)),
            "inputs": self.inputs,
            "outputs": {q: b for q, b in sorted(self.outputs.items())},
            "flavor": self.flavor,
        }
        return obj


class MultiOutputProtocol(Protocol):
    """Protocol with k output maps over one transition system."""

    def __init__(self, states, transitions, leaders, variables, inputs,
                 output_maps: list[dict[str, int]], flavor: str = "general"):
        super().__init__(states, transitions, leaders, variables, inputs, {}, flavor)
        self.output_maps = [dict(m) for m in output_maps]
        self.k = len(output_maps)

    def projection_outputs(self, i: int) -> dict[str, int]:
        return self.output_maps[i]

    def to_json_obj(self) -> dict:
        obj = super().to_json_obj()
        obj["outputs"] = {
            str(i): {q: b for q, b in sorted(m.items())}
            for i, m in enumerate(self.output_maps)
        }
        obj["k"] = self.k
        return obj


class RDIProtocol:
    """Protocol with reversible dynamic initialization: permanent transitions
    T_inf plus initialization-phase transitions T_dag."""

    def __init__(self, states, t_inf: list[Transition], t_dag: list[Transition],
                 leaders: Multiset, variables, inputs: dict[str, str],
                 outputs: dict[str, int]):
        self.states = sorted(set(states))
        self.t_inf = sorted(t_inf, key=Transition.sort_key)
        self.t_dag = sorted(t_dag, key=Transition.sort_key)
        self.leaders = dict(leaders)
        self.variables = tuple(variables)
        self.inputs = dict(inputs)
        self.outputs = dict(outputs)

    def inf_protocol(self) -> Protocol:
        """The permanent fragment as a simple protocol (used post-initialization)."""
        return Protocol(self.states, self.t_inf, self.leaders, self.variables,
                        self.inputs, self.outputs, flavor="simple")

    def full_protocol(self) -> Protocol:
        return Protocol(self.states, self.t_inf + self.t_dag, self.leaders,
                        self.variables, self.inputs, self.outputs, flavor="general")

    def to_json_obj(self) -> dict:
        obj = self.inf_protocol().to_json_obj()
        obj["flavor"] = "rdi"
        obj["t_dag"] = [
            {"pre": dict(t.pre), "post": dict(t.post), "label": t.label}
            for t in self.t_dag
        ]
        return obj


# -- semantics ----------------------------------------------------------------


def initial_config(p: ProtocolBase, v: dict[str, int]) -> Configuration:
    c: Configuration = dict(p.leaders)
    for x, n in v.items():
        if n < 0:
            raise ProtocolError(f"negative input count for {x}")
        if n:
            q = p.input_state(x)
            c[q] = c.get(q, 0) + n
    if mset_size(c) < 1:
        raise ProtocolError("population size must be at least 1")
    return c


def enabled(c: Configuration, t: Transition) -> bool:
    return all(c.get(q, 0) >= k for q, k in t.pre)


def fire(c: Configuration, t: Transition) -> Configuration:
    if not enabled(c, t):
        raise ProtocolError(f"transition {t.label!r} is not enabled")
    out = dict(c)
    for q, k in t.pre:
        out[q] -= k
    for q, k in t.post:
        out[q] = out.get(q, 0) + k
    return {q: k for q, k in out.items() if k > 0}


def successors(p: ProtocolBase, c: Configuration) -> list[tuple[Transition, Configuration]]:
    """All enabled non-identity steps from c, deduplicated, in deterministic order."""
    support = frozenset(q for q, k in c.items() if k > 0)
    seen = set()
    out = []
    for t in p.candidates(support):
        if not enabled(c, t):
            continue
        nxt = fire(c, t)
        key = (t.label, t.pre, t.post)
        if key in seen:
            continue
        seen.add(key)
        out.append((t, nxt))
    return out


def output_of(p: ProtocolBase, c: Configuration) -> int | None:
    has = [False, False]
    for q, k in c.items():
        if k <= 0:
            continue
        b = p.output(q)
        if b is not None:
            has[b] = True
    if has[0] == has[1]:
        return None
    return 1 if has[1] else 0


# -- output-convention conversions -------------------------------------------


def _copy(q: str, b: int) -> str:
    return f"c{b}({q})"


def spp_to_fopp(p: Protocol) -> Protocol:
    """Simple -> full-output: two copies of Q; every state carries an opinion
    bit, dragged toward the opinion of the unique f/t witnesses."""
    f, t = p.simple_states()
    states = [_copy(q, b) for q in p.states for b in (0, 1)]
    trans: list[Transition] = []
    for tr in p.transitions:
        pre = list(tr.pre_dict.items())
        if sum(k for _, k in pre) == 1:
            (q, _), = pre
            (q2, _), = list(tr.post_dict.items())
            for b in (0, 1):
                trans.append(Transition.make(
                    mset(_copy(q, b)), mset(_copy(q2, b)), f"{tr.label}~b{b}"))
            continue
        # expand a 2-way pre multiset into an ordered pair
        flat = [q for q, k in tr.pre for _ in range(k)]
        flat_post = [q for q, k in tr.post for _ in range(k)]
        x, y = flat
        z, u = flat_post
        for b in (0, 1):
            for c in (0, 1):
                if b == c:
                    combos = [(b, b)]
                else:
                    combos = [(d, e) for d in (0, 1) for e in (0, 1)]
                for d, e in combos:
                    nt = Transition.make(
                        mset(_copy(x, b), _copy(y, c)),
                        mset(_copy(z, d), _copy(u, e)),
                        f"{tr.label}~b{b}{c}{d}{e}")
                    if not nt.is_identity():
                        trans.append(nt)
    # opinion propagation: witnesses snap to their own opinion and drag others
    trans.append(Transition.make(mset(_copy(f, 1)), mset(_copy(f, 0)), "snap_f"))
    trans.append(Transition.make(mset(_copy(t, 0)), mset(_copy(t, 1)), "snap_t"))
    for a in p.states:
        if a != f:
            trans.append(Transition.make(
                mset(_copy(a, 1), _copy(f, 0)), mset(_copy(a, 0), _copy(f, 0)),
                f"drag0({a})"))
        if a != t:
            trans.append(Transition.make(
                mset(_copy(a, 0), _copy(t, 1)), mset(_copy(a, 1), _copy(t, 1)),
                f"drag1({a})"))
    leaders = {_copy(q, 0): k for q, k in p.leaders.items()}
    inputs = {x: _copy(q, 0) for x, q in p.inputs.items()}
    outputs = {_copy(q, b): b for q in p.states for b in (0, 1)}
    return Protocol(states, trans, leaders, p.variables, inputs, outputs,
                    flavor="full-output")


def fopp_to_spp(p: Protocol) -> Protocol:
    """Full-output -> simple: add {f, t, bot} plus one leader at bot; witness
    transitions move the extra agents to the side of the observed opinions."""
    for q in p.states:
        if p.outputs.get(q) not in (0, 1):
            raise ProtocolError("fopp_to_spp expects a full-output protocol")
    f, t, bot = "spp:f", "spp:t", "spp:bot"
    states = list(p.states) + [f, t, bot]
    trans = list(p.transitions)
    for q in p.states:
        target = f if p.outputs[q] == 0 else t
        for b in (f, t, bot):
            if b == target:
                continue
            trans.append(Transition.make(
                mset(q, b), mset(q, target), f"witness({q},{b})"))
    leaders = mset_add(p.leaders, {bot: 1})
    outputs = {f: 0, t: 1}
    return Protocol(states, trans, leaders, p.variables, p.inputs, outputs,
                    flavor="simple")


# -- validation and serialization ---------------------------------------------


def validate(p: Protocol) -> list[str]:
    issues: list[str] = []
    state_set = set(p.states)
    for x in p.variables:
        if x not in p.inputs:
            issues.append(f"missing input map for variable {x}")
        elif p.inputs[x] not in state_set:
            issues.append(f"input state for {x} not in Q")
    for q in p.leaders:
        if q not in state_set:
            issues.append(f"leader state {q} not in Q")
    for q, b in p.outputs.items():
        if q not in state_set:
            issues.append(f"output state {q} not in Q")
        if b not in (0, 1):
            issues.append(f"output value for {q} not a bit")
    for t in p.transitions:
        if sum(k for _, k in t.pre) != sum(k for _, k in t.post):
            issues.append(f"width mismatch in {t.label}")
        for q, k in list(t.pre) + list(t.post):
            if q not in state_set:
                issues.append(f"transition {t.label} uses unknown state {q}")
            if k < 0:
                issues.append(f"transition {t.label} has negative multiplicity")
        if t.is_identity():
            issues.append(f"stored identity transition {t.label}")
    if p.flavor == "simple":
        zeros = [q for q, b in p.outputs.items() if b == 0]
        ones = [q for q, b in p.outputs.items() if b == 1]
        if len(zeros) != 1 or len(ones) != 1:
            issues.append("simple protocol must have exactly one f and one t state")
    if p.flavor == "full-output":
        for q in p.states:
            if p.outputs.get(q) not in (0, 1):
                issues.append(f"full-output protocol leaves {q} without opinion")
    return issues


def to_json(p: ProtocolBase) -> str:
    return json.dumps(p.to_json_obj(), sort_keys=True, indent=1)


def protocol_from_json_obj(obj: dict) -> Protocol | MultiOutputProtocol | RDIProtocol:
    def load_trans(items) -> list[Transition]:
        return [Transition.make(d["pre"], d["post"], d["label"]) for d in items]

    trans = load_trans(obj["transitions"])
    variables = tuple(obj["inputs"].keys())
    if obj.get("flavor") == "rdi":
        return RDIProtocol(obj["states"], trans, load_trans(obj["t_dag"]),
                           obj["leaders"], variables, obj["inputs"], obj["outputs"])
    if "k" in obj and isinstance(next(iter(obj["outputs"].values()), None), dict):
        maps = [obj["outputs"][str(i)] for i in range(obj["k"])]
        return MultiOutputProtocol(obj["states"], trans, obj["leaders"], variables,
                                   obj["inputs"], maps, obj.get("flavor", "general"))
    return Protocol(obj["states"], trans, obj["leaders"], variables,
                    obj["inputs"], obj["outputs"], obj.get("flavor", "general"))


def from_json(text: str):
    obj = json.loads(text)
    kind = obj.get("kind")
    if kind is not None:
        from . import lazy

        return lazy.lazy_from_json_obj(obj)
    return protocol_from_json_obj(obj)
