"""Small-input constructions: halting fixed-size protocols (bit-probing
comparison of two weighted sums, remainder as a disjunction of equalities),
halting boolean combination by concatenation of tagged protocols, the
fixed-size dispatcher with one leader, and leader elimination.

The resulting protocol computes (|v| < ell) -> phi(v) without leaders.
"""

from __future__ import annotations

from .formula import (
    MOD_THRESHOLD,
    THRESHOLD,
    And,
    Atom,
    Formula,
    FormulaError,
    Node,
    Not,
    Or,
    evaluate,
)
from .construct_large import normalize_formula
from .protocol import (
    Protocol,
    ProtocolError,
    Transition,
    mset,
)

F = "out:f"
T = "out:t"


def _bit(value: int, pos: int) -> int:
    """pos-th bit of value, 1-based from the least significant."""
    return (value >> (pos - 1)) & 1


def _reg(side: str, coeff: int, flag: int) -> str:
    return f"r:{side}:{coeff}:{flag}"


def _ld(t: tuple[int, int, int, int, int, int]) -> str:
    return "l:" + ":".join(str(c) for c in t)


def build_greater_sum_halting(
    alpha: dict[str, int], beta: dict[str, int], i: int, c: int = 0
) -> Protocol:
    """Halting protocol deciding alpha.x - beta.y > c for inputs of size
    exactly i (>= 2), with a single leader.

    The leader repeatedly probes bit positions of both weighted sums from the
    most significant position downward, meeting every agent once per round
    and accumulating the two sums' bits with div-2 carries; at the target
    position it compares the two current bits and halts in t or f on the
    first difference.  Between rounds it sweeps the population to clear the
    agents' met-flags.  The constant c is folded in by seeding the
    appropriate accumulator with c's bit at each position.
    """
    if i < 2:
        raise FormulaError("fixed-size protocols need i >= 2")
    if any(v < 0 for v in alpha.values()) or any(v < 0 for v in beta.values()):
        raise FormulaError("coefficient maps must be nonnegative")
    cx = max(-c, 0)
    cy = max(c, 0)
    max_x = i * max(alpha.values(), default=0) + cx
    max_y = i * max(beta.values(), default=0) + cy
    m = max(1, max(max_x, max_y).bit_length())
    vcap = i * m + max(cx, cy) + 1

    variables = tuple(alpha.keys()) + tuple(beta.keys())
    partners = [("X", co) for co in sorted(set(alpha.values()))] + [
        ("Y", co) for co in sorted(set(beta.values()))]

    def step(l, side, coeff, flag):
        """One leader/agent meeting; returns (leader', flag') with leader'
        being a tuple or 'f'/'t', or None when the meeting is an identity."""
        tgt, pos, met, reset, vx, vy = l
        if reset == 1 and flag == 1:
            if met > 0:
                return (tgt, pos, met - 1, 1, vx, vy), 0
            return (tgt, pos, 0, 0, vx, vy), 0
        if reset == 0 and flag == 0:
            add = _bit(coeff, pos)
            nvx = vx + (add if side == "X" else 0)
            nvy = vy + (add if side == "Y" else 0)
            if nvx > vcap or nvy > vcap:
                raise ProtocolError("accumulator overflow")
            if met < i - 1:
                return (tgt, pos, met + 1, 0, nvx, nvy), 1
            if pos < tgt:
                return (tgt, pos + 1, i - 1, 1,
                        nvx // 2 + _bit(cx, pos + 1),
                        nvy // 2 + _bit(cy, pos + 1)), 1
            if nvx % 2 != nvy % 2:
                return ("t" if nvx % 2 > nvy % 2 else "f"), 1
            if tgt > 1:
                return (tgt - 1, 1, i - 1, 1, _bit(cx, 1), _bit(cy, 1)), 1
            return "f", 1
        return None

    init = (m, 1, 0, 0, _bit(cx, 1), _bit(cy, 1))
    reachable = {init}
    frontier = [init]
    trans: list[Transition] = []
    while frontier:
        l = frontier.pop()
        for side, coeff in partners:
            for flag in (0, 1):
                res = step(l, side, coeff, flag)
                if res is None:
                    continue
                l2, flag2 = res
                if isinstance(l2, tuple):
                    target = _ld(l2)
                    if l2 not in reachable:
                        reachable.add(l2)
                        frontier.append(l2)
                else:
                    target = F if l2 == "f" else T
                t = Transition.make(
                    mset(_ld(l), _reg(side, coeff, flag)),
                    mset(target, _reg(side, coeff, flag2)),
                    f"probe({side},{coeff},{flag})@{_ld(l)}")
                if not t.is_identity():
                    trans.append(t)

    states = ([_reg(s, co, b) for s, co in partners for b in (0, 1)]
              + [_ld(l) for l in reachable] + [F, T])
    inputs = {}
    for x, co in alpha.items():
        inputs[x] = _reg("X", co, 0)
    for y, co in beta.items():
        inputs[y] = _reg("Y", co, 0)
    return Protocol(states, trans, {_ld(init): 1}, variables, inputs,
                    {F: 0, T: 1}, flavor="halting-claimed")


def probe_bit(values: list[int], pos: int) -> int:
    """Reference bit extraction: pos-th bit of the sum of values."""
    return _bit(sum(values), pos)


def _gs_for_threshold(atom: Atom, i: int) -> tuple[Protocol | None, bool]:
    """Greater-Sum instance for a strict threshold atom a.v > c; returns
    (protocol, negated). The atom may have signed coefficients."""
    alpha = {x: co for x, co in atom.coeffs if co > 0}
    beta = {x: -co for x, co in atom.coeffs if co < 0}
    zero = {x: 0 for x, co in atom.coeffs if co == 0}
    alpha.update(zero)
    return build_greater_sum_halting(alpha, beta, i, atom.bound), False


def _equality_tree(coeffs: dict[str, int], target: int) -> Node:
    """a.x = target as (a.x > target-1) and not (a.x > target)."""
    ctup = tuple(coeffs.items())
    return And(Atom(THRESHOLD, ctup, target - 1),
               Not(Atom(THRESHOLD, ctup, target)))


def build_remainder_halting(alpha: dict[str, int], m: int, b: int, i: int) -> Protocol:
    """Halting protocol for a.x = b (mod m) at size exactly i, expanded into
    the disjunction of the i possible equalities a.x = j*m + b."""
    a = {x: co % m for x, co in alpha.items()}
    b = b % m
    tree: Node | None = None
    for j in range(i):
        eq = _equality_tree(a, j * m + b)
        tree = eq if tree is None else Or(tree, eq)
    return halting_combine_tree(tree, i)


def build_mod_threshold_halting(atom: Atom, i: int) -> Protocol:
    """Halting protocol for (a.x mod m) >= b at size exactly i: the sum lies
    in [j*m + b, j*m + m - 1] for some j."""
    m = atom.modulus
    a = {x: co % m for x, co in atom.coeffs}
    b = atom.bound
    jmax = (i * max(a.values(), default=0)) // m
    tree: Node | None = None
    for j in range(jmax + 1):
        ctup = tuple(a.items())
        band: Node = Atom(THRESHOLD, ctup, j * m + b - 1)
        upper = Not(Atom(THRESHOLD, ctup, j * m + m - 1))
        band = And(band, upper)
        tree = band if tree is None else Or(tree, band)
    return halting_combine_tree(tree, i)


# -- halting boolean combination ----------------------------------------------

BOX = "#"


class _Tagged:
    """A tagged halting protocol under construction: every state carries the
    input tag of its agent (or # for the leader), with per-tag final states."""

    def __init__(self, states, state_tag, trans, inputs, leader_state,
                 f_final, t_final, tags):
        self.states = states              # list[str]
        self.state_tag = state_tag        # state -> tag
        self.trans = trans                # list[Transition]
        self.inputs = inputs              # x -> state
        self.leader_state = leader_state  # str
        self.f_final = f_final            # tag -> state
        self.t_final = t_final            # tag -> state
        self.tags = tags                  # list[str]

    def entry(self, tag: str) -> str:
        if tag == BOX:
            return self.leader_state
        return self.inputs[tag]


def _tag_leaf(p: Protocol, pid: str, tags: list[str]) -> _Tagged:
    f, t = p.simple_states()
    leader_states = list(p.leaders.keys())
    if sum(p.leaders.values()) != 1:
        raise ProtocolError("halting parts must have exactly one leader")
    name = {}
    states = []
    state_tag = {}
    for tag in tags:
        for q in p.states:
            nm = f"{pid}:{tag}${q}"
            name[(tag, q)] = nm
            states.append(nm)
            state_tag[nm] = tag
    trans = []
    for tr in p.transitions:
        flat = [q for q, k in tr.pre for _ in range(k)]
        post = [q for q, k in tr.post for _ in range(k)]
        if len(flat) == 1:
            for tag in tags:
                trans.append(Transition.make(
                    mset(name[(tag, flat[0])]), mset(name[(tag, post[0])]),
                    f"{pid}:{tag}${tr.label}"))
        elif len(flat) == 2:
            for tag1 in tags:
                for tag2 in tags:
                    nt = Transition.make(
                        mset(name[(tag1, flat[0])], name[(tag2, flat[1])]),
                        mset(name[(tag1, post[0])], name[(tag2, post[1])]),
                        f"{pid}:{tag1}{tag2}${tr.label}")
                    if not nt.is_identity():
                        trans.append(nt)
        else:
            raise ProtocolError("halting parts must be at most 2-way")
    inputs = {x: name[(x, p.inputs[x])] for x in p.variables}
    return _Tagged(states, state_tag, trans,
                   inputs, name[(BOX, leader_states[0])],
                   {tag: name[(tag, f)] for tag in tags},
                   {tag: name[(tag, t)] for tag in tags}, tags)


def _combine(left: _Tagged, right: _Tagged, is_and: bool, nid: str,
             tags: list[str]) -> _Tagged:
    """Concatenate two tagged halting protocols: run left; on its t (for and)
    or f (for or), every agent restarts into right via its tag."""
    new_f = {tag: f"{nid}:{tag}$F" for tag in tags}
    new_t = {tag: f"{nid}:{tag}$T" for tag in tags}
    states = left.states + right.states + list(new_f.values()) + list(new_t.values())
    state_tag = dict(left.state_tag) | dict(right.state_tag)
    for tag in tags:
        state_tag[new_f[tag]] = tag
        state_tag[new_t[tag]] = tag
    trans = left.trans + right.trans
    for tag in tags:
        if is_and:
            trans.append(Transition.make(
                mset(left.f_final[tag]), mset(new_f[tag]), f"{nid}:lfail({tag})"))
            trans.append(Transition.make(
                mset(left.t_final[tag]), mset(right.entry(tag)),
                f"{nid}:lpass({tag})"))
        else:
            trans.append(Transition.make(
                mset(left.t_final[tag]), mset(new_t[tag]), f"{nid}:lpass({tag})"))
            trans.append(Transition.make(
                mset(left.f_final[tag]), mset(right.entry(tag)),
                f"{nid}:lfail({tag})"))
        trans.append(Transition.make(
            mset(right.f_final[tag]), mset(new_f[tag]), f"{nid}:rfail({tag})"))
        trans.append(Transition.make(
            mset(right.t_final[tag]), mset(new_t[tag]), f"{nid}:rpass({tag})"))
    # promotion: left stragglers restart into right on meeting a right agent
    for q1 in left.states:
        tag = left.state_tag[q1]
        tgt = right.entry(tag)
        for q2 in right.states:
            nt = Transition.make(mset(q1, q2), mset(tgt, q2),
                                 f"{nid}:promote({q1})")
            if not nt.is_identity():
                trans.append(nt)
    return _Tagged(states, state_tag, trans, left.inputs, left.leader_state,
                   new_f, new_t, tags)


def halting_combine_tree(tree: Node, i: int) -> Protocol:
    """Build a halting protocol for a boolean tree whose leaves are strict
    threshold atoms, via Greater-Sum parts and tagged concatenation."""
    leaves: list[Atom] = []

    def collect(n: Node) -> Node:
        if isinstance(n, Not):
            return Not(collect(n.child))
        if isinstance(n, And):
            return And(collect(n.left), collect(n.right))
        if isinstance(n, Or):
            return Or(collect(n.left), collect(n.right))
        leaves.append(n)
        return len(leaves) - 1  # type: ignore[return-value]

    indexed = collect(tree)
    parts = []
    for atom in leaves:
        if atom.kind != THRESHOLD:
            raise FormulaError("halting tree leaves must be threshold atoms")
        p, _ = _gs_for_threshold(atom, i)
        parts.append(p)
    return halting_boolean_combine(parts, indexed, i)


def _swap_outputs(p: Protocol) -> Protocol:
    f, t = p.simple_states()
    return Protocol(p.states, p.transitions, p.leaders, p.variables, p.inputs,
                    {f: 1, t: 0}, flavor=p.flavor)


def halting_boolean_combine(parts: list[Protocol], tree, i: int) -> Protocol:
    """Combine halting parts along a boolean tree (leaves are part indices).

    Negation swaps a part's outputs; and/or concatenate: the left protocol
    runs to its halt flag, then (depending on the connective and the flag)
    either the verdict is final or every agent is restarted into the right
    protocol, guided by input tags on every state.
    """
    for p in parts:
        if p.flavor != "halting-claimed":
            raise ProtocolError("parts must be halting protocols")
    if isinstance(tree, int):
        return parts[tree]
    if isinstance(tree, Not) and isinstance(tree.child, int):
        return _swap_outputs(parts[tree.child])

    variables = parts[0].variables
    for p in parts:
        if set(p.variables) != set(variables):
            raise ProtocolError("parts must share the variable set")
    tags = list(variables) + [BOX]
    counter = [0]

    def build(n) -> _Tagged:
        counter[0] += 1
        nid = f"n{counter[0]}"
        if isinstance(n, int):
            return _tag_leaf(parts[n], nid, tags)
        if isinstance(n, Not):
            inner = build(n.child)
            return _Tagged(inner.states, inner.state_tag, inner.trans,
                           inner.inputs, inner.leader_state,
                           inner.t_final, inner.f_final, tags)
        left = build(n.left)
        right = build(n.right)
        return _combine(left, right, isinstance(n, And), nid, tags)

    tagged = build(tree)
    states = tagged.states + [F, T]
    trans = list(tagged.trans)
    for tag in tags:
        trans.append(Transition.make(
            mset(tagged.f_final[tag]), mset(F), f"untag_f({tag})"))
        trans.append(Transition.make(
            mset(tagged.t_final[tag]), mset(T), f"untag_t({tag})"))
    return Protocol(states, trans, {tagged.leader_state: 1}, variables,
                    tagged.inputs, {F: 0, T: 1}, flavor="halting-claimed")


# -- fixed-size dispatcher ----------------------------------------------------

TOP = "top"
NOLEADER = "-"


def _inp(x: str) -> str:
    return f"in:{x}"


def _agent(i: int, x: str, q: str) -> str:
    return f"s{i}:{x}${q}"


def _leader(i: int, b: int, ql: str) -> str:
    return f"L{i}:{b}:[{ql}]"


def combine_fixed_sizes(parts: dict[int, Protocol], ell: int,
                        variables: tuple[str, ...]) -> Protocol:
    """One leader counts the population; whenever its estimate reaches i it
    restarts all agents into the size-i part and simulates that part's leader
    itself; at estimate ell everything floods to an accepting sink.
    Computes (|v| < ell) -> phi(v).

    A part for size 1 is optional; without one, single-input populations get
    no opinionated agents (acceptable when the protocol is only queried on
    populations of at least two inputs)."""
    for i in range(2, ell):
        if i not in parts:
            raise ProtocolError(f"missing part protocol for size {i}")
    sizes = sorted(i for i in parts if 1 <= i < ell)
    part_leader: dict[int, str] = {}
    for i in sizes:
        p = parts[i]
        if sum(p.leaders.values()) > 1:
            raise ProtocolError("parts must have at most one leader")
        part_leader[i] = next(iter(p.leaders), NOLEADER)

    states = [_inp(x) for x in variables] + [TOP]
    outputs: dict[str, int] = {}
    leader_states: dict[int, list[str]] = {}
    part_states: dict[int, list[str]] = {}
    if 1 not in parts:
        part_states[1] = ["idle"]
        part_leader[1] = NOLEADER
    for i in sizes:
        part_states[i] = parts[i].states
    for i in range(1, ell):
        for x in variables:
            for q in part_states[i]:
                states.append(_agent(i, x, q))
    ldrs: list[str] = []
    for i in range(0, ell + 1):
        if i in sizes:
            leader_states[i] = [_leader(i, b, ql)
                                for b in (0, 1) for ql in part_states[i]]
        else:
            leader_states[i] = [_leader(i, b, NOLEADER) for b in (0, 1)]
        ldrs += leader_states[i]
    states += ldrs
    outputs[TOP] = 1

    def part_output(i: int, q: str) -> int | None:
        if i not in parts:
            return None
        return parts[i].outputs.get(q)

    for i in range(1, ell):
        for x in variables:
            for q in part_states[i]:
                b = part_output(i, q)
                if b is not None:
                    outputs[_agent(i, x, q)] = b
    for i in range(0, ell + 1):
        for b in (0, 1):
            if i in sizes:
                for ql in part_states[i]:
                    pb = part_output(i, ql)
                    outputs[_leader(i, b, ql)] = pb if pb is not None else b
            else:
                outputs[_leader(i, b, NOLEADER)] = b

    trans: list[Transition] = []
    seen: set = set()

    def add(t: Transition) -> None:
        if t.is_identity():
            return
        key = (t.pre, t.post)
        if key in seen:
            return
        seen.add(key)
        trans.append(t)

    # flood transitions
    for q in states:
        if q != TOP:
            add(Transition.make(mset(TOP, q), mset(TOP, TOP), f"true({q})"))
    for b in (0, 1):
        for q in states:
            if q not in (TOP, _leader(ell, b, NOLEADER)):
                add(Transition.make(
                    mset(_leader(ell, b, NOLEADER), q), mset(TOP, TOP),
                    f"threshold({b},{q})"))

    # census and conversion
    def init_of(i: int, x: str) -> str:
        if i not in parts:
            return _agent(i, x, "idle")
        return _agent(i, x, parts[i].inputs[x])

    def ql_range(i: int) -> list[str]:
        return part_states[i] if i in sizes else [NOLEADER]

    for b in (0, 1):
        for x in variables:
            for i in range(0, ell):
                nxt_ql = part_leader.get(i + 1, NOLEADER)
                for ql in (ql_range(i) if i >= 1 else [NOLEADER]):
                    pre = mset(_inp(x), _leader(i, b, ql))
                    if i + 1 == ell:
                        post = mset(TOP, _leader(ell, b, NOLEADER))
                    else:
                        post = mset(init_of(i + 1, x), _leader(i + 1, b, nxt_ql))
                    add(Transition.make(pre, post, f"incr{i}({x},{b},{ql})"))
            for i in range(1, ell):
                for ql in ql_range(i):
                    for j in range(1, ell):
                        if j == i:
                            continue
                        for q in part_states[j]:
                            add(Transition.make(
                                mset(_agent(j, x, q), _leader(i, b, ql)),
                                mset(init_of(i, x), _leader(i, b, ql)),
                                f"conv{i}({x},{j},{q})"))
            for i in sizes:
                for ql in part_states[i]:
                    for q in part_states[i]:
                        pb = part_output(i, q)
                        if pb is None or pb == b:
                            continue
                        add(Transition.make(
                            mset(_agent(i, x, q), _leader(i, b, ql)),
                            mset(_agent(i, x, q), _leader(i, pb, ql)),
                            f"bool{i}({x},{q})"))

    # simulation of the parts (agent/agent, leader/agent, unary)
    for i in sizes:
        for tr in parts[i].transitions:
            flat = [q for q, k in tr.pre for _ in range(k)]
            post = [q for q, k in tr.post for _ in range(k)]
            if len(flat) == 1:
                for x in variables:
                    add(Transition.make(
                        mset(_agent(i, x, flat[0])), mset(_agent(i, x, post[0])),
                        f"sim{i}:{tr.label}({x})"))
                for b in (0, 1):
                    add(Transition.make(
                        mset(_leader(i, b, flat[0])), mset(_leader(i, b, post[0])),
                        f"lsim{i}:{tr.label}({b})"))
            else:
                pairs = [(flat[0], flat[1], post[0], post[1]),
                         (flat[1], flat[0], post[1], post[0])]
                for u, v, u2, v2 in pairs:
                    for x in variables:
                        for y in variables:
                            add(Transition.make(
                                mset(_agent(i, x, u), _agent(i, y, v)),
                                mset(_agent(i, x, u2), _agent(i, y, v2)),
                                f"sim{i}:{tr.label}({x},{y})"))
                        for b in (0, 1):
                            add(Transition.make(
                                mset(_leader(i, b, u), _agent(i, x, v)),
                                mset(_leader(i, b, u2), _agent(i, x, v2)),
                                f"lsim{i}:{tr.label}({x},{b})"))

    inputs = {x: _inp(x) for x in variables}
    for x in variables:
        outputs[_inp(x)] = 0
    return Protocol(states, trans, {_leader(0, 0, NOLEADER): 1}, variables,
                    inputs, outputs, flavor="general")


def remove_single_leader(p: Protocol, ell: int):
    """Leader elimination: every agent starts as a leader candidate simulating
    all leaders plus one regular agent; election merges population counts and
    the winner resets the population before simulating."""
    from .lazy import LeaderlessProtocol

    return LeaderlessProtocol(p, ell)


def compile_small(phi: Formula, ell: int):
    """Full small-input chain; returns the leaderless protocol for
    (|v| < ell) -> phi(v)."""
    if ell < 3:
        raise FormulaError("cutoff must be at least 3")
    parts = {i: build_part(phi, i) for i in range(2, ell)}
    parts[1] = build_size_one_part(phi)
    fixed = combine_fixed_sizes(parts, ell, phi.vars)
    return remove_single_leader(fixed, ell)


def build_size_one_part(phi: Formula) -> Protocol:
    """Halting protocol computing (phi | 1): the leader looks at the single
    input agent and halts on the precomputed verdict for that unit vector."""
    states = [f"w:{x}" for x in phi.vars] + ["seek", F, T]
    trans = []
    for x in phi.vars:
        verdict = T if evaluate(phi, {x: 1}) else F
        trans.append(Transition.make(
            mset("seek", f"w:{x}"), mset(verdict, f"w:{x}"), f"look({x})"))
    return Protocol(states, trans, {"seek": 1}, phi.vars,
                    {x: f"w:{x}" for x in phi.vars}, {F: 0, T: 1},
                    flavor="halting-claimed")


def build_part(phi: Formula, i: int) -> Protocol:
    """Halting protocol computing (phi | i): one Greater-Sum or remainder
    instance per atom, combined along phi's boolean structure."""
    tree, _ = normalize_formula(phi)
    parts: list[Protocol] = []

    def convert(n: Node):
        if isinstance(n, Not):
            return Not(convert(n.child))
        if isinstance(n, And):
            return And(convert(n.left), convert(n.right))
        if isinstance(n, Or):
            return Or(convert(n.left), convert(n.right))
        atom = n
        full = Atom(atom.kind,
                    tuple((x, dict(atom.coeffs).get(x, 0)) for x in phi.vars),
                    atom.bound, atom.modulus)
        if atom.kind == THRESHOLD:
            part, _ = _gs_for_threshold(full, i)
        elif atom.kind == MOD_THRESHOLD:
            part = build_mod_threshold_halting(full, i)
        else:
            raise FormulaError(f"unexpected atom kind {atom.kind}")
        parts.append(part)
        return len(parts) - 1

    indexed = convert(tree)
    return halting_boolean_combine(parts, indexed, i)
