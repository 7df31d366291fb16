"""Large-input constructions: atomic protocols with reversible dynamic
initialization (threshold and remainder), the input-dispatch combinator,
boolean combination with one helper per connective, k-way to 2-way
conversion, and helper removal.

The resulting protocol computes (|v| >= ell) -> phi(v) without leaders,
where ell is the number of helpers used before removal.
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
    ge_bound,
    normalize_remainder,
    normalize_threshold,
    reduce_mod_threshold,
)
from .protocol import (
    Configuration,
    MultiOutputProtocol,
    Protocol,
    ProtocolError,
    RDIProtocol,
    Transition,
    mset,
    mset_add,
)

F = "out:f"
T = "out:t"


def port(x: str) -> str:
    return f"in:{x}"


def num(d: int) -> str:
    if d == 0:
        return "n:0"
    return f"n:{'+' if d > 0 else '-'}{abs(d)}"


def num_tag(d: int, x: str) -> str:
    return f"{num(d)}@{x}"


def bits(d: int) -> list[int]:
    return [i for i in range(d.bit_length()) if d & (1 << i)]


def canonical_rep(d: int, n: int) -> dict[int, int]:
    """Binary decomposition of d into signed power-of-two values (0 -> {0})."""
    if abs(d) >= 2 ** (n + 1):
        raise FormulaError(f"value {d} does not fit canonical representation n={n}")
    if d == 0:
        return {0: 1}
    sign = 1 if d > 0 else -1
    return {sign * 2**i: 1 for i in bits(abs(d))}


def _rep_mset(d: int, n: int) -> tuple[dict[str, int], int]:
    rep = canonical_rep(d, n)
    return {num(p): k for p, k in rep.items()}, sum(rep.values())


def _pow_n(norm: int) -> int:
    n = 0
    while 2**n <= norm:
        n += 1
    return n


def build_threshold_rdi(a: dict[str, int], b: int) -> RDIProtocol:
    """Atomic protocol for a.v >= b (b > 0) under reversible dynamic
    initialization, using signed power-of-two value states."""
    if b <= 0:
        raise FormulaError("threshold bound must be positive; normalize first")
    variables = tuple(a.keys())
    norm = max([abs(c) for c in a.values()] + [b])
    n = _pow_n(norm)
    numeric = [0] + [s * 2**i for s in (1, -1) for i in range(n + 1)]
    states = [port(x) for x in variables] + [num(d) for d in numeric] + [
        num_tag(d, x) for d in numeric for x in variables] + [F, T]
    t_inf: list[Transition] = []
    t_dag: list[Transition] = []

    for x in variables:
        rep, size = _rep_mset(a[x], n)
        pre = mset_add({port(x): 1}, {num(0): size})
        post = mset_add({num_tag(0, x): 1}, rep)
        t_inf.append(Transition.make(pre, post, f"add({x})"))
        for q in (F, T):
            t_dag.append(Transition.make(
                mset_add(mset_add({num_tag(0, x): 1}, rep), {q: 1}),
                mset_add({port(x): 1, F: 1}, {num(0): size}),
                f"add_rev({x},{q})"))
    for s in (1, -1):
        for i in range(n):
            t_inf.append(Transition.make(
                {num(s * 2**i): 2}, mset(num(s * 2 ** (i + 1)), num(0)),
                f"up({s * 2**i})"))
        for i in range(1, n + 1):
            t_inf.append(Transition.make(
                mset(num(s * 2**i), num(0)), {num(s * 2 ** (i - 1)): 2},
                f"down({s * 2**i})"))
    for i in range(n + 1):
        for q in (F, T):
            t_inf.append(Transition.make(
                mset(num(2**i), num(-(2**i)), q), mset_add({num(0): 2}, {F: 1}),
                f"cancel({2**i},{q})"))
            t_dag.append(Transition.make(
                mset_add({num(0): 2}, {q: 1}),
                mset(num(2**i), num(-(2**i)), F),
                f"cancel_rev({2**i},{q})"))
    for p in numeric:
        for q in numeric:
            if p == q:
                continue
            for x in variables:
                t_inf.append(Transition.make(
                    mset(num(p), num_tag(q, x)), mset(num_tag(p, x), num(q)),
                    f"swap({p},{q},{x})"))
    rep_b, _ = _rep_mset(b, n)
    t_inf.append(Transition.make(
        mset_add(rep_b, {F: 1}), mset_add(rep_b, {T: 1}), "equal"))
    t_inf.append(Transition.make(mset(F, T), {F: 2}, "false"))
    t_dag.append(Transition.make({T: 1}, {F: 1}, "reset"))

    leaders = {num(0): 2 * n, F: 1}
    inputs = {x: port(x) for x in variables}
    return RDIProtocol(states, t_inf, t_dag, leaders, variables, inputs,
                       {F: 0, T: 1})


def build_remainder_rdi(a: dict[str, int], b: int, m: int) -> RDIProtocol:
    """Atomic protocol for (a.v mod m) >= b (0 < b < m) under reversible
    dynamic initialization, using nonnegative power-of-two value states."""
    if not 0 < b < m:
        raise FormulaError("remainder bound must satisfy 0 < b < m")
    if any(c < 0 or c >= m for c in a.values()):
        raise FormulaError("remainder coefficients must lie in [0, m)")
    variables = tuple(a.keys())
    norm = max(list(a.values()) + [b, m])
    n = _pow_n(norm)
    numeric = [0] + [2**i for i in range(n + 1)]
    states = [port(x) for x in variables] + [num(d) for d in numeric] + [
        num_tag(d, x) for d in numeric for x in variables] + [F, T]
    t_inf: list[Transition] = []
    t_dag: list[Transition] = []

    for x in variables:
        rep, size = _rep_mset(a[x], n)
        t_inf.append(Transition.make(
            mset_add({port(x): 1}, {num(0): size}),
            mset_add({num_tag(0, x): 1}, rep),
            f"add({x})"))
        for q in (F, T):
            t_dag.append(Transition.make(
                mset_add(mset_add({num_tag(0, x): 1}, rep), {q: 1}),
                mset_add({port(x): 1, F: 1}, {num(0): size}),
                f"add_rev({x},{q})"))
    for i in range(n):
        t_inf.append(Transition.make(
            {num(2**i): 2}, mset(num(2 ** (i + 1)), num(0)), f"up({2**i})"))
    for i in range(1, n + 1):
        t_inf.append(Transition.make(
            mset(num(2**i), num(0)), {num(2 ** (i - 1)): 2}, f"down({2**i})"))
    rep_m, size_m = _rep_mset(m, n)
    for q in (F, T):
        t_inf.append(Transition.make(
            mset_add(rep_m, {q: 1}), mset_add({num(0): size_m}, {F: 1}),
            f"modulo({q})"))
        t_dag.append(Transition.make(
            mset_add({num(0): size_m}, {q: 1}), mset_add(rep_m, {F: 1}),
            f"modulo_rev({q})"))
    for p in numeric:
        for q in numeric:
            if p == q:
                continue
            for x in variables:
                t_inf.append(Transition.make(
                    mset(num(p), num_tag(q, x)), mset(num_tag(p, x), num(q)),
                    f"swap({p},{q},{x})"))
    rep_b, _ = _rep_mset(b, n)
    t_inf.append(Transition.make(
        mset_add(rep_b, {F: 1}), mset_add(rep_b, {T: 1}), "equal"))
    t_inf.append(Transition.make(mset(F, T), {F: 2}, "false"))
    t_dag.append(Transition.make({T: 1}, {F: 1}, "reset"))

    leaders = {num(0): 2 * n, F: 1}
    inputs = {x: port(x) for x in variables}
    return RDIProtocol(states, t_inf, t_dag, leaders, variables, inputs,
                       {F: 0, T: 1})


def numeric_value(state: str) -> int:
    """Value carried by a numeric state (tagged or not); 0 for everything else."""
    if not state.startswith("n:"):
        return 0
    body = state[2:].split("@")[0]
    return int(body)


def config_value(rdi: RDIProtocol, a: dict[str, int], conf: Configuration) -> int:
    """val(C): port agents count at their coefficient, numeric agents at face value."""
    total = 0
    for q, k in conf.items():
        if q.startswith("in:"):
            total += a[q[3:]] * k
        else:
            total += numeric_value(q) * k
    return total


# -- dispatch combinator ------------------------------------------------------


def bar(x: str) -> str:
    return f"{x}~"


def und(x: str) -> str:
    return f"{x}_"


def tilde_transform(atom: Atom, k: int) -> Atom:
    """Coefficient split so that phi~(hi, lo) = phi(k*hi + lo)."""
    coeffs = []
    for x, c in atom.coeffs:
        coeffs.append((bar(x), k * c))
        coeffs.append((und(x), c))
    return Atom(atom.kind, tuple(coeffs), atom.bound, atom.modulus)


def helper(x: str) -> str:
    return f"h:{x}"


def _prefix_transition(t: Transition, pfx: str) -> Transition:
    return Transition.make({pfx + q: c for q, c in t.pre},
                           {pfx + q: c for q, c in t.post}, f"{pfx}{t.label}")


def _guard(t: Transition, g: str, tag: str) -> Transition:
    return Transition.make(mset_add(dict(t.pre), {g: 1}),
                           mset_add(dict(t.post), {g: 1}), f"{t.label}^{tag}")


def combine_multi_output(rdis: list[RDIProtocol], variables: tuple[str, ...],
                         k: int) -> MultiOutputProtocol:
    """Feed one population into k atomic protocols: k agents in a port merge
    into the hi-ports of all k protocols; a single agent plus k-1 helpers
    split into the lo-ports.  Initialization transitions are reversible while
    any port agent remains; T_dag transitions are guarded the same way."""
    if k != len(rdis) or k < 2:
        raise ProtocolError("dispatch needs k >= 2 protocols")
    states = [port(x) for x in variables] + [helper(x) for x in variables]
    trans: list[Transition] = []
    leaders: dict[str, int] = {helper(x): (k - 1) ** 2 for x in variables}
    output_maps: list[dict[str, int]] = []
    for i, rdi in enumerate(rdis):
        pfx = f"a{i}:"
        states += [pfx + q for q in rdi.states]
        for t in rdi.t_inf:
            trans.append(_prefix_transition(t, pfx))
        for t in rdi.t_dag:
            for y in variables:
                trans.append(_guard(_prefix_transition(t, pfx), port(y), y))
        leaders = mset_add(leaders, {pfx + q: c for q, c in rdi.leaders.items()})
        output_maps.append({pfx + q: bit for q, bit in rdi.outputs.items()})
    dispatch: list[Transition] = []
    for x in variables:
        hi_posts = mset(*[f"a{i}:" + rdis[i].inputs[bar(x)] for i in range(k)])
        lo_posts = mset(*[f"a{i}:" + rdis[i].inputs[und(x)] for i in range(k)])
        dispatch.append(Transition.make({port(x): k}, hi_posts, f"hi({x})"))
        dispatch.append(Transition.make(
            mset_add({port(x): 1}, {helper(x): k - 1}), lo_posts, f"lo({x})"))
    trans += dispatch
    for s in dispatch:
        rev = Transition(s.post, s.pre, f"{s.label}_rev")
        for y in variables:
            trans.append(_guard(rev, port(y), y))
    inputs = {x: port(x) for x in variables}
    return MultiOutputProtocol(states, trans, leaders, variables, inputs,
                               output_maps, flavor="general")


def single_atom_mop(rdi: RDIProtocol) -> MultiOutputProtocol:
    """Degenerate one-atom case: no dispatch; ports are used directly and
    T_dag is guarded by the presence of un-consumed port agents."""
    trans = list(rdi.t_inf)
    for t in rdi.t_dag:
        for y in rdi.variables:
            trans.append(_guard(t, rdi.inputs[y], y))
    return MultiOutputProtocol(rdi.states, trans, rdi.leaders, rdi.variables,
                               rdi.inputs, [dict(rdi.outputs)], flavor="general")


# -- boolean combination ------------------------------------------------------


def boolean_combine(mop: MultiOutputProtocol, tree: Node,
                    atom_index: dict[Atom, int]) -> Protocol:
    """Evaluate the boolean structure over the multi-output protocol's output
    pairs, adding one fresh output pair and one helper per connective."""
    states = list(mop.states)
    trans = list(mop.transitions)
    leaders = dict(mop.leaders)
    counter = [0]

    def proj_pair(i: int) -> tuple[str, str]:
        m = mop.projection_outputs(i)
        t_states = [q for q, bit in m.items() if bit == 1]
        f_states = [q for q, bit in m.items() if bit == 0]
        if len(t_states) != 1 or len(f_states) != 1:
            raise ProtocolError("output projection is not simple")
        return t_states[0], f_states[0]

    def fresh_pair() -> tuple[str, str]:
        nid = counter[0]
        counter[0] += 1
        tq, fq = f"bool{nid}:t", f"bool{nid}:f"
        states.extend([tq, fq])
        leaders[fq] = leaders.get(fq, 0) + 1
        return tq, fq

    def build(node: Node) -> tuple[str, str]:
        if isinstance(node, Atom):
            return proj_pair(atom_index[node])
        if isinstance(node, Not):
            ct, cf = build(node.child)
            tq, fq = fresh_pair()
            for b1 in (ct, cf):
                res = tq if b1 == cf else fq
                for b in (tq, fq):
                    if b == res:
                        continue
                    trans.append(Transition.make(
                        mset(b1, b), mset(b1, res), f"not({b1},{b})"))
            return tq, fq
        lt, lf = build(node.left)
        rt, rf = build(node.right)
        tq, fq = fresh_pair()
        is_and = isinstance(node, And)
        for b1 in (lt, lf):
            for b2 in (rt, rf):
                val = (b1 == lt and b2 == rt) if is_and else (b1 == lt or b2 == rt)
                res = tq if val else fq
                for b in (tq, fq):
                    if b == res:
                        continue
                    trans.append(Transition.make(
                        mset(b1, b2, b), mset(b1, b2, res), f"op({b1},{b2},{b})"))
        return tq, fq

    root_t, root_f = build(tree)
    if isinstance(tree, Atom):
        outputs = {root_f: 0, root_t: 1}
        return Protocol(states, trans, leaders, mop.variables, mop.inputs,
                        outputs, flavor="simple")
    outputs = {root_f: 0, root_t: 1}
    return Protocol(states, trans, leaders, mop.variables, mop.inputs, outputs,
                    flavor="simple")


# -- k-way to 2-way -----------------------------------------------------------


def kway_to_2way(p: Protocol) -> Protocol:
    """Replace each k-way transition (k > 2) by a reversible gathering gadget:
    a head agent collects the remaining pre-agents one by one into waiting
    states (reversibly), then commits and releases the post-agents."""
    states = list(p.states)
    trans: list[Transition] = []
    for idx, t in enumerate(p.transitions):
        if t.width <= 2:
            trans.append(t)
            continue
        pre = sorted(q for q, c in t.pre for _ in range(c))
        post = sorted(q for q, c in t.post for _ in range(c))
        k = len(pre)
        gid = f"g{idx}"
        head = {j: f"gad:{gid}:h{j}" for j in range(2, k)}
        wait = {j: f"gad:{gid}:w{j}" for j in range(2, k + 1)}
        rel = {j: f"gad:{gid}:r{j}" for j in range(2, k)}
        states += list(head.values()) + list(wait.values()) + list(rel.values())
        trans.append(Transition.make(
            mset(pre[0], pre[1]), mset(head[2], wait[2]), f"{gid}:grab2"))
        trans.append(Transition.make(
            mset(head[2], wait[2]), mset(pre[0], pre[1]), f"{gid}:drop2"))
        for j in range(2, k - 1):
            trans.append(Transition.make(
                mset(head[j], pre[j]), mset(head[j + 1], wait[j + 1]),
                f"{gid}:grab{j + 1}"))
            trans.append(Transition.make(
                mset(head[j + 1], wait[j + 1]), mset(head[j], pre[j]),
                f"{gid}:drop{j + 1}"))
        trans.append(Transition.make(
            mset(head[k - 1], pre[k - 1]), mset(rel[k - 1], post[k - 1]),
            f"{gid}:commit"))
        for j in range(k - 1, 2, -1):
            trans.append(Transition.make(
                mset(rel[j], wait[j]), mset(rel[j - 1], post[j - 1]),
                f"{gid}:rel{j}"))
        trans.append(Transition.make(
            mset(rel[2], wait[2]), mset(post[0], post[1]), f"{gid}:rel2"))
    return Protocol(states, trans, p.leaders, p.variables, p.inputs,
                    dict(p.outputs), flavor=p.flavor)


# -- helper removal and full chain --------------------------------------------


def remove_helpers(p: Protocol):
    """Replace the helper multiset by a census phase over the input agents;
    returns a rule-based leaderless protocol computing (|v| >= ell) -> phi."""
    from .lazy import HelperFreeProtocol

    return HelperFreeProtocol(p)


def normalize_formula(phi: Formula) -> tuple[Node, list[Atom]]:
    """Rewrite all atoms into protocol-ready form: thresholds to positive
    >=-bounds (with negation pushed into the tree) and remainders to
    mod-threshold combinations.  Returns the tree and deduplicated atoms."""
    atoms: list[Atom] = []

    def note(a: Atom) -> Atom:
        if a not in atoms:
            atoms.append(a)
        return a

    def walk(node: Node) -> Node:
        if isinstance(node, Not):
            return Not(walk(node.child))
        if isinstance(node, And):
            return And(walk(node.left), walk(node.right))
        if isinstance(node, Or):
            return Or(walk(node.left), walk(node.right))
        atom = node
        if atom.kind == THRESHOLD:
            norm, neg = normalize_threshold(atom)
            norm = note(norm)
            return Not(norm) if neg else norm
        if atom.kind == MOD_THRESHOLD:
            return note(reduce_mod_threshold(atom))

        def note_tree(n: Node) -> Node:
            if isinstance(n, Not):
                return Not(note_tree(n.child))
            if isinstance(n, And):
                return And(note_tree(n.left), note_tree(n.right))
            return note(n)

        return note_tree(normalize_remainder(atom))

    tree = walk(phi.node)
    return tree, atoms


def _build_rdi(atom: Atom) -> RDIProtocol:
    if atom.kind == THRESHOLD:
        return build_threshold_rdi(dict(atom.coeffs), ge_bound(atom))
    if atom.kind == MOD_THRESHOLD:
        return build_remainder_rdi(dict(atom.coeffs), atom.bound, atom.modulus)
    raise FormulaError(f"cannot build atomic protocol for {atom.kind}")


def boolean_stage(phi: Formula) -> Protocol:
    """compile_large up to (and including) boolean combination: a simple
    protocol with helpers whose helper count defines the cutoff."""
    return boolean_stage_detail(phi)[0]


def boolean_stage_detail(
    phi: Formula,
) -> tuple[Protocol, MultiOutputProtocol, list[RDIProtocol]]:
    """Like boolean_stage, also returning the intermediate multi-output
    protocol and the atomic protocols (for stage accounting)."""
    tree, atoms = normalize_formula(phi)
    variables = phi.vars
    k = len(atoms)
    if k == 0:
        raise FormulaError("formula has no atoms")
    atom_index = {a: i for i, a in enumerate(atoms)}
    if k == 1:
        atom = atoms[0]
        if set(dict(atom.coeffs)) != set(variables):
            atom = Atom(atom.kind,
                        tuple((x, dict(atom.coeffs).get(x, 0)) for x in variables),
                        atom.bound, atom.modulus)
            tree = _replace_atoms(tree, atoms[0], atom)
            atom_index = {atom: 0}
        rdis = [_build_rdi(atom)]
        mop = single_atom_mop(rdis[0])
    else:
        rdis = []
        for a in atoms:
            full = Atom(a.kind,
                        tuple((x, dict(a.coeffs).get(x, 0)) for x in variables),
                        a.bound, a.modulus)
            rdis.append(_build_rdi(tilde_transform(full, k)))
        mop = combine_multi_output(rdis, variables, k)
    return boolean_combine(mop, tree, atom_index), mop, rdis


def _replace_atoms(node: Node, old: Atom, new: Atom) -> Node:
    if isinstance(node, Not):
        return Not(_replace_atoms(node.child, old, new))
    if isinstance(node, And):
        return And(_replace_atoms(node.left, old, new),
                   _replace_atoms(node.right, old, new))
    if isinstance(node, Or):
        return Or(_replace_atoms(node.left, old, new),
                  _replace_atoms(node.right, old, new))
    return new if node == old else node


def compile_large(phi: Formula):
    """Full large-input chain; returns (leaderless protocol, cutoff ell)."""
    combined = boolean_stage(phi)
    ell = sum(combined.leaders.values())
    two_way = kway_to_2way(combined)
    return remove_helpers(two_way), ell
