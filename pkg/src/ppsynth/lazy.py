"""Rule-based protocols with huge state spaces.

These classes implement the :class:`~.protocol.ProtocolBase` interface by
generating, for a given support, exactly the transitions whose pre-states lie
inside it.  States are materialized on demand and remembered in a registry,
and transitions are generated and cached per unordered state pair, so
exploration and simulation never touch the (potentially astronomical) full
state set and pay only for state pairs they have not seen before.

Contents: helper removal via a census phase (:class:`HelperFreeProtocol`),
opinion doubling to full output (:class:`DoubledProtocol`), the synchronous
product with conjunctive output (:class:`ProductProtocol`), and leader
elimination via leader-candidate tuples (:class:`LeaderlessProtocol`).
"""

from __future__ import annotations

from .protocol import (
    Protocol,
    ProtocolBase,
    ProtocolError,
    Transition,
    mset,
    protocol_from_json_obj,
)


def _consensus(bits) -> int | None:
    seen = {b for b in bits if b is not None}
    if len(seen) == 1:
        return seen.pop()
    return None


def _dedup_sorted(trans: list[Transition]) -> list[Transition]:
    seen = set()
    out = []
    for t in sorted(trans, key=Transition.sort_key):
        key = (t.pre, t.post)
        if key in seen or t.is_identity():
            continue
        seen.add(key)
        out.append(t)
    return out


def _pair_index(p: Protocol):
    """2-way transitions as ordered rules u,v -> u',v' plus unary rules."""
    by_first: dict[str, list[tuple[str, str, str, str]]] = {}
    unary: dict[str, list[tuple[str, str]]] = {}
    for t in p.transitions:
        flat = [q for q, k in t.pre for _ in range(k)]
        post = [q for q, k in t.post for _ in range(k)]
        if len(flat) == 1:
            unary.setdefault(flat[0], []).append((post[0], t.label))
        elif len(flat) == 2:
            for (u, v, u2, v2) in ((flat[0], flat[1], post[0], post[1]),
                                   (flat[1], flat[0], post[1], post[0])):
                by_first.setdefault(u, []).append((v, u2, v2, t.label))
        else:
            raise ProtocolError("rule-based lifting requires a 2-way protocol")
    return by_first, unary


def _flatten(side: tuple[tuple[str, int], ...]) -> list[str]:
    return [q for q, k in side for _ in range(k)]


_CAND_CACHE_CAP = 20_000


class LazyProtocol(ProtocolBase):
    """Common plumbing: a registry from generated state names to payloads and
    a per-state-pair transition cache.

    Subclasses implement :meth:`_pair_rules`, which must emit exactly the
    transitions whose pre-support is {u, v} (for u != v) or within {u} (for
    u == v); :meth:`candidates` is then assembled from cached pair lists, so
    successive supports that share most of their states share almost all of
    the generation work.
    """

    def __init__(self):
        self._registry: dict[str, tuple] = {}
        self._cand_cache: dict[frozenset[str], list[Transition]] = {}
        self._pair_cache: dict[tuple[str, str], list[Transition]] = {}

    def _reg(self, name: str, payload: tuple) -> str:
        self._registry[name] = payload
        return name

    def candidates(self, support: frozenset[str]) -> list[Transition]:
        hit = self._cand_cache.get(support)
        if hit is None:
            if len(self._cand_cache) >= _CAND_CACHE_CAP:
                self._cand_cache.clear()
            names = sorted(support)
            hit = []
            pair_candidates = self.pair_candidates
            for i, u in enumerate(names):
                for j in range(i, len(names)):
                    hit.extend(pair_candidates(u, names[j]))
            self._cand_cache[support] = hit
        return hit

    def pair_candidates(self, u: str, v: str) -> list[Transition]:
        key = (u, v) if u <= v else (v, u)
        hit = self._pair_cache.get(key)
        if hit is None:
            hit = _dedup_sorted(self._pair_rules(*key))
            self._pair_cache[key] = hit
        return hit

    def _pair_rules(self, u: str, v: str) -> list[Transition]:
        raise NotImplementedError

    def transition_count(self) -> int | None:
        return None

    def max_width(self) -> int:
        return 2


class HelperFreeProtocol(LazyProtocol):
    """Helper removal.  Agents first census the population up to ell (states
    (x, i), all with output 1); once some agent reaches ell, agents convert to
    pair states carrying one regular agent and one helper of the original
    protocol, and pairs of pairs simulate the original transitions.

    Computes (|v| >= ell) -> phi(v); leaderless.
    """

    kind = "helper_free"

    def __init__(self, base: Protocol):
        super().__init__()
        if base.max_width() > 2:
            raise ProtocolError("helper removal requires a 2-way protocol")
        if not base.leaders:
            raise ProtocolError("protocol has no helpers to remove")
        self.base = base
        self.helpers = [q for q in sorted(base.leaders) for _ in range(base.leaders[q])]
        self.ell = len(self.helpers)
        self.variables = base.variables
        self.leaders = {}
        self.flavor = "general"
        self._by_first, self._unary = _pair_index(base)

    def _cnt(self, x: str, i: int) -> str:
        return self._reg(f"cnt:{x}:{i}", ("cnt", x, i))

    def _pair(self, a: str, b: str) -> str:
        a, b = sorted((a, b))
        return self._reg(f"pr[{a}|{b}]", ("pair", a, b))

    def _boot(self, y: str, i: int) -> str:
        return self._pair(self.base.inputs[y], self.helpers[i - 1])

    def input_state(self, x: str) -> str:
        return self._cnt(x, 1)

    def output(self, q: str) -> int | None:
        tag = self._registry[q]
        if tag[0] == "cnt":
            return 1
        _, a, b = tag
        return _consensus((self.base.output(a), self.base.output(b)))

    def state_count(self) -> int:
        nq = len(self.base.states)
        return self.ell * len(self.variables) + nq * (nq + 1) // 2

    def _pair_rules(self, u: str, v: str) -> list[Transition]:
        tu = self._registry[u]
        tv = self._registry[v]
        out: list[Transition] = []
        if u == v:
            if tu[0] == "cnt":
                self._census(u, tu, u, tu, out)
                # with a single helper, a lone agent can adopt it by itself
                (_, x, i) = tu
                if i == self.ell == 1:
                    out.append(Transition.make(
                        mset(u), mset(self._boot(x, 1)), f"boot({x})"))
            else:
                out += self._simulate(u, u, [tu[1], tu[2], tu[1], tu[2]])
                self._pair_unary(u, tu, out)
            return out
        for (a, ta, b, tb) in ((u, tu, v, tv), (v, tv, u, tu)):
            if ta[0] == "cnt" and tb[0] == "cnt":
                self._census(a, ta, b, tb, out)
            elif ta[0] == "pair" and tb[0] == "cnt":
                (_, y, j) = tb
                out.append(Transition.make(
                    mset(a, b), mset(a, self._boot(y, j)), f"recruit({y},{j})"))
        if tu[0] == "pair" and tv[0] == "pair":
            out += self._simulate(u, v, [tu[1], tu[2], tv[1], tv[2]])
        return out

    def _census(self, n1, t1, n2, t2, out) -> None:
        (_, x, i) = t1
        (_, y, j) = t2
        if i == j and i < self.ell:
            out.append(Transition.make(
                mset(n1, n2), mset(self._cnt(x, i + 1), n2),
                f"count({x},{y},{i})"))
        if i == self.ell:
            out.append(Transition.make(
                mset(n1, n2),
                mset(self._boot(x, self.ell), self._boot(y, j)),
                f"init({x},{y},{j})"))

    def _pair_unary(self, n1, tag, out) -> None:
        (_, a, b) = tag
        for q, other in ((a, b), (b, a)):
            for (q2, lbl) in self._unary.get(q, []):
                t = Transition.make(
                    mset(n1), mset(self._pair(q2, other)), f"sim1:{lbl}")
                if not t.is_identity():
                    out.append(t)
        # the two carried agents may also interact with each other
        for (v, u2, v2, lbl) in self._by_first.get(a, []):
            if v != b:
                continue
            t = Transition.make(mset(n1), mset(self._pair(u2, v2)),
                                f"simin:{lbl}")
            if not t.is_identity():
                out.append(t)

    def _simulate(self, n1: str, n2: str, pool: list[str]) -> list[Transition]:
        out = []
        pre2 = mset(n1, n2)
        for qi in range(4):
            u = pool[qi]
            for (v, u2, v2, lbl) in self._by_first.get(u, []):
                rest = pool[:qi] + pool[qi + 1:]
                if v not in rest:
                    continue
                rest2 = list(rest)
                rest2.remove(v)
                result = sorted(rest2 + [u2, v2])
                for split in _pair_splits(result):
                    (p1, p2), (p3, p4) = split
                    t = Transition.make(
                        pre2, mset(self._pair(p1, p2), self._pair(p3, p4)),
                        f"sim2:{lbl}")
                    if not t.is_identity():
                        out.append(t)
            for (q2, lbl) in self._unary.get(u, []):
                rest = pool[:qi] + pool[qi + 1:]
                result = sorted(rest + [q2])
                for split in _pair_splits(result):
                    (p1, p2), (p3, p4) = split
                    t = Transition.make(
                        pre2, mset(self._pair(p1, p2), self._pair(p3, p4)),
                        f"sim1x:{lbl}")
                    if not t.is_identity():
                        out.append(t)
        return out

    def to_json_obj(self) -> dict:
        return {"kind": self.kind, "base": self.base.to_json_obj()}


def _pair_splits(four: list[str]):
    """All ways to split a sorted list of 4 states into two unordered pairs."""
    a, b, c, d = four
    splits = {((a, b), (c, d)), ((a, c), (b, d)), ((a, d), (b, c))}
    return sorted(splits)


class DoubledProtocol(LazyProtocol):
    """Full-output conversion for a leaderless protocol that stabilizes with
    at least one opinionated agent: every state carries an opinion bit,
    opinionated agents snap their bit to their own opinion, and agents whose
    bit matches their opinion drag everyone else's bit along."""

    kind = "doubled"

    def __init__(self, base: ProtocolBase):
        super().__init__()
        if base.leaders:
            raise ProtocolError("opinion doubling requires a leaderless protocol")
        if base.max_width() is not None and base.max_width() > 2:
            raise ProtocolError("opinion doubling requires a 2-way protocol")
        self.base = base
        self.variables = base.variables
        self.leaders = {}
        self.flavor = "full-output"

    def _st(self, b: int, q: str) -> str:
        return self._reg(f"d{b}:{q}", (b, q))

    def input_state(self, x: str) -> str:
        return self._st(0, self.base.input_state(x))

    def output(self, q: str) -> int:
        return self._registry[q][0]

    def state_count(self) -> int:
        return 2 * self.base.state_count()

    def _lift2(self, t: Transition, bu: int, qu: str, bv: int, qv: str, out) -> None:
        """Lift base 2-way rule t onto two bit-carrying agents, with the
        first agent in each role assignment playing each rule orientation."""
        flat = _flatten(t.pre)
        post = _flatten(t.post)
        if len(flat) != 2:
            raise ProtocolError("opinion doubling requires a 2-way protocol")
        for (b1, q1, b2, q2) in ((bu, qu, bv, qv), (bv, qv, bu, qu)):
            for (ru, rv, u2, v2) in ((flat[0], flat[1], post[0], post[1]),
                                     (flat[1], flat[0], post[1], post[0])):
                if (q1, q2) != (ru, rv):
                    continue
                combos = ([(b1, b1)] if b1 == b2
                          else [(d, e) for d in (0, 1) for e in (0, 1)])
                for d, e in combos:
                    nt = Transition.make(
                        mset(self._st(b1, q1), self._st(b2, q2)),
                        mset(self._st(d, u2), self._st(e, v2)),
                        f"{t.label}~{b1}{b2}{d}{e}")
                    if not nt.is_identity():
                        out.append(nt)

    def _pair_rules(self, u: str, v: str) -> list[Transition]:
        bu, qu = self._registry[u]
        bv, qv = self._registry[v]
        out: list[Transition] = []
        base = self.base
        if u == v:
            for t in base.pair_candidates(qu, qu):
                flat = _flatten(t.pre)
                if len(flat) == 1:
                    nt = Transition.make(
                        mset(u), mset(self._st(bu, _flatten(t.post)[0])),
                        f"{t.label}~{bu}")
                    if not nt.is_identity():
                        out.append(nt)
                else:
                    self._lift2(t, bu, qu, bu, qu, out)
            ob = base.output(qu)
            if ob is not None and bu != ob:
                out.append(Transition.make(
                    mset(u), mset(self._st(ob, qu)), f"snap({qu})"))
            return out
        for t in base.pair_candidates(qu, qv):
            if len(_flatten(t.pre)) == 1:
                continue  # unary base rules belong to the diagonal
            self._lift2(t, bu, qu, bv, qv, out)
        # opinion propagation between a witness and a disagreeing agent
        for (bw, qw, b2, q2, n2) in ((bu, qu, bv, qv, v), (bv, qv, bu, qu, u)):
            if b2 == bw:
                continue
            if base.output(qw) == bw:
                out.append(Transition.make(
                    mset(self._st(bw, qw), n2),
                    mset(self._st(bw, qw), self._st(bw, q2)),
                    f"drag({qw},{q2},{b2})"))
        return out

    def to_json_obj(self) -> dict:
        return {"kind": self.kind, "base": self.base.to_json_obj()}


class ProductProtocol(LazyProtocol):
    """Interleaved product of two leaderless full-output protocols; each step
    advances one component, and an agent's output is the conjunction of its
    component outputs."""

    kind = "product"

    def __init__(self, left: ProtocolBase, right: ProtocolBase):
        super().__init__()
        if left.leaders or right.leaders:
            raise ProtocolError("product requires leaderless components")
        if left.variables != right.variables:
            raise ProtocolError("product components must share variables")
        for comp in (left, right):
            if comp.max_width() is not None and comp.max_width() > 2:
                raise ProtocolError("product requires 2-way components")
        self.left = left
        self.right = right
        self.variables = left.variables
        self.leaders = {}
        self.flavor = "full-output"

    def _st(self, qa: str, qb: str) -> str:
        return self._reg(f"<{qa}>*<{qb}>", (qa, qb))

    def input_state(self, x: str) -> str:
        return self._st(self.left.input_state(x), self.right.input_state(x))

    def output(self, q: str) -> int | None:
        qa, qb = self._registry[q]
        ba = self.left.output(qa)
        bb = self.right.output(qb)
        if ba is None or bb is None:
            return None
        return ba & bb

    def state_count(self) -> int:
        return self.left.state_count() * self.right.state_count()

    def _pair_rules(self, u: str, v: str) -> list[Transition]:
        pu = self._registry[u]
        pv = self._registry[v]
        out: list[Transition] = []
        for side in (0, 1):
            comp = self.left if side == 0 else self.right
            a1, a2 = pu[side], pv[side]

            def make(pair, new):
                if side == 0:
                    return self._st(new, pair[1])
                return self._st(pair[0], new)

            for t in comp.pair_candidates(a1, a2):
                flat = _flatten(t.pre)
                post = _flatten(t.post)
                if len(flat) == 1:
                    if u != v:
                        continue  # unary component rules belong to the diagonal
                    nt = Transition.make(
                        mset(u), mset(make(pu, post[0])), f"{side}:{t.label}")
                    if not nt.is_identity():
                        out.append(nt)
                    continue
                if len(flat) != 2:
                    raise ProtocolError("product requires 2-way components")
                for (p1, n1, p2, n2) in ((pu, u, pv, v), (pv, v, pu, u)):
                    for (ru, rv, u2, v2) in ((flat[0], flat[1], post[0], post[1]),
                                             (flat[1], flat[0], post[1], post[0])):
                        if (p1[side], p2[side]) != (ru, rv):
                            continue
                        nt = Transition.make(
                            mset(n1, n2), mset(make(p1, u2), make(p2, v2)),
                            f"{side}:{t.label}")
                        if not nt.is_identity():
                            out.append(nt)
        return out

    def to_json_obj(self) -> dict:
        return {"kind": self.kind,
                "left": self.left.to_json_obj(),
                "right": self.right.to_json_obj()}


FROZEN = "F"
ACTIVE = "A"


class LeaderlessProtocol(LazyProtocol):
    """Leader elimination for a protocol with leaders computing
    (|v| < ell) -> phi.  Every agent starts as a leader candidate simulating
    all leaders plus one regular agent and counting the population it has
    absorbed; candidates fight pairwise, the winner adds the loser's count and
    resets its simulation while the loser becomes a frozen regular agent.
    A leader whose reset counter has caught up with its population count
    simulates the original protocol against active agents; meeting an active
    agent before that freezes it back to its initial state.  When absorbed
    counts ever sum to ell the population is at least ell and everything
    floods to an accepting sink."""

    kind = "leaderless"

    def __init__(self, base: Protocol, ell: int):
        super().__init__()
        if base.max_width() > 2:
            raise ProtocolError("leader elimination requires a 2-way protocol")
        if not base.leaders:
            raise ProtocolError("protocol has no leaders to remove")
        self.base = base
        self.ell = ell
        self.slots = [q for q in sorted(base.leaders)
                      for _ in range(base.leaders[q])]
        self.variables = base.variables
        self.leaders = {}
        self.flavor = "general"
        self._by_first, self._unary = _pair_index(base)
        self._top = self._reg("top", ("top",))

    def _ag(self, s: str, x: str, q: str) -> str:
        return self._reg(f"ag:{s}:{x}[{q}]", ("ag", s, x, q))

    def _ld(self, slots: tuple[str, ...], ps: int, rc: int, x: str, q: str) -> str:
        name = f"ld[{'||'.join(slots)}]({ps},{rc},{x})[{q}]"
        return self._reg(name, ("ld", slots, ps, rc, x, q))

    def input_state(self, x: str) -> str:
        return self._ld(tuple(self.slots), 1, 1, x, self.base.inputs[x])

    def output(self, q: str) -> int | None:
        tag = self._registry[q]
        if tag[0] == "top":
            return 1
        if tag[0] == "ag":
            return self.base.output(tag[3])
        _, slots, ps, rc, x, qq = tag
        return _consensus([self.base.output(s) for s in slots]
                          + [self.base.output(qq)])

    def state_count(self) -> int:
        nq = len(self.base.states)
        nx = len(self.variables)
        return (nq ** (len(self.slots) + 1) * self.ell * self.ell * nx
                + 2 * nx * nq + 1)

    def _elect(self, n1, t1, n2, t2, out) -> None:
        (_, s1, ps1, rc1, x1, q1) = t1
        (_, s2, ps2, rc2, x2, q2) = t2
        if ps1 + ps2 >= self.ell:
            out.append(Transition.make(
                mset(n1, n2), mset(self._top, self._top),
                f"elect_top({n1},{n2})"))
        else:
            winner = self._ld(tuple(self.slots), ps1 + ps2, 1, x1,
                              self.base.inputs[x1])
            loser = self._ag(FROZEN, x2, self.base.inputs[x2])
            out.append(Transition.make(
                mset(n1, n2), mset(winner, loser), f"elect({n1},{n2})"))

    def _ld_unary(self, n1, tag, out) -> None:
        """Internal steps of a caught-up leader candidate: its simulated
        agents step against each other or alone."""
        (_, slots, ps, rc, x, q) = tag
        if rc != ps:
            return
        roles = [(None, q)] + list(enumerate(slots))

        def updated(updates: dict) -> str:
            nq = updates.get(None, q)
            ns = tuple(updates.get(i, s) for i, s in enumerate(slots))
            return self._ld(ns, ps, rc, x, nq)

        for ai in range(len(roles)):
            for bi in range(len(roles)):
                if ai == bi:
                    continue
                ra, u = roles[ai]
                rb, v0 = roles[bi]
                for (v, u2, v2, lbl) in self._by_first.get(u, []):
                    if v != v0:
                        continue
                    nt = Transition.make(
                        mset(n1), mset(updated({ra: u2, rb: v2})),
                        f"lint:{lbl}({n1})")
                    if not nt.is_identity():
                        out.append(nt)
        for role, u in roles:
            for (q2, lbl) in self._unary.get(u, []):
                nt = Transition.make(mset(n1), mset(updated({role: q2})),
                                     f"lsim1:{lbl}({n1})")
                if not nt.is_identity():
                    out.append(nt)

    def _ld_vs_agent(self, n1, t1, na, ta, out) -> None:
        (_, slots, ps, rc, x, q) = t1
        (_, sa, xa, qa) = ta
        if rc == ps:
            if sa != ACTIVE:
                return
            roles = [(None, q)] + list(enumerate(slots))

            def updated(updates: dict) -> str:
                nq = updates.get(None, q)
                ns = tuple(updates.get(i, s) for i, s in enumerate(slots))
                return self._ld(ns, ps, rc, x, nq)

            for role, u in roles:
                for (v, u2, v2, lbl) in self._by_first.get(u, []):
                    if v != qa:
                        continue
                    nt = Transition.make(
                        mset(n1, na),
                        mset(updated({role: u2}), self._ag(ACTIVE, xa, v2)),
                        f"lsim2:{lbl}({n1})")
                    if not nt.is_identity():
                        out.append(nt)
        elif sa == ACTIVE:
            out.append(Transition.make(
                mset(n1, na),
                mset(self._ld(slots, ps, 1, x, q),
                     self._ag(FROZEN, xa, self.base.inputs[xa])),
                f"freeze({n1},{na})"))
        else:
            out.append(Transition.make(
                mset(n1, na),
                mset(self._ld(slots, ps, rc + 1, x, q),
                     self._ag(ACTIVE, xa, qa)),
                f"activate({n1},{na})"))

    def _sim2(self, n1, t1, n2, t2, out) -> None:
        (_, _, x1, q1) = t1
        (_, _, x2, q2) = t2
        for (v, u2, v2, lbl) in self._by_first.get(q1, []):
            if v != q2:
                continue
            nt = Transition.make(
                mset(n1, n2),
                mset(self._ag(ACTIVE, x1, u2), self._ag(ACTIVE, x2, v2)),
                f"sim2:{lbl}")
            if not nt.is_identity():
                out.append(nt)

    def _pair_rules(self, u: str, v: str) -> list[Transition]:
        tu = self._registry[u]
        tv = self._registry[v]
        out: list[Transition] = []
        if u == v:
            if tu[0] == "ld":
                self._elect(u, tu, u, tu, out)
                self._ld_unary(u, tu, out)
            elif tu[0] == "ag" and tu[1] == ACTIVE:
                (_, _, x1, q1) = tu
                for (q2, lbl) in self._unary.get(q1, []):
                    nt = Transition.make(
                        mset(u), mset(self._ag(ACTIVE, x1, q2)), f"sim1:{lbl}")
                    if not nt.is_identity():
                        out.append(nt)
                self._sim2(u, tu, u, tu, out)
            return out
        if tu[0] == "top" or tv[0] == "top":
            other = v if tu[0] == "top" else u
            out.append(Transition.make(
                mset(self._top, other), mset(self._top, self._top),
                f"flood({other})"))
            return out
        for (n1, t1, n2, t2) in ((u, tu, v, tv), (v, tv, u, tu)):
            if t1[0] == "ld" and t2[0] == "ld":
                self._elect(n1, t1, n2, t2, out)
            elif t1[0] == "ld" and t2[0] == "ag":
                self._ld_vs_agent(n1, t1, n2, t2, out)
            elif (t1[0] == "ag" and t1[1] == ACTIVE
                  and t2[0] == "ag" and t2[1] == ACTIVE):
                self._sim2(n1, t1, n2, t2, out)
        return out

    def to_json_obj(self) -> dict:
        return {"kind": self.kind, "ell": self.ell,
                "base": self.base.to_json_obj()}


def _load(obj: dict):
    if "kind" in obj:
        return lazy_from_json_obj(obj)
    return protocol_from_json_obj(obj)


def lazy_from_json_obj(obj: dict):
    kind = obj["kind"]
    if kind == HelperFreeProtocol.kind:
        return HelperFreeProtocol(protocol_from_json_obj(obj["base"]))
    if kind == DoubledProtocol.kind:
        return DoubledProtocol(_load(obj["base"]))
    if kind == ProductProtocol.kind:
        return ProductProtocol(_load(obj["left"]), _load(obj["right"]))
    if kind == LeaderlessProtocol.kind:
        return LeaderlessProtocol(protocol_from_json_obj(obj["base"]), obj["ell"])
    raise ProtocolError(f"unknown rule-based protocol kind {kind!r}")
