"""Verification: exhaustive reachability with bottom-SCC consensus analysis,
halting checks, reversible-dynamic-initialization checks, and a fair
stochastic simulator.

The bottom-SCC criterion is the semantic characterization of stabilization
under fairness: a fair execution eventually confines itself to one bottom SCC
of the reachability graph and visits all of its configurations, so the
protocol stabilizes to b on input v iff every configuration of every bottom
SCC reachable from C_v has consensus output b.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .protocol import (
    Configuration,
    ProtocolBase,
    Protocol,
    RDIProtocol,
    Transition,
    canonical,
    enabled,
    fire,
    from_canonical,
    initial_config,
    mset_size,
    output_of,
    successors,
)

DEFAULT_NODE_CAP = 2_000_000
DEFAULT_WINDOW = 50_000


def node_cap_default() -> int:
    env = os.environ.get("PPF_NODE_CAP")
    if env:
        return int(env)
    return DEFAULT_NODE_CAP


CanonConfig = tuple[tuple[str, int], ...]


@dataclass
class ReachGraph:
    nodes: list[CanonConfig]
    index: dict[CanonConfig, int]
    edges: list[list[tuple[str, int]]]
    parents: list[tuple[int, str] | None]
    node_cap: int
    truncated: bool

    def path_to(self, node: int) -> list[str]:
        labels: list[str] = []
        cur = node
        while self.parents[cur] is not None:
            parent, label = self.parents[cur]
            labels.append(label)
            cur = parent
        labels.reverse()
        return labels

    def sccs(self) -> list[list[int]]:
        """Tarjan's algorithm, iterative."""
        n = len(self.nodes)
        index = [-1] * n
        low = [0] * n
        on_stack = [False] * n
        stack: list[int] = []
        out: list[list[int]] = []
        counter = 0
        for root in range(n):
            if index[root] != -1:
                continue
            work = [(root, 0)]
            while work:
                v, pi = work[-1]
                if pi == 0:
                    index[v] = low[v] = counter
                    counter += 1
                    stack.append(v)
                    on_stack[v] = True
                advanced = False
                succ = self.edges[v]
                while pi < len(succ):
                    w = succ[pi][1]
                    pi += 1
                    if index[w] == -1:
                        work[-1] = (v, pi)
                        work.append((w, 0))
                        advanced = True
                        break
                    if on_stack[w]:
                        low[v] = min(low[v], index[w])
                if advanced:
                    continue
                work.pop()
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    out.append(comp)
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
        return out

    def bottom_sccs(self) -> list[list[int]]:
        comps = self.sccs()
        comp_of = {}
        for ci, comp in enumerate(comps):
            for v in comp:
                comp_of[v] = ci
        bottom = []
        for ci, comp in enumerate(comps):
            is_bottom = True
            for v in comp:
                for _, w in self.edges[v]:
                    if comp_of[w] != ci:
                        is_bottom = False
                        break
                if not is_bottom:
                    break
            if is_bottom:
                bottom.append(comp)
        return bottom


def explore(p: ProtocolBase, c0: Configuration, node_cap: int | None = None) -> ReachGraph:
    """Deterministic BFS over the configuration graph from c0."""
    if node_cap is None:
        node_cap = node_cap_default()
    if mset_size(c0) < 1:
        raise ValueError("population must be nonempty")
    root = canonical(c0)
    nodes = [root]
    index = {root: 0}
    edges: list[list[tuple[str, int]]] = [[]]
    parents: list[tuple[int, str] | None] = [None]
    truncated = False
    head = 0
    while head < len(nodes):
        v = head
        head += 1
        conf = from_canonical(nodes[v])
        for t, nxt in successors(p, conf):
            key = canonical(nxt)
            w = index.get(key)
            if w is None:
                if len(nodes) >= node_cap:
                    truncated = True
                    continue
                w = len(nodes)
                index[key] = w
                nodes.append(key)
                edges.append([])
                parents.append((v, t.label))
            edges[v].append((t.label, w))
    return ReachGraph(nodes, index, edges, parents, node_cap, truncated)


@dataclass
class InputVerdict:
    input: dict[str, int]
    expected: int
    verdict: str  # pass | fail | inconclusive-truncated
    nodes: int
    witness: list[str] | None = None


@dataclass
class VerificationReport:
    rows: list[InputVerdict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.verdict == "pass" for r in self.rows)

    @property
    def counts(self) -> dict[str, int]:
        out = {"pass": 0, "fail": 0, "inconclusive-truncated": 0}
        for r in self.rows:
            out[r.verdict] += 1
        return out

    def to_json_obj(self) -> dict:
        return {
            "ok": self.ok,
            "counts": self.counts,
            "explored_nodes": sum(r.nodes for r in self.rows),
            "rows": [
                {
                    "input": r.input,
                    "expected": r.expected,
                    "verdict": r.verdict,
                    "nodes": r.nodes,
                    "witness": r.witness,
                }
                for r in self.rows
            ],
        }


def check_computes_config(
    p: ProtocolBase, c0: Configuration, expected: int, node_cap: int | None = None
) -> tuple[str, int, list[str] | None]:
    """Bottom-SCC verdict for one start configuration."""
    graph = explore(p, c0, node_cap)
    if graph.truncated:
        return "inconclusive-truncated", len(graph.nodes), None
    for comp in graph.bottom_sccs():
        for v in comp:
            out = output_of(p, from_canonical(graph.nodes[v]))
            if out != expected:
                return "fail", len(graph.nodes), graph.path_to(v)
    return "pass", len(graph.nodes), None


def check_computes(
    p: ProtocolBase,
    phi_expected,
    inputs: list[dict[str, int]],
    node_cap: int | None = None,
    jobs: int = 1,
) -> VerificationReport:
    """Check that every fair execution from each C_v stabilizes to phi_expected(v)."""

    def one(v: dict[str, int]) -> InputVerdict:
        expected = phi_expected(v)
        c0 = initial_config(p, v)
        verdict, nodes, witness = check_computes_config(p, c0, expected, node_cap)
        return InputVerdict(dict(v), expected, verdict, nodes, witness)

    report = VerificationReport()
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            report.rows = list(pool.map(one, inputs))
    else:
        report.rows = [one(v) for v in inputs]
    return report


def check_halting(
    p: Protocol, inputs: list[dict[str, int]], node_cap: int | None = None
) -> VerificationReport:
    """Check f/t mutual exclusion and monotone occupancy over all reachable configs."""
    f, t = p.simple_states()
    report = VerificationReport()
    for v in inputs:
        c0 = initial_config(p, v)
        graph = explore(p, c0, node_cap)
        if graph.truncated:
            report.rows.append(
                InputVerdict(dict(v), 1, "inconclusive-truncated", len(graph.nodes)))
            continue
        verdict = "pass"
        witness = None
        for vi, key in enumerate(graph.nodes):
            conf = dict(key)
            if conf.get(f, 0) > 0 and conf.get(t, 0) > 0:
                verdict, witness = "fail", graph.path_to(vi)
                break
            for _, wi in graph.edges[vi]:
                nxt = dict(graph.nodes[wi])
                if nxt.get(f, 0) < conf.get(f, 0) or nxt.get(t, 0) < conf.get(t, 0):
                    verdict, witness = "fail", graph.path_to(wi)
                    break
            if verdict == "fail":
                break
        report.rows.append(InputVerdict(dict(v), 1, verdict, len(graph.nodes), witness))
    return report


# -- RDI checks ---------------------------------------------------------------


class _Lcg:
    """Deterministic 64-bit LCG shared by simulation paths."""

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = (seed * 6364136223846793005 + 1442695040888963407) & self.MASK
        for _ in range(3):
            self.next()

    def next(self) -> int:
        self.state = (self.state * 6364136223846793005 + 1442695040888963407) & self.MASK
        return self.state >> 33

    def choice(self, n: int) -> int:
        return self.next() % n


def _equiv_class(conf: Configuration, f: str, t: str) -> list[CanonConfig]:
    """All configurations differing from conf only in the f/t split."""
    total = conf.get(f, 0) + conf.get(t, 0)
    base = {q: k for q, k in conf.items() if q not in (f, t)}
    out = []
    for nf in range(total + 1):
        c = dict(base)
        if nf:
            c[f] = nf
        if total - nf:
            c[t] = total - nf
        out.append(canonical(c))
    return out


@dataclass
class RdiReport:
    ok: bool
    input_bound_ok: bool
    reversibility_ok: bool
    computation_ok: bool
    states_explored: int
    sequences: int
    reversibility_samples: int
    failures: list[str] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return self.__dict__ | {"failures": list(self.failures)}


def check_rdi(
    rdi: RDIProtocol,
    phi_w,
    max_depth: int = 12,
    max_pop: int = 3,
    node_cap: int | None = None,
    samples: int = 200,
    seed: int = 1,
) -> RdiReport:
    """Check the three RDI properties on all bounded initialization sequences.

    phi_w maps an effective input (dict var -> nat) to the expected bit.
    """
    if node_cap is None:
        node_cap = node_cap_default()
    full = rdi.full_protocol()
    inf = rdi.inf_protocol()
    f, t = inf.simple_states()
    variables = rdi.variables

    # BFS over (configuration, effective input) under interleavings of
    # in_x / out_x pseudo-steps and protocol steps.
    root = (canonical(rdi.leaders), tuple(0 for _ in variables))
    seen = {root: 0}
    frontier = [root]
    all_nodes = [root]
    depth = 0
    input_bound_ok = True
    failures: list[str] = []
    while frontier and depth < max_depth:
        depth += 1
        nxt_frontier = []
        for key in frontier:
            conf = from_canonical(key[0])
            w = dict(zip(variables, key[1]))
            moves: list[tuple[CanonConfig, tuple[int, ...]]] = []
            for xi, x in enumerate(variables):
                qx = rdi.inputs[x]
                if sum(key[1]) < max_pop:
                    c2 = dict(conf)
                    c2[qx] = c2.get(qx, 0) + 1
                    w2 = list(key[1])
                    w2[xi] += 1
                    moves.append((canonical(c2), tuple(w2)))
                if conf.get(qx, 0) > 0:
                    c2 = dict(conf)
                    c2[qx] -= 1
                    w2 = list(key[1])
                    w2[xi] -= 1
                    if w2[xi] >= 0:
                        moves.append((canonical(c2), tuple(w2)))
            for _, c2 in successors(full, conf):
                moves.append((canonical(c2), key[1]))
            for mkey in moves:
                if mkey in seen:
                    continue
                seen[mkey] = depth
                nxt_frontier.append(mkey)
                all_nodes.append(mkey)
                mconf = dict(mkey[0])
                for xi, x in enumerate(variables):
                    if mconf.get(rdi.inputs[x], 0) > mkey[1][xi]:
                        input_bound_ok = False
                        failures.append(
                            f"input bound violated at {mkey[0]} w={mkey[1]}")
        frontier = nxt_frontier

    # (c) post-initialization computation: freeze T_dag, check bottom SCCs.
    computation_ok = True
    comp_cache: dict[tuple[CanonConfig, int], str] = {}
    for key in all_nodes:
        w = dict(zip(variables, key[1]))
        expected = phi_w(w)
        cache_key = (key[0], expected)
        if cache_key in comp_cache:
            continue
        conf = from_canonical(key[0])
        if mset_size(conf) < 2:
            continue
        verdict, _, witness = check_computes_config(inf, conf, expected, node_cap)
        comp_cache[cache_key] = verdict
        if verdict != "pass":
            computation_ok = False
            failures.append(
                f"computation check {verdict} from {key[0]} w={key[1]}: {witness}")

    # (b) reversibility, sampled: C -> D within T, then every D' in [D] must
    # reach some C' in [C].
    rng = _Lcg(seed)
    reversibility_ok = True
    checked = 0
    nodes_list = list(all_nodes)
    attempts = 0
    while checked < samples and attempts < samples * 4 and nodes_list:
        attempts += 1
        key = nodes_list[rng.choice(len(nodes_list))]
        conf = from_canonical(key[0])
        walk = dict(conf)
        for _ in range(rng.choice(6) + 1):
            succ = successors(full, walk)
            if not succ:
                break
            walk = succ[rng.choice(len(succ))][1]
        d = walk
        targets = set(_equiv_class(conf, f, t))
        for dprime_key in _equiv_class(d, f, t):
            found = False
            frontier2 = [dprime_key]
            seen2 = {dprime_key}
            while frontier2 and len(seen2) < node_cap:
                cur = frontier2.pop()
                if cur in targets:
                    found = True
                    break
                for _, nxt in successors(full, from_canonical(cur)):
                    ck = canonical(nxt)
                    if ck not in seen2:
                        seen2.add(ck)
                        frontier2.append(ck)
            if not found:
                reversibility_ok = False
                failures.append(
                    f"reversibility failed: {dprime_key} cannot return to [{key[0]}]")
                break
        checked += 1

    return RdiReport(
        ok=input_bound_ok and reversibility_ok and computation_ok,
        input_bound_ok=input_bound_ok,
        reversibility_ok=reversibility_ok,
        computation_ok=computation_ok,
        states_explored=len(all_nodes),
        sequences=len(all_nodes),
        reversibility_samples=checked,
        failures=failures[:20],
    )


# -- stochastic simulation ----------------------------------------------------


@dataclass
class SimResult:
    outcome: str  # "stabilized" | "undecided"
    bit: int | None
    steps: int
    trace: list[str] | None = None

    def to_json_obj(self) -> dict:
        return {"outcome": self.outcome, "bit": self.bit, "steps": self.steps,
                "trace": self.trace}


def simulate(
    p: ProtocolBase,
    v: dict[str, int],
    seed: int = 0,
    max_steps: int = 500_000,
    stability_window: int = DEFAULT_WINDOW,
    record_trace: bool = False,
) -> SimResult:
    """Fair stochastic simulation: uniform choice among distinct enabled
    non-identity transitions; deterministic given the seed."""
    c0 = initial_config(p, v)
    if isinstance(p, Protocol):
        from . import kernels

        if kernels.suitable(p):
            return kernels.simulate_kernel(p, c0, seed, max_steps, stability_window)
    return simulate_python(p, c0, seed, max_steps, stability_window, record_trace)


def simulate_python(
    p: ProtocolBase,
    c0: Configuration,
    seed: int,
    max_steps: int,
    stability_window: int,
    record_trace: bool = False,
) -> SimResult:
    rng = _Lcg(seed)
    # enabled-transition/output cache keyed by canonical configuration; only
    # the chosen transition is fired each step
    cache: dict[CanonConfig, tuple[list[Transition], int | None]] = {}
    cur = canonical(c0)
    streak_bit: int | None = None
    streak = 0
    trace: list[str] | None = [] if record_trace else None

    def info(key: CanonConfig):
        hit = cache.get(key)
        if hit is None:
            conf = from_canonical(key)
            support = frozenset(conf)
            seen = set()
            ts = []
            for t in p.candidates(support):
                if t not in seen and enabled(conf, t):
                    seen.add(t)
                    ts.append(t)
            hit = (ts, output_of(p, conf))
            cache[key] = hit
        return hit

    steps = 0
    while steps < max_steps:
        ts, out = info(cur)
        if out is not None and out == streak_bit:
            streak += 1
        else:
            streak_bit = out
            streak = 1 if out is not None else 0
        if streak >= stability_window:
            return SimResult("stabilized", streak_bit, steps, trace)
        if not ts:
            # terminal configuration: output can never change again
            if out is not None:
                return SimResult("stabilized", out, steps, trace)
            return SimResult("undecided", None, steps, trace)
        t = ts[rng.choice(len(ts))]
        cur = canonical(fire(from_canonical(cur), t))
        if trace is not None and len(trace) < 200:
            trace.append(t.label)
        steps += 1
    return SimResult("undecided", streak_bit, steps, trace)
