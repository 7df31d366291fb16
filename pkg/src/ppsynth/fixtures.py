"""Reference protocols used throughout the test-suite and CLI.

``flock_unary(n)`` counts x >= 2^n in unary (2^n + 1 states);
``flock_binary(n)`` does the same with power-of-two states (n + 2 states).
Both are leaderless full-output protocols over one variable x.
"""

from __future__ import annotations

from .protocol import Protocol, Transition, mset


def flock_unary(n: int) -> Protocol:
    """States 0..2^n; two agents merge their values, saturating at 2^n."""
    lim = 2**n
    states = [str(a) for a in range(lim + 1)]
    trans = []
    for a in range(lim + 1):
        for b in range(a, lim + 1):
            if a + b < lim:
                t = Transition.make(mset(str(a), str(b)), mset("0", str(a + b)),
                                    f"merge({a},{b})")
            else:
                t = Transition.make(mset(str(a), str(b)), mset(str(lim), str(lim)),
                                    f"sat({a},{b})")
            if not t.is_identity():
                trans.append(t)
    outputs = {str(a): (1 if a == lim else 0) for a in range(lim + 1)}
    return Protocol(states, trans, {}, ("x",), {"x": "1"}, outputs,
                    flavor="full-output")


def flock_binary(n: int) -> Protocol:
    """States {0} + powers of two up to 2^n; doubling plus saturation."""
    lim = 2**n
    states = ["0"] + [str(2**i) for i in range(n + 1)]
    trans = []
    for i in range(n):
        trans.append(Transition.make(
            mset(str(2**i), str(2**i)), mset("0", str(2**(i + 1))), f"up({i})"))
    for a in states:
        t = Transition.make(mset(a, str(lim)), mset(str(lim), str(lim)), f"sat({a})")
        if not t.is_identity():
            trans.append(t)
    outputs = {a: (1 if a == str(lim) else 0) for a in states}
    return Protocol(states, trans, {}, ("x",), {"x": "1"}, outputs,
                    flavor="full-output")


def toy_majority_helper() -> Protocol:
    """Toy 2-way protocol with one helper computing x > y (for |v| >= 1).

    Pairs of X/Y agents cancel into the helper state f; surviving X agents
    recruit f-agents to t, surviving Y agents recruit t-agents back to f, and
    without a surviving X agent any t decays against an f.  The decay rule
    makes the protocol robust to extra helpers (more f-agents than one), which
    is exactly the helper property.
    """
    states = ["X", "Y", "f", "t"]
    trans = [
        Transition.make(mset("X", "Y"), mset("f", "f"), "cancel"),
        Transition.make(mset("X", "f"), mset("X", "t"), "promote"),
        Transition.make(mset("Y", "t"), mset("Y", "f"), "demote"),
        Transition.make(mset("f", "t"), mset("f", "f"), "decay"),
    ]
    return Protocol(states, trans, {"f": 1}, ("x", "y"), {"x": "X", "y": "Y"},
                    {"f": 0, "t": 1}, flavor="simple")


def toy_one_leader() -> Protocol:
    """Toy protocol with 2 states and 1 leader computing x > 0."""
    states = ["f", "t"]
    trans = [Transition.make(mset("t", "f"), mset("t", "t"), "spread")]
    return Protocol(states, trans, {"f": 1}, ("x",), {"x": "t"},
                    {"f": 0, "t": 1}, flavor="simple")


def get_fixture(name: str, n: int) -> Protocol:
    if name == "pn":
        return flock_unary(n)
    if name == "ppn":
        return flock_binary(n)
    raise ValueError(f"unknown fixture {name!r}")
