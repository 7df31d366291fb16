"""Matrix simulation kernels for concrete protocols.

The hot loop of the stochastic simulator is implemented twice: a numba
@njit kernel and a pure-numpy fallback.  Both use the same 64-bit LCG and
enumerate enabled transitions in the same order, so they produce identical
trajectories; the generic per-configuration path in verify.simulate_python
matches them as well.  Selection: PPSYNTH_NUMBA=0 forces the numpy path,
otherwise numba is used when importable.
"""

from __future__ import annotations

import os

import numpy as np

from .protocol import Configuration, Protocol
from .verify import SimResult

_LCG_A = 6364136223846793005
_LCG_C = 1442695040888963407
_MASK = (1 << 64) - 1

MAX_STATES = 4096
MAX_TRANSITIONS = 65536


def numba_enabled() -> bool:
    if os.environ.get("PPSYNTH_NUMBA", "").lower() in ("0", "false", "off"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def suitable(p: Protocol) -> bool:
    return len(p.states) <= MAX_STATES and len(p.transitions) <= MAX_TRANSITIONS


def _matrices(p: Protocol):
    """Dense pre/delta matrices over deduplicated non-identity transitions."""
    idx = {q: i for i, q in enumerate(p.states)}
    seen = set()
    rows = []
    for t in p.transitions:
        if t.is_identity():
            continue
        key = (t.label, t.pre, t.post)
        if key in seen:
            continue
        seen.add(key)
        rows.append(t)
    nq = len(p.states)
    pre = np.zeros((len(rows), nq), dtype=np.int64)
    delta = np.zeros((len(rows), nq), dtype=np.int64)
    for i, t in enumerate(rows):
        for q, k in t.pre:
            pre[i, idx[q]] = k
            delta[i, idx[q]] -= k
        for q, k in t.post:
            delta[i, idx[q]] += k
    outv = np.full(nq, -1, dtype=np.int64)
    for q, b in p.outputs.items():
        outv[idx[q]] = b
    return pre, delta, outv, idx


def _seed_state(seed: int) -> int:
    state = (seed * _LCG_A + _LCG_C) & _MASK
    for _ in range(3):
        state = (state * _LCG_A + _LCG_C) & _MASK
    return state


def _run_numpy(pre, delta, outv, conf, state, max_steps, window):
    streak_bit = -1
    streak = 0
    steps = 0
    opin0 = outv == 0
    opin1 = outv == 1
    while steps < max_steps:
        present = conf > 0
        has0 = bool(np.any(present & opin0))
        has1 = bool(np.any(present & opin1))
        out = -1 if has0 == has1 else (1 if has1 else 0)
        if out != -1 and out == streak_bit:
            streak += 1
        else:
            streak_bit = out
            streak = 1 if out != -1 else 0
        if streak >= window:
            return 1, streak_bit, steps
        enabled = np.nonzero(np.all(conf >= pre, axis=1))[0]
        n = len(enabled)
        if n == 0:
            if out != -1:
                return 1, out, steps
            return 0, -1, steps
        state = (state * _LCG_A + _LCG_C) & _MASK
        k = (state >> 33) % n
        conf = conf + delta[enabled[k]]
        steps += 1
    return 0, streak_bit, steps


_numba_kernel = None


def _get_numba_kernel():
    global _numba_kernel
    if _numba_kernel is not None:
        return _numba_kernel
    from numba import njit

    a = np.uint64(_LCG_A)
    c = np.uint64(_LCG_C)

    @njit(cache=True, nogil=True)
    def run(pre, delta, outv, conf, state0, max_steps, window):  # pragma: no cover
        nt, nq = pre.shape
        enabled = np.empty(nt, dtype=np.int64)
        state = np.uint64(state0)
        streak_bit = -1
        streak = 0
        steps = 0
        while steps < max_steps:
            has0 = False
            has1 = False
            for q in range(nq):
                if conf[q] > 0:
                    if outv[q] == 0:
                        has0 = True
                    elif outv[q] == 1:
                        has1 = True
            if has0 == has1:
                out = -1
            elif has1:
                out = 1
            else:
                out = 0
            if out != -1 and out == streak_bit:
                streak += 1
            else:
                streak_bit = out
                streak = 1 if out != -1 else 0
            if streak >= window:
                return 1, streak_bit, steps
            n = 0
            for t in range(nt):
                ok = True
                for q in range(nq):
                    if conf[q] < pre[t, q]:
                        ok = False
                        break
                if ok:
                    enabled[n] = t
                    n += 1
            if n == 0:
                if out != -1:
                    return 1, out, steps
                return 0, -1, steps
            state = state * a + c
            k = int(state >> np.uint64(33)) % n
            ti = enabled[k]
            for q in range(nq):
                conf[q] += delta[ti, q]
            steps += 1
        return 0, streak_bit, steps

    _numba_kernel = run
    return run


def simulate_kernel(
    p: Protocol,
    c0: Configuration,
    seed: int,
    max_steps: int,
    window: int,
    backend: str | None = None,
) -> SimResult:
    pre, delta, outv, idx = _matrices(p)
    conf = np.zeros(len(p.states), dtype=np.int64)
    for q, k in c0.items():
        conf[idx[q]] = k
    state = _seed_state(seed)
    if backend is None:
        backend = "numba" if numba_enabled() else "numpy"
    if backend == "numba":
        run = _get_numba_kernel()
        done, bit, steps = run(pre, delta, outv, conf.copy(), np.uint64(state),
                               max_steps, window)
    else:
        done, bit, steps = _run_numpy(pre, delta, outv, conf.copy(), state,
                                      max_steps, window)
    outcome = "stabilized" if done else "undecided"
    return SimResult(outcome, None if bit == -1 else int(bit), int(steps))
