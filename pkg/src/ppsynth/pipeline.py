"""End-to-end compilation: cutoff computation, the large-input and
small-input halves, and their conjunctive product.

The large half computes (|v| >= ell) -> phi, the small half
(|v| < ell) -> phi; both are leaderless, so their pointwise AND computes phi
on every population size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .construct_large import boolean_stage_detail, kway_to_2way, remove_helpers
from .construct_small import (
    build_part,
    build_size_one_part,
    combine_fixed_sizes,
    remove_single_leader,
)
from .formula import Formula
from .lazy import DoubledProtocol, ProductProtocol
from .protocol import Protocol, ProtocolBase, ProtocolError, spp_to_fopp


@dataclass
class StageStat:
    name: str
    states: int
    transitions: int | None
    helpers: int
    max_width: int | None

    def to_json_obj(self) -> dict:
        return {"name": self.name, "states": self.states,
                "transitions": self.transitions, "helpers": self.helpers,
                "max_width": self.max_width}


@dataclass
class CompilationResult:
    protocol: ProtocolBase
    ell: int
    stage_stats: list[StageStat] = field(default_factory=list)
    formula: Formula | None = None

    def to_json_obj(self) -> dict:
        return {
            "protocol": self.protocol.to_json_obj(),
            "ell": self.ell,
            "stage_stats": [s.to_json_obj() for s in self.stage_stats],
            "formula": str(self.formula) if self.formula is not None else None,
        }


def _stat(name: str, p: ProtocolBase) -> StageStat:
    return StageStat(name, p.state_count(), p.transition_count(),
                     sum(p.leaders.values()), p.max_width())


def compute_cutoff(phi: Formula) -> int:
    """ell = max(3, helper count of the large half before helper removal)."""
    from .construct_large import boolean_stage

    combined = boolean_stage(phi)
    return max(3, sum(combined.leaders.values()))


def to_full_output(p: ProtocolBase) -> ProtocolBase:
    if p.flavor == "full-output":
        return p
    if isinstance(p, Protocol) and p.flavor == "simple":
        return spp_to_fopp(p)
    return DoubledProtocol(p)


def product_and(p1: ProtocolBase, p2: ProtocolBase) -> ProductProtocol:
    """Pointwise conjunction of two leaderless protocols (converted to
    full output first)."""
    if p1.variables != p2.variables:
        raise ProtocolError("product requires identical variable sets")
    return ProductProtocol(to_full_output(p1), to_full_output(p2))


def compile(phi: Formula) -> CompilationResult:
    """Build the leaderless protocol computing phi on all population sizes."""
    combined, mop, rdis = boolean_stage_detail(phi)
    ell = max(3, sum(combined.leaders.values()))
    two_way = kway_to_2way(combined)
    large = remove_helpers(two_way)

    parts = {i: build_part(phi, i) for i in range(2, ell)}
    parts[1] = build_size_one_part(phi)
    fixed = combine_fixed_sizes(parts, ell, phi.vars)
    small = remove_single_leader(fixed, ell)

    product = product_and(large, small)

    rdi_stat = StageStat(
        "rdi",
        sum(len(r.states) for r in rdis),
        sum(len(r.t_inf) + len(r.t_dag) for r in rdis),
        sum(sum(r.leaders.values()) for r in rdis),
        max((max(t.width for t in r.t_inf + r.t_dag) for r in rdis), default=0),
    )
    parts_stat = StageStat(
        "small-parts",
        sum(p.state_count() for p in parts.values()),
        sum(p.transition_count() for p in parts.values()),
        sum(sum(p.leaders.values()) for p in parts.values()),
        max((p.max_width() for p in parts.values()), default=0),
    )
    stats = [
        rdi_stat,
        _stat("dispatch", mop),
        _stat("boolean", combined),
        _stat("2way", two_way),
        _stat("helpers-removed", large),
        parts_stat,
        _stat("fixed-size", fixed),
        _stat("leaderless-small", small),
        _stat("product", product),
    ]
    return CompilationResult(product, ell, stats, phi)


def compile_large_half(phi: Formula):
    from .construct_large import compile_large

    return compile_large(phi)


def compile_small_half(phi: Formula, ell: int | None = None):
    from .construct_small import compile_small

    if ell is None:
        ell = compute_cutoff(phi)
    return compile_small(phi, ell)
