"""ppsynth: compile quantifier-free linear-arithmetic predicates into
succinct population protocols, and verify or simulate the results."""

from .formula import (
    And,
    Atom,
    Formula,
    FormulaError,
    Not,
    Or,
    ParseError,
    evaluate,
    metrics,
    parse,
)
from .protocol import (
    Protocol,
    ProtocolBase,
    ProtocolError,
    Transition,
    from_json,
    initial_config,
    to_json,
)
from .pipeline import CompilationResult, compile, compute_cutoff, product_and
from .verify import (
    check_computes,
    check_halting,
    check_rdi,
    explore,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "And", "Atom", "Formula", "FormulaError", "Not", "Or", "ParseError",
    "evaluate", "metrics", "parse",
    "Protocol", "ProtocolBase", "ProtocolError", "Transition",
    "from_json", "initial_config", "to_json",
    "CompilationResult", "compile", "compute_cutoff", "product_and",
    "check_computes", "check_halting", "check_rdi", "explore", "simulate",
    "__version__",
]
