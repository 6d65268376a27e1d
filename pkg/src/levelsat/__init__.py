"""Staged construction of level structures with a finite-stage dimension
comparator and dividing experiments.

The pieces: formulas and schedules (formula), structures with level
predicates (structures), quantifier-free and capped evaluation (evaluator),
theory plugins with extension oracles (theory), the stage builder
(construction), count trends and the comparator (dimension), dividing
certificates and the drop survey (dividing), SVG plots (plots), and the
command line (cli)."""

from .construction import (
    ConstructionError,
    InternalFaultError,
    StageChain,
    build_chain,
    build_m0,
    check_level_freeze,
    embed_model,
    load_chain,
    serialize_chain,
    strongly_satisfies,
    verify_axioms_on_levels,
)
from .dimension import (
    BOUNDED,
    DIVERGES_NEG,
    DIVERGES_POS,
    INCONCLUSIVE,
    DimCompareResult,
    DimTrend,
    dim_compare,
    export_trend_csv,
    mu,
    product_set,
    quasi_axiom_report,
    read_trend_csv,
    trend,
)
from .dividing import (
    CoveringReport,
    DividesWitness,
    DropReport,
    certify_dividing,
    covering_bound,
    covering_check,
    find_dimension_drop,
)
from .evaluator import DefinableSet, count, diag_key, evaluate, qf_type_equal, solutions
from .formula import (
    OMEGA,
    Formula,
    LevelOrdinal,
    ParseError,
    ScheduleEntry,
    Signature,
    enumerate_schedule,
    fin,
    omega_plus,
    parse,
    parse_level,
    render,
    seeded_schedule,
)
from .structures import ExtensionDelta, FinStructure, StructureError, apply_delta
from .theory import PLUGINS, OracleError, TheoryPlugin, get_plugin

__version__ = "0.1.0"

__all__ = [
    "BOUNDED",
    "DIVERGES_NEG",
    "DIVERGES_POS",
    "INCONCLUSIVE",
    "OMEGA",
    "PLUGINS",
    "ConstructionError",
    "CoveringReport",
    "DefinableSet",
    "DimCompareResult",
    "DimTrend",
    "DividesWitness",
    "DropReport",
    "ExtensionDelta",
    "FinStructure",
    "Formula",
    "InternalFaultError",
    "LevelOrdinal",
    "OracleError",
    "ParseError",
    "ScheduleEntry",
    "Signature",
    "StageChain",
    "StructureError",
    "TheoryPlugin",
    "apply_delta",
    "build_chain",
    "build_m0",
    "certify_dividing",
    "check_level_freeze",
    "count",
    "covering_bound",
    "covering_check",
    "diag_key",
    "dim_compare",
    "embed_model",
    "enumerate_schedule",
    "evaluate",
    "export_trend_csv",
    "fin",
    "find_dimension_drop",
    "get_plugin",
    "load_chain",
    "mu",
    "omega_plus",
    "parse",
    "parse_level",
    "product_set",
    "qf_type_equal",
    "quasi_axiom_report",
    "read_trend_csv",
    "render",
    "seeded_schedule",
    "serialize_chain",
    "solutions",
    "strongly_satisfies",
    "trend",
    "verify_axioms_on_levels",
]
