"""Curved A-infinity structures on Morse complexes over the integer Novikov ring."""

from .novikov import (
    EnergyCutoff,
    NovikovElement,
    NovikovError,
    NovikovTerm,
    format_element,
    parse_element,
)
from .monoid import BetaClass, MonoidTable, OrderKey, Ordering, UnknownClassError, ZERO_CLASS
from .algebra import (
    Defect,
    Generator,
    KeyReport,
    OperationTable,
    ank_defect,
    assemble_mk,
    degree_defects,
    homology_ranks,
    verify,
)
from .trees import (
    ContractionPoset,
    DomainDescriptor,
    Edge,
    ExtendedMetric,
    InvalidContractionError,
    MetricRibbonTree,
    RibbonTree,
    assemble_domain,
    contract_edge,
    contraction_poset,
    enumerate_trees,
    head_tail,
    limit_metric,
    stratum_params,
)
from .morse import (
    CriticalPoint,
    EdgePerturbation,
    GradientTreeSolution,
    MorseModel,
    PerturbationInsufficientError,
    SolverSettings,
    TreeProblem,
    build_morse_table,
    circle_model,
    count_trees,
    flow,
    get_model,
    shoot_tree,
    solve_problem,
    torus_model,
)
from .countfile import CountFile, MergeError, ParseError, emit, merge, parse, render_report

__version__ = "0.1.0"
