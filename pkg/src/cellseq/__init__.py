"""Combinatorics and metric diagnostics of cellular Markov subdivision rules."""

from .cells import (
    CellComplex,
    CellComplexError,
    CellSet,
    CommonFaces,
    Graph,
    ValidationReport,
    validate_complex,
)
from .diagnostics import (
    BQSEnvelope,
    CXCReport,
    QVConstants,
    approximation_of,
    bqs_envelope,
    cxc_report,
    qs_identity_modulus,
    qv_constants,
)
from .examples import (
    EXAMPLE_NAMES,
    by_name,
    dump_rule,
    identity_subdivision,
    load_rule,
    pillowcase,
    torus_doubling,
)
from .levels import (
    FfiReport,
    FlowerInvarianceReport,
    JoiningReport,
    LevelCell,
    PointAddress,
    ReachabilityReport,
    ResourceCapExceeded,
    SeparationLevel,
    Tower,
)
from .realization import (
    AffineBranch,
    Geometry,
    Marking,
    PillowRealization,
    Point,
    Realization,
    TorusRealization,
    check_realization,
    expansion_check,
    lebesgue_number,
    mesh_table_csv,
    realization_from_json,
    realization_to_json,
)
from .rules import (
    CPCFReport,
    MultiplicityTable,
    RuleDataError,
    SubdivisionRule,
    cpcf_data,
    multiplicity_table,
    rule_from_json,
    rule_to_json,
    validate_rule,
)
from .visual import (
    CellMetricReport,
    HyperbolicityReport,
    TruncatedPairError,
    VisualMetricConfig,
    VisualMetricReport,
    cell_metric_report,
    chain_metric,
    flat_comparability,
    hyperbolicity_constants,
    quasi_distance,
    stable_epsilon,
)

__version__ = "0.1.0"
