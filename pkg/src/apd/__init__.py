"""Finite-window computation on aperiodic Delone sets.

Exact pattern generation, patch classification, pattern-equivariance and
local-derivability tests, collared graph complexes with rational cohomology,
and shape-cocycle deformations with invertibility diagnostics.
"""

from .exactnum import (
    DiscriminantMismatch,
    ExactScalar,
    ExactVector,
    format_scalar,
    parse_scalar,
    scalar_arith,
    to_float,
    vec1,
    vec2,
)
from .patterns import (
    Patch,
    PatchClassTable,
    PatchMetric,
    PatternSample,
    Recurrence,
    Window,
    WindowError,
    classify_patches,
    extract_patch,
    find_recurrences,
    offset_separation,
    offset_separation_sq,
    patch_distance,
    patch_distance_translated,
    safe_anchors,
    voronoi_cells,
    window1d,
)
from .generators import (
    BUILTIN_RULES,
    RuleError,
    SubstitutionRule,
    cut_and_project_1d,
    fibonacci_cut_project,
    fibonacci_rule,
    generate_substitution_sample,
    integer_lattice,
    period_doubling_rule,
    periodic_rule,
    product_pattern,
    realize_points,
    silver_rule,
    substitution_fixed_word,
)

__version__ = "0.1.0"
