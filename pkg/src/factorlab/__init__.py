"""Numerical disentanglement of multilinear inequalities on finite measure spaces."""
from .core import (
    AtomicMeasureSpace,
    Certificate,
    ExponentProfile,
    Instance,
    OperatorMatrix,
    apply_operator,
    evaluate_lhs,
    geometric_mean_floor,
    inequality_ratio,
    lp_norm,
    saturation_check,
)
from .documents import parse_instance
from .errors import (
    AdmissibilityError,
    BudgetError,
    FactorlabError,
    HomogeneityError,
    PositivityError,
    SaturationError,
    StructuralError,
)

__version__ = "0.1.0"
