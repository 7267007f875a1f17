"""Topological entropy toolkit for multimodal interval maps."""

from .errors import (
    BracketError,
    BudgetError,
    ConvergenceError,
    DomainError,
    InconsistencyError,
    IsentropeError,
    NeedsHigherOrderError,
    NotABasinError,
    NotApplicableError,
    RetargetError,
    ShapeError,
    SingularityError,
)
from .families import (
    CriticalValues,
    CubicMap,
    ModalShape,
    PiecewiseLinearMap,
    PolynomialMap,
    ZetaCoords,
    boundary_cubic,
    boundary_first_critical_value,
    cubic_critical_points,
    make_cubic,
    make_stunted,
    make_tent,
    map_from_critical_values,
    map_from_json,
    map_to_json,
)

__version__ = "0.1.0"
