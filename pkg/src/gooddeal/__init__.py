"""Good-deal valuation bounds, hedges and a regression BSDE solver."""

from .errors import *  # noqa: F401,F403
from .model import (
    EllipsoidConstraint,
    MarketModel,
    ProjectionPair,
    UncertaintyEllipsoid,
    alpha_prime,
    check_growth_condition,
    check_separability,
    make_projections,
)

__version__ = "0.1.0"
