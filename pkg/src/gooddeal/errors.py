"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class GoodDealError(Exception):
    """Base class for every error raised by this package."""


class SingularVolatility(GoodDealError):
    """The volatility matrix does not have full row rank."""


class GrowthConditionViolated(GoodDealError):
    """h^2 <= xi' A xi, so the no-good-deal set is empty or degenerate."""


class SubspaceViolation(GoodDealError):
    """A vector that must lie in Im sigma' has a kernel component."""


class InfeasibleSeparability(GoodDealError):
    """A matrix does not leave Ker sigma invariant."""


class SaddleCheckFailed(GoodDealError):
    """The computed saddle point failed its cross-evaluation check."""


class DegenerateBound(GoodDealError):
    """The effective constraint radius is not positive."""


class DegenerateBoundWarning(UserWarning):
    """The effective radius is exactly zero: bounds collapse, hedge undefined."""


class QuadratureNotConverged(GoodDealError):
    """Fourier integration did not reach the requested accuracy."""


class LowerBoundInfeasible(GoodDealError, UserWarning):
    """The lower adjusted mean-reversion level violates the Feller condition.

    Issued as a warning by default; raised when strict checking is requested.
    """


class NaNGuard(GoodDealError, FloatingPointError):
    """A non-finite intermediate value appeared in the backward induction."""


class ConfigError(GoodDealError):
    """Invalid experiment configuration; the message starts with a field path."""
