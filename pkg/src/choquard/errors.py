"""Exception and warning types shared across the package.

Numerical failures carry a ``diagnostics`` dict so that callers (CLI,
service) can serialize what went wrong instead of losing it in a traceback.
"""
from __future__ import annotations


class ChoquardError(Exception):
    """Base class for all domain errors raised by this package."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class GridError(ChoquardError):
    """Invalid grid request (node count, radius, or unsupported layout)."""


class OutOfRangeError(ChoquardError):
    """Parameter outside its admissible range, e.g. p outside (5/3, 3)."""


class ZeroInteractionError(ChoquardError):
    """Interaction energy vanished where a quotient requires it positive."""


class NoBracketError(ChoquardError):
    """Root bracketing failed: configured interval holds no sign change."""


class MaxIterationsError(ChoquardError):
    """Iteration cap reached before the convergence test was met."""


class InvariantViolationError(ChoquardError):
    """A converged object failed its structural invariants."""


class LaunchRadiusError(ChoquardError):
    """Series evaluated beyond its validated launch radius."""


class FitWindowError(ChoquardError):
    """Tail-fit window too short or unusable."""


class FlowDivergenceError(ChoquardError):
    """Gradient flow energy increased persistently."""


class PositivityError(ChoquardError):
    """Perturbed profile lost pointwise positivity."""


class TailTruncationWarning(UserWarning):
    """A profile carried non-negligible mass at the outer grid radius."""


class SeriesDivergenceWarning(UserWarning):
    """Series coefficients suggest the launch radius exceeds convergence."""


class CompressionWarning(UserWarning):
    """Rescaling pushed support beyond the representable radius."""


class IndeterminateClassificationWarning(UserWarning):
    """A trajectory's growth score fell inside the noise band."""
