"""Exception types shared across the package.

Every error that can cross a module boundary has a named class here so
callers (and the CLI) can report failures by name.
"""


class ToothfillError(Exception):
    """Base class for all package errors."""


class OpenSurface(ToothfillError):
    """Mesh is not watertight; the sign of a distance query is undefined."""


class UnderdeterminedFit(ToothfillError):
    """Too few or rank-deficient points for the arch-curve fit."""


class UnconstrainedComponent(ToothfillError):
    """A connected mesh component has no deformation handle."""


class DivergedGradient(ToothfillError):
    """Non-finite gradient handed to the optimizer."""


class DivergedTraining(ToothfillError):
    """Training loss became non-finite.

    Carries the last checkpoint whose loss was still finite.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class IncompatibleCheckpoint(ToothfillError):
    """Checkpoint file has an unsupported format version."""


class CorruptCheckpoint(ToothfillError):
    """Checkpoint file is truncated or has a wrong magic."""


class DegenerateLabels(ToothfillError):
    """Discriminator training received codes from a single class."""


class EmptyCrown(ToothfillError):
    """Crown cut plane lies above the whole mesh."""


class EmptyShape(ToothfillError):
    """Decoded field has no zero crossing; no surface to extract."""


class InvalidSpec(ToothfillError):
    """Tooth parameter set cannot produce a valid mesh."""
