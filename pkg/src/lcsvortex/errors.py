"""Exception and warning types shared across the package."""


class LcsVortexError(Exception):
    """Base class for all package errors."""


class OutOfBounds(LcsVortexError):
    """Query position outside a gridded field, with the offending axis."""

    def __init__(self, axis, value, lo, hi):
        self.axis = axis
        self.value = value
        super().__init__(f"coordinate {value!r} outside axis '{axis}' range [{lo}, {hi}]")


class LeftDomain(LcsVortexError):
    """A trajectory exited the valid data region during integration."""

    def __init__(self, t_exit, position):
        self.t_exit = t_exit
        self.position = tuple(position)
        super().__init__(f"trajectory left the domain at t={t_exit} near {self.position}")


class InvalidPoint(LcsVortexError):
    """Grid node has no usable flow-map stencil."""


class NotPositiveDefinite(LcsVortexError):
    """Symmetric tensor is not positive-definite."""


class DegenerateLatitude(LcsVortexError):
    """Grid latitude too close to the equator or poles for geostrophy."""


class DegenerateTensor(LcsVortexError):
    """Tensor is (near-)isotropic; eigenvector directions are unreliable."""


class OutsideDomain(LcsVortexError):
    """Stretching parameter falls outside the natural eigenvalue bracket."""


class CriticalPointOnCurve(LcsVortexError):
    """A vector sample on the curve vanishes; the winding angle is undefined."""


class DegeneratePointOnCurve(LcsVortexError):
    """A line-field sample on the curve is undefined."""


class UndersampledCurve(LcsVortexError):
    """Consecutive samples turn too fast for unambiguous angle unwrapping."""


class RadiusTooLarge(LcsVortexError):
    """Another singularity intrudes into the classification circle."""


class MissingLayer(LcsVortexError):
    """Requested render layer has no artifact to draw."""


class ConfigError(LcsVortexError):
    """Pipeline configuration file or override is invalid."""


class StageError(LcsVortexError):
    """A pipeline stage failed; prior checkpoints remain usable."""

    def __init__(self, stage, cause):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {cause}")


class SectionLeavesDomain(UserWarning):
    """Poincare section truncated at the domain boundary."""


class BisectionStalled(UserWarning):
    """A return-distance bracket could not be refined; the bracket is skipped."""
