"""Exception types shared across the toolkit."""


class OptiblurError(Exception):
    """Base class for all toolkit errors."""


class PrescriptionParseError(OptiblurError):
    """Malformed prescription file. Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PrescriptionValidationError(OptiblurError):
    """A prescription invariant was violated. Message names the invariant."""


class MaterialError(OptiblurError):
    """Unknown material or invalid dispersion evaluation."""


class TraceError(OptiblurError):
    """Geometric ray trace failure."""


class DegenerateBundleError(TraceError):
    """Every ray of a bundle was vignetted or lost."""


class ChiefRayError(TraceError):
    """The chief ray could not be traced to the image plane."""


class ZeroPowerError(OptiblurError):
    """Paraxial solve on a system with no optical power."""


class EmptyPupilError(OptiblurError):
    """A pupil function with no transmitting samples."""


class DimensionMismatchError(OptiblurError):
    """Array dimensions disagree with the declared/expected shape."""


class PSFFormatError(OptiblurError):
    """A PSF file or its sidecar is malformed or inconsistent."""


class EdgeError(OptiblurError):
    """Slanted-edge analysis failure (no edge, bad angle, low contrast)."""


class NoCrossingError(OptiblurError):
    """An SFR curve never reaches the requested response level."""


class ChartError(OptiblurError):
    """Invalid synthetic test-chart layout."""


class ConfigError(OptiblurError):
    """Invalid pipeline configuration."""
