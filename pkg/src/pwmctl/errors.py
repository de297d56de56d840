"""Exception types shared across the package."""


class PwmError(Exception):
    """Base class for all pwmctl errors."""


class NotHermitian(PwmError):
    """Matrix expected to be Hermitian is not (within tolerance)."""


class ConvergenceFailure(PwmError):
    """An iterative eigensolver failed to converge."""


class DimensionMismatch(PwmError):
    """Operands have incompatible dimensions."""


class ZeroWaveform(PwmError):
    """Waveform is identically zero on the requested window."""


class WidthOverflow(PwmError):
    """A pulse width exceeds the interval duration (amplitude too small)."""


class Unreachable(PwmError):
    """Two-level target integral outside the reachable range."""


class ResolutionTooLow(PwmError):
    """Sample rate too low to resolve individual pulses."""


class NoConvergence(PwmError):
    """Step refinement did not reach the target accuracy."""


class NotUnitary(PwmError):
    """Matrix expected to be unitary is not (within tolerance)."""


class MalformedInput(PwmError):
    """An input file does not match its expected schema."""
