"""Exception types raised by wmsense."""


class WmSenseError(Exception):
    """Base class for all package errors."""


class PreconditionError(WmSenseError, ValueError):
    """An operation was called with arguments outside its domain."""


class CalibrationError(WmSenseError, ValueError):
    """Threshold calibration could not be carried out."""


class ConfigError(WmSenseError, ValueError):
    """A configuration object is missing fields or is inconsistent."""


class CaptureError(WmSenseError, OSError):
    """A sample capture or its metadata sidecar is malformed."""
