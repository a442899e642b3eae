# odometry/gnss/exceptions.py
"""
Exception hierarchy for the odometry engine.

Every error carries a stable ``code`` so that the management commands and the
REST layer can report it in a structured way, e.g. ``rinex_format: bad epoch``.
"""


class OdometryError(Exception):
    """Base class for all errors raised by the engine."""

    code = "odometry_error"

    def __init__(self, message, **details):
        self.message = message
        self.details = details
        super().__init__(message)

    def as_dict(self):
        return {"error": self.code, "details": self.message, **self.details}


class GeodesyError(OdometryError):
    code = "geodesy"


class LieGroupError(OdometryError):
    code = "lie_group"


class EphemerisError(OdometryError):
    code = "ephemeris"


class StaleEphemerisError(EphemerisError):
    code = "stale_ephemeris"


class KeplerConvergenceError(EphemerisError):
    code = "kepler_convergence"


class AtmosphereError(OdometryError):
    code = "atmosphere"


class RinexError(OdometryError):
    code = "rinex"


class RinexHeaderError(RinexError):
    code = "rinex_header"


class RinexFormatError(RinexError):
    code = "rinex_format"


class EmptyObservationError(RinexError):
    code = "zero_epochs"


class TruthFileError(OdometryError):
    code = "truth_file"


class ConfigurationError(OdometryError):
    code = "configuration"


class SimulationError(OdometryError):
    code = "simulation"


class FactorError(OdometryError):
    code = "factor"


class SolverError(OdometryError):
    """Normal-equation factorization failed; ``details`` holds conditioning info."""

    code = "solver"


class InitializationError(OdometryError):
    code = "cannot_initialize"


class BaselineError(OdometryError):
    code = "baseline"


class EvaluationError(OdometryError):
    code = "evaluation"
