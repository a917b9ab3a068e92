# -*- coding: utf-8 -*-
"""
Exceptions raised by alkatomo. Every error carries a readable message; errors
about a violated numerical invariant also carry the measured violation.
"""


class AlkatomoError(Exception):
    """Base class for all alkatomo errors"""

    def __init__(self, message, violation=None):
        super(AlkatomoError, self).__init__(message)
        self.violation = violation


# ___________________________________________________
# States and pulses


class NotHermitian(AlkatomoError):
    pass


class TraceNotOne(AlkatomoError):
    pass


class NotPSD(AlkatomoError):
    pass


class NonUnitAxis(AlkatomoError):
    pass


# ___________________________________________________
# Traces


class EmptyGrid(AlkatomoError):
    pass


class GridMismatch(AlkatomoError):
    pass


class MetadataMismatch(AlkatomoError):
    pass


class TraceFormatError(AlkatomoError):
    """A trace file could not be parsed; the message names file and line"""

    def __init__(self, path, lineno, reason):
        super(TraceFormatError, self).__init__(
            "{0}:{1}: {2}".format(path, lineno, reason)
        )
        self.path = path
        self.lineno = lineno


# ___________________________________________________
# Fitting


class NoSpectralPeak(AlkatomoError):
    pass


class SingularDesign(AlkatomoError):
    pass


class NotConverged(AlkatomoError):
    pass


# ___________________________________________________
# Linear inversion and design


class SingularSystem(AlkatomoError):
    pass


class DimensionMismatch(AlkatomoError):
    pass


class CyclopsConventionMismatch(AlkatomoError):
    pass


class BoundInvalid(AlkatomoError):
    pass


class EmptyRange(AlkatomoError):
    pass


class BudgetTooSmall(AlkatomoError):
    pass


# ___________________________________________________
# Calibration


class DivisionNearZero(AlkatomoError):
    pass


class NonPositiveVoltage(AlkatomoError):
    pass


class FitFailed(AlkatomoError):
    pass


class AmplitudeNearZero(AlkatomoError):
    pass


# ___________________________________________________
# Plumbing


class ConfigError(AlkatomoError):
    pass


class OutputExists(AlkatomoError):
    pass
