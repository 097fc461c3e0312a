"""Exception types shared across the package."""


class ConvDecError(Exception):
    """Base class; input errors map to CLI exit status 2."""


class InputError(ConvDecError, ValueError):
    pass


class DomainError(InputError):
    pass


class NonConvexInput(InputError):
    pass


class NotNormalized(InputError):
    pass


class EpsilonError(InputError):
    pass


class NonPositiveScale(InputError):
    pass


class NotOriginCentered(InputError):
    pass


class NotAdmissible(InputError):
    pass


class NotClassP2(InputError):
    pass


class InsufficientScales(InputError):
    pass


class MisalignedPartition(InputError):
    pass


class GridTooLarge(InputError):
    pass


class BadExponent(InputError):
    pass


class SupportViolation(InputError):
    pass


class PartsDontSum(InputError):
    pass


class IndexMismatch(InputError):
    pass


class UnknownReportKind(InputError):
    pass


class CheckFailure(ConvDecError, AssertionError):
    """A certified inequality failed; maps to CLI exit status 1."""


class InvariantViolation(CheckFailure):
    pass


class AdmissibilityFailure(CheckFailure):
    pass


class CertificationFailure(CheckFailure):
    pass


class SeparationViolation(CheckFailure):
    pass


class BijectionFailure(CheckFailure):
    pass
