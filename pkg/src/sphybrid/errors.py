"""Exception hierarchy.

Domain failures (an assumption does not hold, a certificate cannot be
built) derive from :class:`DomainError`; the CLI maps them to exit code 1.
Malformed input derives from :class:`InputError` and maps to exit code 2.
"""


class SphybridError(Exception):
    """Base class for all package errors."""


class DomainError(SphybridError):
    pass


class InputError(SphybridError):
    pass


class LinalgError(DomainError):
    pass


class NotHurwitzError(LinalgError):
    def __init__(self, message, mode=None, block=None):
        super().__init__(message)
        self.mode = mode
        self.block = block


class IllConditionedError(LinalgError):
    pass


class NotSymmetricError(LinalgError):
    pass


class NotPDError(LinalgError):
    pass


class NegativeEntryError(LinalgError):
    pass


class ExpmOverflowError(LinalgError):
    pass


class ValidationError(InputError):
    """Raised when a system fails :func:`sphybrid.model.validate`."""

    def __init__(self, findings):
        self.findings = list(findings)
        lines = "; ".join(f"{f.kind}: {f.message}" for f in self.findings)
        super().__init__(f"invalid hybrid system: {lines}")


class SingularA22Error(DomainError):
    def __init__(self, mode, relative_det):
        super().__init__(
            f"fast block A22 of mode {mode} is singular "
            f"(relative determinant {relative_det:.3e})"
        )
        self.mode = mode
        self.relative_det = relative_det


class SuppliedDataInvalid(DomainError):
    pass


class NotScalarTwoModeError(DomainError):
    pass


class EpsilonOutOfRangeError(DomainError):
    pass


class EpsilonAboveThresholdError(DomainError):
    def __init__(self, epsilon, epsilon_star, case):
        super().__init__(
            f"epsilon={epsilon:.6g} is not below the validity threshold "
            f"{epsilon_star:.6g} of case {case}"
        )
        self.epsilon = epsilon
        self.epsilon_star = epsilon_star
        self.case = case


class NoFeasibleAError(DomainError):
    pass


class InfeasibleError(DomainError):
    """No dwell-time is certified by the Lyapunov data at this epsilon."""


class ScheduleIncompatibleError(DomainError):
    pass


class DimensionMismatchError(InputError):
    pass


class ConfigError(InputError):
    pass
