"""Exception types shared across the package."""


class CrmHazardError(Exception):
    """Base class for package-specific failures."""


class TruncationBudgetError(CrmHazardError):
    """Configured jump floor would drop more mass than the truncation budget allows."""


class DivergenceError(CrmHazardError):
    """A defining integral failed a finiteness check or quadrature did not converge."""


class HorizonError(CrmHazardError):
    """Cumulative hazard of a truncated realization saturates below the requested level."""


class UnsupportedPredictionError(CrmHazardError):
    """No closed-form limit constants exist for the requested (kernel, functional) pair."""


class InsufficientSamplesError(CrmHazardError):
    """Summary statistics require at least two samples."""
