"""Exception types shared across the package."""


class ChargeModelError(ValueError):
    """Invalid charge-distribution data (strengths, radii, positions)."""


class SingularLocationError(ChargeModelError):
    """Potential requested at (or too close to) a point-charge location."""


class MergedAtomTooHeavyError(ChargeModelError):
    """A pushforward merged atoms into one of strength above 1."""


class BelowGapError(RuntimeError):
    """A trial function dives below the lower continuum edge."""


class NoGapEigenvalueError(RuntimeError):
    """No eigenvalue inside the gap for the requested problem."""


class IllConditionedBasisError(RuntimeError):
    """Metric factorization failed or condition cap exceeded after filtering."""


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""
