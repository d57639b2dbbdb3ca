"""Exception and warning types raised by the solvers."""


class ExtremalError(Exception):
    """Base class for all errors raised by this package."""


class MeanNotZero(ExtremalError):
    """Right-hand side of a periodic Poisson problem does not integrate to zero."""

    def __init__(self, mean, tol_mean):
        self.mean = mean
        self.tol_mean = tol_mean
        super().__init__(f"rhs has mean {mean:.3e}, exceeds tol_mean={tol_mean:.1e}")


class NotPositive(ExtremalError):
    """A form density fails strict positivity."""


class NotAdmissible(ExtremalError):
    """A potential is not plurisubharmonic for its form on the grid."""

    def __init__(self, min_density, tol_pos, index=None):
        self.min_density = min_density
        self.tol_pos = tol_pos
        self.index = index
        where = "" if index is None else f" (form {index})"
        super().__init__(f"min Monge-Ampere density {min_density:.3e} < -{tol_pos:.1e}{where}")


class NoConvergence(ExtremalError):
    """An iterative solver ran out of iterations.

    ``best`` holds the last (or best) iterate and ``diagnostics`` a dict of
    residual information, so callers can inspect how far the solve got.
    """

    def __init__(self, message, iterations, best=None, diagnostics=None):
        self.iterations = iterations
        self.best = best
        self.diagnostics = dict(diagnostics or {})
        super().__init__(f"{message} after {iterations} iterations")


class PositivityLoss(NoConvergence):
    """Damping could not keep a Hermitian form positive definite."""


class LadderStalled(ExtremalError):
    """Two consecutive rungs of the beta ladder failed to converge."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)


class BoundViolated(ExtremalError):
    """A monitored series exceeded its bounded-sequence threshold."""

    def __init__(self, message, series=None, bound=None):
        self.series = series
        self.bound = bound
        super().__init__(message)


class ConfigError(ExtremalError):
    """Malformed or invalid run configuration."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if key is not None:
            loc.append(f"key {key!r}")
        prefix = f"{', '.join(loc)}: " if loc else ""
        super().__init__(prefix + message)


class FormatError(ExtremalError):
    """Field dump does not match the expected on-disk format."""

    def __init__(self, message, offset=None):
        self.offset = offset
        suffix = "" if offset is None else f" (byte offset {offset})"
        super().__init__(message + suffix)


class ExponentClampWarning(RuntimeWarning):
    """An exponent was clamped at the overflow guard."""
