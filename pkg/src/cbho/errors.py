"""Exception hierarchy. Each leaf carries the CLI exit code it maps to."""


class CBHOError(Exception):
    exit_code = 1


class ConfigError(CBHOError, ValueError):
    """Invalid parameters, config file or CLI input."""

    exit_code = 2


class DomainError(ConfigError):
    """An argument outside the domain of a formula (e.g. non-positive depth)."""


class WindowError(ConfigError):
    """The site window cannot hold the requested wavepacket."""


class StabilityError(ConfigError):
    """Time step violates the RK4 linear-stability bound."""


class WindowOverflowError(CBHOError):
    """Edge density exceeded the guard during a run.

    ``partial`` holds the observables recorded up to the abort.
    """

    exit_code = 3

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NumericalBlowupError(CBHOError):
    exit_code = 4

    def __init__(self, message, step=None, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial


class FitError(CBHOError):
    """The harmonic fit found no usable slow oscillation."""

    exit_code = 5


class ResonanceError(CBHOError, ZeroDivisionError):
    """A denominator of the perturbative velocity formula vanishes."""

    exit_code = 2


class DegenerateStateError(CBHOError, ValueError):
    exit_code = 1


class UndefinedCentroidError(CBHOError, ValueError):
    """No nearest-neighbour coherence, so the circular k mean is undefined."""

    exit_code = 1
