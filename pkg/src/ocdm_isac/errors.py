"""Exception types raised by the simulator."""


class InvalidOrderError(ValueError):
    """Fresnel transform order is not a positive even integer."""


class ConstraintViolation(ValueError):
    """A channel path breaks the CP / subcarrier-spacing limits of the frame."""


class ConfigError(ValueError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class NumericalError(RuntimeError):
    """A numerical stage produced non-finite or degenerate output."""
