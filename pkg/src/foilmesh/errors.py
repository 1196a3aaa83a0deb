"""Exception hierarchy.

Every exception carries a short ``category`` string; the CLI prints it as a
machine-greppable prefix and maps it to an exit code.
"""


class FoilError(Exception):
    category = "error"


class StructuralError(FoilError, ValueError):
    category = "structure"


class DegenerateFaceError(FoilError, ValueError):
    category = "degenerate"


class DegenerateEdgeError(FoilError, ValueError):
    category = "degenerate"


class DegenerateInputError(FoilError, ValueError):
    category = "degenerate"


class InsufficientInputError(FoilError, ValueError):
    category = "input"


class EmptyConstraintError(FoilError, ValueError):
    category = "constraint"


class InvalidSpecError(FoilError, ValueError):
    category = "config"


class InvalidParameterError(FoilError, ValueError):
    category = "config"


class ProjectionError(FoilError, ValueError):
    category = "degenerate"


class CFLViolationError(FoilError):
    category = "cfl"

    def __init__(self, dt, max_dt):
        self.dt = dt
        self.max_dt = max_dt
        super().__init__(
            f"time step {dt:.6g} violates CFL bound; admissible dt < {max_dt:.6g}"
        )


class NumericalDivergenceError(FoilError, FloatingPointError):
    category = "diverged"

    def __init__(self, message, vertex=None):
        self.vertex = vertex
        super().__init__(message)


class ParseError(FoilError, ValueError):
    category = "parse"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(FoilError, ValueError):
    category = "config"
