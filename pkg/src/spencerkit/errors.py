class InputError(ValueError):
    """Bad user input: wrong dimensions, unknown names, out-of-range parameters."""


class UnsupportedAlgebraError(InputError):
    """The requested operation needs a nondegenerate (or definite) Killing form."""


class DegenerateConstraintError(InputError):
    """The co-moment value vanishes, so its nullifier is not a hyperplane."""


class ConstructionError(RuntimeError):
    """A built object failed one of its defining identities."""


class InvariantViolation(RuntimeError):
    """An internal identity that must hold by construction did not."""
