"""Exception types shared across the package."""


class InputError(ValueError):
    """An argument violates a documented precondition."""


class CapacityError(RuntimeError):
    """An exact-enumeration or hint-volume bound was exceeded."""


class ContractViolation(RuntimeError):
    """A runtime protocol guarantee (smoothness certificate, hint support,
    prediction range) failed during a game."""


class FitError(RuntimeError):
    """A scaling fit could not be performed on the given rows."""
