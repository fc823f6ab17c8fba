"""Exception types shared across the package."""


class MultableError(Exception):
    """Base class for contract failures raised by this package."""


class CapacityError(MultableError, ValueError):
    """An input exceeds a table limit, a scratch buffer or a memory budget."""


class DomainError(MultableError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(MultableError, ValueError):
    """A structural precondition on an input object does not hold."""


class StaleCheckpointError(MultableError):
    """A checkpoint does not belong to the run being resumed."""
