"""Exception types.  Contract violations map to CLI exit code 2, I/O to 3."""


class AdaptFuncError(Exception):
    """Base class for all package errors."""


class ContractError(AdaptFuncError, ValueError):
    """A documented precondition was violated by the caller."""


class DomainError(ContractError):
    """A point lies outside the unit cube or a level is out of range."""


class GridError(ContractError):
    """The Lepski grid is empty or too short for the sample size."""


class SelectionError(ContractError):
    """No candidate satisfied the selection rule."""


class BoundsError(ContractError):
    """A declared bound was violated by the data or by a nuisance estimate."""


class ConstructionError(ContractError):
    """An object could not be built with the requested parameters."""


class SampleSizeError(ContractError):
    """Not enough observations for the requested operation."""


class InputError(AdaptFuncError, OSError):
    """A file could not be read, parsed or written."""
