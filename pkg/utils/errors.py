"""
Exception hierarchy for the Stokes-Darcy solver lab

Every error raised on purpose by the library derives from StokesDarcyError so
the CLI can map it to an exit code.
"""


class StokesDarcyError(Exception):
    """Base class for all library errors"""


class ConfigurationError(StokesDarcyError):
    """Inconsistent or malformed run configuration (mesh sizes, layouts, run files)"""


class ParameterError(StokesDarcyError):
    """Physical or dimensionless parameter outside its admissible range"""


class InputError(StokesDarcyError):
    """Matrix or vector input violating a kernel precondition"""


class DomainError(StokesDarcyError):
    """Evaluation point outside the subdomain owning the field"""


class DefinitenessError(StokesDarcyError):
    """Matrix expected to be SPD produced a non-positive pivot"""


class ContractViolation(StokesDarcyError):
    """Operator handed to a solver breaks its symmetry contract"""


class PreconditionerError(StokesDarcyError):
    """Preconditioner construction or application failed"""


class CapabilityError(StokesDarcyError):
    """Request exceeds a documented size limit of a dense code path"""


class ConvergenceFailure(StokesDarcyError):
    """At least one solve stopped at max_iter without reaching the reduction"""
