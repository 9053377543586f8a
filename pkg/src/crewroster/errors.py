"""Exception hierarchy shared across the solver."""


class CrewRosterError(Exception):
    """Base class; ``kind`` is a stable machine-readable tag used by the CLI."""

    kind = "error"


class ContractViolation(CrewRosterError, ValueError):
    kind = "contract_violation"


class CoverageError(CrewRosterError):
    kind = "coverage"


class ParameterError(CrewRosterError, ValueError):
    kind = "parameter"


class GenerationError(CrewRosterError):
    kind = "generation"


class ParseError(CrewRosterError):
    kind = "parse"


class SchemaVersionError(ParseError):
    kind = "schema_version"


class ReferenceMismatch(ParseError):
    kind = "reference"


class BuildError(CrewRosterError):
    kind = "network_build"


class FreezeConflictError(CrewRosterError):
    kind = "freeze_conflict"


class DecisionError(CrewRosterError):
    kind = "branch_decision"


class SizeError(CrewRosterError):
    kind = "size"


class InfeasibleInput(CrewRosterError):
    kind = "infeasible_input"


class MetricError(CrewRosterError, ValueError):
    kind = "undefined_metric"


class NumericError(CrewRosterError, ArithmeticError):
    kind = "numeric"
