"""Shared exception types.

Domain violations (bad labels, malformed preferences, out-of-range
parameters) raise plain ValueError at the call site. The classes here mark
conditions the CLI maps to dedicated exit codes.
"""


class CapacityError(Exception):
    """A declared size cap was exceeded (agents, paths, enumeration width)."""


class IterationLimitError(CapacityError):
    """An iterative kernel hit its pivot/step cap before converging."""


class ComputationError(Exception):
    """A scenario failed mid-computation for a non-schema, non-capacity reason."""


class SchemaError(Exception):
    """Config rejected: syntax, unknown key, wrong type, or missing field.

    `path` is a dotted/indexed location like ``wardrop.edges[3].b``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)
