"""Exception types shared across the package (the CLI maps them to exit codes)."""


class DomainError(ValueError):
    """An argument lies outside the region where a quantity is defined or resolvable."""


class FormatError(ValueError):
    """A persisted file is malformed or truncated."""


class SolverError(RuntimeError):
    def __init__(self, msg, j=None, log_lines=()):
        super().__init__(msg if j is None else f"step {j}: {msg}")
        self.j = j
        self.log_lines = list(log_lines)
