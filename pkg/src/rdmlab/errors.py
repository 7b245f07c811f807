"""Exception types raised by rdmlab."""


class RdmlabError(Exception):
    """Base class for all rdmlab errors."""


class SingularConfiguration(RdmlabError, ValueError):
    """A configuration point lies on the Coulomb singular set."""


class StepTooCoarse(RdmlabError):
    """Finite-difference derivative estimates at two scales disagree."""


class BudgetExceeded(RdmlabError):
    """A grid or dense matrix would exceed the configured memory budget."""


class StencilOutOfRange(RdmlabError):
    """No grid index admits the full finite-difference stencil."""


class FactorialBudget(RdmlabError):
    """A sum over the symmetric group was requested for too many particles."""


class PreconditionViolated(RdmlabError, ValueError):
    """Inputs break a structural precondition (e.g. overlapping supports)."""


class DegenerateWindow(RdmlabError):
    """A decay-fit window is too short or contains non-positive values."""


class ConfigError(RdmlabError):
    """An experiment configuration file is malformed.

    Attributes
    ----------
    field : str
        Dotted path of the offending field (``"particles.K"``), or ``""``
        for document-level problems.
    line : int or None
        Line number in the source file, when known.
    """

    def __init__(self, message, field="", line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
