"""Exception hierarchy shared by every module.

All refusals raised by the toolkit derive from :class:`FactorlabError`, so the
command-line front end can map them to exit code 1 in one place.
"""


class FactorlabError(ValueError):
    """Base class for invalid input and refusals."""


class StructuralError(FactorlabError):
    """Dimension mismatch, empty space, malformed document."""


class HomogeneityError(FactorlabError):
    """The exponents violate sum(gamma_j / p_j) == 1."""


class PositivityError(FactorlabError):
    """A matrix flagged positive has a negative entry."""


class AdmissibilityError(FactorlabError):
    """Exponents outside the range where a certificate is guaranteed."""


class SaturationError(FactorlabError):
    """An operator has an identically zero row."""

    def __init__(self, message, operator_index=None, atom=None):
        super().__init__(message)
        self.operator_index = operator_index
        self.atom = atom


class BudgetError(FactorlabError):
    """A requested computation exceeds its work budget."""

    def __init__(self, message, required=None, limit=None):
        super().__init__(message)
        self.required = required
        self.limit = limit
