"""Exception hierarchy shared by all modules."""


class HypermonError(Exception):
    """Base class for every error raised by the package."""


class SpecificationError(HypermonError):
    """A formula or data domain refers to something that does not exist."""


class UpdateError(HypermonError):
    """An observation update violates the append-only trace contract."""


class FormulaSyntaxError(SpecificationError):
    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line is not None else ""
        super().__init__(where + message)


class UnsupportedFragmentError(SpecificationError):
    """The formula is outside the fragment the monitor can handle."""


class PreconditionError(HypermonError):
    """An automaton operation was called on operands it does not accept."""


class GeneratorError(HypermonError):
    """A generator is unknown or was configured with bad arguments."""
