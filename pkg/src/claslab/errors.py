"""Exception hierarchy shared across claslab."""


class ClasError(Exception):
    """Base class for all claslab errors."""


class ShapeError(ClasError, ValueError):
    pass


class LengthError(ClasError, ValueError):
    """Sequence longer than the model (or decode budget) allows."""


class FormatError(ClasError, ValueError):
    """A file does not follow its documented on-disk layout."""


class CorpusError(ClasError, ValueError):
    pass


class TemplateError(ClasError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class ActivationError(ClasError, FloatingPointError):
    pass


class ProvenanceError(ClasError):
    """Category table and steering config disagree on languages/threshold/corpus."""


class DegenerateInputError(ClasError, ValueError):
    pass


class PerplexityError(ClasError, ValueError):
    pass
