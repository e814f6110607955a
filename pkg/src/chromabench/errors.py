"""Exception types shared across the toolkit."""


class SpectraFormatError(ValueError):
    """A spectra CSV could not be parsed; the message names row and column."""


class DegenerateError(ValueError):
    """An input carries no usable signal (zero image, zero illuminant, ...)."""


class SchemaMismatchError(ValueError):
    """A regression model was applied to features of a different recipe."""
