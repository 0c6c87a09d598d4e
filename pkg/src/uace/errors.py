"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation failures exit 1, numerical
failures exit 2, usage errors exit 3.
"""


class UaceError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(UaceError):
    """Input data violates a documented invariant or precondition."""


class BundleFormatError(ValidationError):
    """An on-disk bundle directory is malformed."""


class MissingFileError(BundleFormatError):
    """A file named by the manifest is absent."""


class DimensionError(BundleFormatError):
    """Declared and actual matrix dimensions disagree."""


class ChecksumError(BundleFormatError):
    """A stored matrix does not match its manifest checksum."""


class NumericalError(UaceError):
    """A solver or factorization failed beyond recoverable jitter."""
