class MembraneSplitError(Exception):
    """Base class for errors raised by this package."""


class MeshError(MembraneSplitError):
    pass


class DegenerateTriangleError(MeshError):
    pass


class OffGridConstraintError(MembraneSplitError):
    """A constraint point does not coincide with a mesh vertex."""


class NonFiniteFieldError(MembraneSplitError):
    pass


class SingularSystemError(MembraneSplitError):
    """The block system could not be factorized."""

    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class ProbeSizeError(MembraneSplitError):
    pass


class ConfigError(MembraneSplitError):
    pass
