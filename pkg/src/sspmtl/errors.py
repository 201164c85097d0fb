"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto the
documented process exit status (2 = configuration, 3 = data).
"""


class SspError(Exception):
    exit_code = 1


class ConfigError(SspError, ValueError):
    exit_code = 2


class DataError(SspError, ValueError):
    exit_code = 3


class InvalidProfileError(DataError):
    pass


class DomainError(DataError):
    pass


class ShapeError(DataError):
    pass


class DepthCoverageError(DataError):
    pass


class RayTurnsError(DataError):
    """A ray refracts back before reaching the receiver depth."""

    def __init__(self, depth, index=None):
        self.depth = float(depth)
        self.index = index
        super().__init__(f"ray turns at depth {self.depth:.3f} m")


class NoDirectPathError(DataError):
    def __init__(self, target_range, max_range):
        self.target_range = float(target_range)
        self.max_range = float(max_range)
        super().__init__(
            f"horizontal range {self.target_range:.3f} m unreachable by a direct "
            f"(non-turning) ray; maximum is {self.max_range:.3f} m"
        )


class ExtensionWarning(UserWarning):
    pass
