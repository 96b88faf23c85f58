"""Exception types shared by the pipeline stages."""


class LunarHDAError(Exception):
    """Base class for all pipeline errors."""


class ParseError(LunarHDAError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class BoundsError(LunarHDAError, ValueError):
    """A bounding box or pixel lies outside the image."""


class DegenerateGeometry(LunarHDAError, ValueError):
    """Parallel rays, identical camera centres, or a line of sight at/above the horizon."""


class InsufficientPoints(LunarHDAError):
    pass


class DegenerateFit(LunarHDAError):
    pass


class InsufficientOverlap(LunarHDAError):
    """Too few terrain points are visible in both views."""


class NoCandidates(LunarHDAError):
    """The hazard map left no free region large enough for the vehicle."""
