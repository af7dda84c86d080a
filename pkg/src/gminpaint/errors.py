"""Exception types raised by gminpaint."""


class InpaintError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedFormat(InpaintError):
    """Image file is not 8-bit grayscale PGM/PNG."""


class CorruptImage(InpaintError):
    """Image header or payload could not be parsed."""


class DimensionMismatch(InpaintError, ValueError):
    pass


class EmptyRegion(InpaintError, ValueError):
    pass


class DegeneratePatches(InpaintError):
    """Patch set has zero variance or too few samples for PCA."""


class InsufficientData(InpaintError, ValueError):
    pass


class MalformedModel(InpaintError):
    """Prior model file is truncated, inconsistent or of an unknown version."""


class UncoverableMask(InpaintError):
    """Unknown pixels lie on the image border.

    ``pixels`` holds the offending (row, col) coordinates.
    """

    def __init__(self, pixels):
        self.pixels = [tuple(int(v) for v in p) for p in pixels]
        shown = ", ".join(str(p) for p in self.pixels[:10])
        more = "" if len(self.pixels) <= 10 else f" (+{len(self.pixels) - 10} more)"
        super().__init__(f"unknown pixels on the image border cannot be inpainted: {shown}{more}")


class NumericalFailure(InpaintError):
    """A Gaussian operation produced non-finite values even after regularization."""

    def __init__(self, message, clique=None, edge=None):
        self.clique = clique
        self.edge = edge
        where = []
        if clique is not None:
            where.append(f"clique {clique}")
        if edge is not None:
            where.append(f"edge {edge[0]}->{edge[1]}")
        suffix = f" [{', '.join(where)}]" if where else ""
        super().__init__(message + suffix)


class ScheduleError(InpaintError, ValueError):
    """Requested message schedule does not apply to the clique graph."""
