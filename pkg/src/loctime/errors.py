"""Exception hierarchy. Every error the package raises derives from LocTimeError."""


class LocTimeError(Exception):
    pass


# model
class NotPrimitive(LocTimeError):
    pass


class EmptyRowOrColumn(NotPrimitive):
    pass


class NonconvergentEigen(LocTimeError):
    pass


# spectral
class UncenteredObservable(LocTimeError):
    pass


class TooLarge(LocTimeError):
    pass


class InvalidGrid(LocTimeError):
    pass


class SpectralOverflow(LocTimeError):
    pass


class NonconvergentSeries(LocTimeError):
    pass


# kernel_quadrature
class QuadratureImagResidue(LocTimeError):
    pass


# verify
class TooFewSamples(LocTimeError):
    pass


class DegenerateVariance(LocTimeError):
    pass


class ProbableLattice(LocTimeError):
    pass


class InvalidWindow(LocTimeError):
    pass


class GridTooCoarse(LocTimeError):
    pass


class BadGridSize(LocTimeError):
    pass


# config
class ParseError(LocTimeError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(LocTimeError):
    pass
