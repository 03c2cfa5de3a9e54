class ConfspecError(Exception):
    """Base class for all package errors."""


class NonIntegralDegree(ConfspecError):
    def __init__(self, value):
        super().__init__(f"degree estimate {value:.6f} is not within 0.1 of an integer")
        self.value = value


class EmptyMeasure(ConfspecError):
    pass


class NotAdmissible(ConfspecError):
    pass


class MaxIterations(ConfspecError):
    pass


class DegenerateLattice(ConfspecError):
    pass


class WrongLattice(ConfspecError):
    pass


class TriangleInequalityViolated(ConfspecError):
    pass


class MeshError(ConfspecError):
    pass


class NonFiniteEntry(ConfspecError):
    pass


class SolverFailure(ConfspecError):
    pass


class ZeroFunction(ConfspecError):
    pass


class SearchFailure(ConfspecError):
    def __init__(self, message, landscape=None):
        super().__init__(message)
        self.landscape = landscape


class ModulusOutOfRange(ConfspecError):
    pass


class UnknownRow(ConfspecError):
    pass
