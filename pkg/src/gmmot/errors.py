"""Exception hierarchy shared by every module of the package."""


class GmmotError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(GmmotError, ValueError):
    pass


class NotSymmetric(GmmotError, ValueError):
    pass


class NotPsd(GmmotError, ValueError):
    pass


class DegenerateComponent(GmmotError, ArithmeticError):
    pass


class EmptyComponent(GmmotError, ArithmeticError):
    """A mixture component received (numerically) zero total responsibility."""

    def __init__(self, indices):
        self.indices = list(indices)
        super().__init__(f"components with zero responsibility: {self.indices}")


class TooFewObservations(GmmotError, ValueError):
    pass


class NonFiniteData(GmmotError, ValueError):
    pass


class MalformedModel(GmmotError, ValueError):
    pass


class InfeasibleMarginals(GmmotError, ValueError):
    pass


class NumericalStall(GmmotError, RuntimeError):
    pass


class UnequalSampleCounts(GmmotError, ValueError):
    pass


class EmptySamples(GmmotError, ValueError):
    pass


class DimensionNotOne(GmmotError, ValueError):
    pass


class OrderingViolated(GmmotError, ValueError):
    pass


class LabelTooSmall(GmmotError, ValueError):
    def __init__(self, label, count, required):
        self.label = label
        self.count = count
        self.required = required
        super().__init__(
            f"label {label!r} has {count} observations, needs at least {required}"
        )


class EmptyTrainingSet(GmmotError, ValueError):
    pass
