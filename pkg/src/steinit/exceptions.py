"""Exception types raised across the package."""

import numpy as np


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization met a non-positive pivot."""

    def __init__(self, pivot, index):
        self.pivot = float(pivot)
        self.index = int(index)
        super().__init__(
            f"matrix is not positive definite: pivot {index} = {pivot:.6g}"
        )


class RankDeficientError(np.linalg.LinAlgError):
    pass


class WidthExceedsRankError(ValueError):
    """Requested layer width is larger than the number of available eigenvectors."""


class DegenerateSignalError(ValueError):
    """Every eigenvalue of the cross-moment matrix is numerically zero."""


class NoDirectionError(ValueError):
    """First-order moment estimate has (numerically) zero norm."""


class DegeneratePropagationError(RuntimeError):
    def __init__(self, layer, message=None):
        self.layer = layer
        super().__init__(
            message
            or f"activations collapsed after hidden layer {layer}: "
            "every neuron has std-dev < 1e-8"
        )


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, layer):
        self.layer = layer
        super().__init__(f"non-finite gradient in layer {layer!r}")


class UndefinedMetricError(ValueError):
    pass


class SchemaError(ValueError):
    pass
