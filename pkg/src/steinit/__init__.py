"""Data-driven initialization of deep tanh/sigmoid networks from second-order Stein moments."""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    DegeneratePropagationError,
    DegenerateSignalError,
    NoDirectionError,
    NonFiniteGradientError,
    NotPositiveDefiniteError,
    RankDeficientError,
    SchemaError,
    UndefinedMetricError,
    WidthExceedsRankError,
)
from .data import Dataset, bundled_dataset, load_csv, load_schema, preprocess, split  # noqa: E402
from .initializers import (  # noqa: E402
    InitScheme,
    init_network,
    score2_cross_moment,
    stein_glm_init,
    stein_layer_init,
)
from .mlp import TrainConfig, evaluate, train  # noqa: E402
from .network import Architecture, NetworkParams  # noqa: E402

__all__ = [
    "__version__",
    "Architecture",
    "Dataset",
    "DegeneratePropagationError",
    "DegenerateSignalError",
    "InitScheme",
    "NetworkParams",
    "NoDirectionError",
    "NonFiniteGradientError",
    "NotPositiveDefiniteError",
    "RankDeficientError",
    "SchemaError",
    "TrainConfig",
    "UndefinedMetricError",
    "WidthExceedsRankError",
    "bundled_dataset",
    "evaluate",
    "init_network",
    "load_csv",
    "load_schema",
    "preprocess",
    "score2_cross_moment",
    "split",
    "stein_glm_init",
    "stein_layer_init",
    "train",
]
