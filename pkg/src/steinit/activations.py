from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class Activation:
    name: str
    fn: Callable
    # derivative expressed through the activation output h = fn(a)
    deriv_from_output: Callable
    slope_at_zero: float


def _identity(a):
    return a


TANH = Activation("tanh", np.tanh, lambda h: 1.0 - h * h, 1.0)
SIGMOID = Activation("sigmoid", expit, lambda h: h * (1.0 - h), 0.25)
IDENTITY = Activation("identity", _identity, lambda h: np.ones_like(h), 1.0)

ACTIVATIONS = {act.name: act for act in (TANH, SIGMOID, IDENTITY)}


def get_activation(name):
    if isinstance(name, Activation):
        return name
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(
            f"unsupported activation {name!r}; choose from {sorted(ACTIVATIONS)}"
        ) from None
