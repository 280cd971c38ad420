"""Architecture description and parameter container for feed-forward networks."""

import json
from dataclasses import dataclass, field

import numpy as np

from .activations import get_activation


@dataclass(frozen=True)
class Architecture:
    """Fully connected network with ``L`` equal-activation hidden layers and one output."""

    input_dim: int
    hidden_widths: tuple
    hidden_activation: str = "tanh"
    output_activation: str = "identity"
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if len(self.hidden_widths) < 1:
            raise ValueError("need at least one hidden layer")
        if min(self.hidden_widths) < 1:
            raise ValueError("hidden widths must be >= 1")
        if self.output_dim != 1:
            raise ValueError("only single-output networks are supported")
        get_activation(self.hidden_activation)
        get_activation(self.output_activation)

    @classmethod
    def for_task(cls, input_dim, depth, width, task, activation="tanh"):
        out = "sigmoid" if task == "binary-classification" else "identity"
        return cls(input_dim, (width,) * depth, activation, out)

    @property
    def depth(self):
        return len(self.hidden_widths)

    @property
    def layer_dims(self):
        """``(fan_in, fan_out)`` of every layer, output layer last."""
        dims = (self.input_dim,) + self.hidden_widths + (self.output_dim,)
        return list(zip(dims[:-1], dims[1:]))

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "hidden_widths": list(self.hidden_widths),
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "output_dim": self.output_dim,
        }


@dataclass
class NetworkParams:
    """Weights ``W[l]`` (fan_in x fan_out) and biases ``b[l]``; the output layer is last."""

    weights: list
    biases: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64).reshape(-1) for b in self.biases]
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases differ in length")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or w.shape[1] != b.shape[0]:
                raise ValueError(f"inconsistent layer shapes {w.shape} / {b.shape}")
        for w_prev, w in zip(self.weights[:-1], self.weights[1:]):
            if w_prev.shape[1] != w.shape[0]:
                raise ValueError("consecutive layer shapes do not chain")

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def hidden(self):
        return list(zip(self.weights[:-1], self.biases[:-1]))

    @property
    def W_out(self):
        return self.weights[-1]

    @property
    def b_out(self):
        return self.biases[-1]

    def arrays(self):
        """Flat list ``[W_1, b_1, ..., W_o, b_o]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_arrays(cls, arrays, meta=None):
        return cls(list(arrays[0::2]), list(arrays[1::2]), dict(meta or {}))

    def copy(self):
        return NetworkParams.from_arrays([a.copy() for a in self.arrays()], self.meta)

    def check(self, arch):
        dims = arch.layer_dims
        if len(dims) != self.n_layers:
            raise ValueError(f"architecture has {len(dims)} layers, params {self.n_layers}")
        for (fan_in, fan_out), w in zip(dims, self.weights):
            if w.shape != (fan_in, fan_out):
                raise ValueError(f"weight shape {w.shape} != {(fan_in, fan_out)}")

    def all_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def to_dict(self):
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["weights"], d["biases"], d.get("meta", {}))

    def save(self, path, arch=None):
        doc = self.to_dict()
        if arch is not None:
            doc["architecture"] = arch.to_dict()
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f)

    @classmethod
    def load(cls, path):
        """Returns ``(params, architecture_or_None)``."""
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
        arch = doc.get("architecture")
        if arch is not None:
            arch = Architecture(**arch)
        return cls.from_dict(doc), arch
