"""Named parameter store for the whole model."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .hypergraph import N_FAMILIES
from .numerics import SeededRng

LAYER_KEYS = ("W_N", "W_x", "W_g", "W_t", "W_v", "mlp_w1", "mlp_b1", "mlp_w2", "W_r")


@dataclass
class EncoderLayerParams:
    W_N: np.ndarray
    W_x: np.ndarray
    W_g: np.ndarray
    W_t: np.ndarray
    W_v: np.ndarray
    mlp_w1: np.ndarray  # (2d, d)
    mlp_b1: np.ndarray  # (d,)
    mlp_w2: np.ndarray  # (d,)
    W_r: np.ndarray
    gamma: float = 1.0

    def family_transform(self, kind: int) -> np.ndarray:
        return (self.W_g, self.W_t, self.W_v)[kind]


@dataclass
class VariationalParams:
    W0: np.ndarray
    W_mu: np.ndarray
    W_sigma: np.ndarray


@dataclass
class ReadoutParams:
    u: np.ndarray
    w: np.ndarray


class ModelParams(OrderedDict):
    """Ordered ``name -> float64 array`` map.

    Shapes are fixed at construction; ``layers``, ``dim`` and ``gamma`` are
    carried alongside so the map can be re-split into typed views.
    """

    def __init__(self, *args, layers: int = 0, gamma: float = 1.0, **kw):
        super().__init__(*args, **kw)
        self.layers = layers
        self.gamma = gamma

    @property
    def dim(self) -> int:
        return self["var.W0"].shape[0]

    @property
    def text_dim(self) -> int:
        return self["proj.text"].shape[0]

    @property
    def video_dim(self) -> int:
        return self["proj.video"].shape[0]

    def layer(self, l: int) -> EncoderLayerParams:
        return EncoderLayerParams(**{k: self[f"enc.{l}.{k}"] for k in LAYER_KEYS}, gamma=self.gamma)

    def encoder_layers(self) -> list[EncoderLayerParams]:
        return [self.layer(l) for l in range(self.layers)]

    def variational(self) -> VariationalParams:
        return VariationalParams(self["var.W0"], self["var.W_mu"], self["var.W_sigma"])

    def readout(self) -> ReadoutParams:
        return ReadoutParams(self["readout.u"], self["readout.w"])

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self.items()}

    def zeros_like(self) -> "ModelParams":
        return ModelParams(((k, np.zeros_like(v)) for k, v in self.items()),
                           layers=self.layers, gamma=self.gamma)

    def copy(self) -> "ModelParams":
        return ModelParams(((k, v.copy()) for k, v in self.items()),
                           layers=self.layers, gamma=self.gamma)

    def flat(self) -> np.ndarray:
        return np.concatenate([v.reshape(-1) for v in self.values()])

    def assign_flat(self, theta: np.ndarray) -> None:
        off = 0
        for k, v in self.items():
            v[...] = theta[off:off + v.size].reshape(v.shape)
            off += v.size


def param_shapes(dim: int, text_dim: int, video_dim: int, layers: int) -> "OrderedDict[str, tuple]":
    d = dim
    shapes = OrderedDict()
    shapes["proj.text"] = (text_dim, d)
    shapes["proj.video"] = (video_dim, d)
    for l in range(layers):
        for k in ("W_N", "W_x", "W_g", "W_t", "W_v"):
            shapes[f"enc.{l}.{k}"] = (d, d)
        shapes[f"enc.{l}.mlp_w1"] = (2 * d, d)
        shapes[f"enc.{l}.mlp_b1"] = (d,)
        shapes[f"enc.{l}.mlp_w2"] = (d,)
        shapes[f"enc.{l}.W_r"] = (d, d)
    for k in ("W0", "W_mu", "W_sigma"):
        shapes[f"var.{k}"] = (d, d)
    shapes["readout.u"] = (d,)
    shapes["readout.w"] = (d,)
    shapes["edge_logits"] = (N_FAMILIES,)
    return shapes


def init_params(dim: int, text_dim: int, video_dim: int, layers: int = 2,
                seed: int = 0, gamma: float = 1.0) -> ModelParams:
    """Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; biases and edge
    logits start at zero (unit edge weights).

    ``readout.w`` takes the absolute value of its draw so initial scores sit
    on the identity branch of the final LeakyReLU; a negative start scales
    every score difference, and so the whole contrastive gradient, by the
    0.01 slope.
    """
    rng = SeededRng(seed).child(0).generator
    out = ModelParams(layers=layers, gamma=gamma)
    for name, shape in param_shapes(dim, text_dim, video_dim, layers).items():
        if name == "edge_logits" or name.endswith("mlp_b1"):
            out[name] = np.zeros(shape)
            continue
        fan_in = shape[0] if name.startswith("proj.") else dim
        bound = 1.0 / np.sqrt(fan_in)
        out[name] = rng.uniform(-bound, bound, size=shape)
    out["readout.w"] = np.abs(out["readout.w"])
    return out
