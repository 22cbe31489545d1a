"""Graph readout, pair scores, the in-batch similarity matrix and the
training losses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import LEAKY_SLOPE, leaky_relu, log_softmax, sigmoid, softmax
from .params import ReadoutParams


@dataclass(frozen=True)
class LossWeights:
    lambda_v2t: float = 0.5
    lambda_t2v: float = 0.5
    lambda_v: float = 0.6

    def __post_init__(self):
        if min(self.lambda_v2t, self.lambda_t2v, self.lambda_v) < 0:
            raise ValueError("loss weights must be nonnegative")


def readout_forward(z_nodes, rp: ReadoutParams):
    a = z_nodes @ rp.u
    beta = softmax(a)
    pooled = beta @ z_nodes
    zr = sigmoid(pooled)
    g = zr @ rp.w
    score = float(leaky_relu(np.asarray(g)))
    return score, zr, (z_nodes, beta, zr, g)


def readout_backward(cache, dscore, rp: ReadoutParams):
    z_nodes, beta, zr, g = cache
    dg = dscore * (1.0 if g > 0 else LEAKY_SLOPE)
    dw = dg * zr
    dpooled = dg * rp.w * zr * (1.0 - zr)
    dz = beta[:, None] * dpooled[None, :]
    dbeta = z_nodes @ dpooled
    da = beta * (dbeta - beta @ dbeta)
    du = da @ z_nodes
    dz += da[:, None] * rp.u[None, :]
    return dz, {"u": du, "w": dw}


def readout(z_nodes, params: ReadoutParams) -> np.ndarray:
    """Attention-pooled graph vector ``sigmoid(sum_i softmax(u.h)_i h_i)``."""
    _, zr, _ = readout_forward(np.atleast_2d(np.asarray(z_nodes, dtype=np.float64)), params)
    return zr


def classify(z, params: ReadoutParams) -> float:
    """Pair logit ``LeakyReLU(w . z)`` from a graph vector."""
    return float(leaky_relu(np.asarray(np.dot(params.w, z))))


def retrieval_losses(s) -> tuple[float, float]:
    """Mean cross-entropy of each row (text->video) and each column
    (video->text) against the diagonal."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"similarity matrix must be square, got {s.shape}")
    l_t2v = -float(np.mean(np.diag(log_softmax(s, axis=1))))
    l_v2t = -float(np.mean(np.diag(log_softmax(s, axis=0))))
    return l_t2v, l_v2t


def retrieval_losses_grad(s, weights: LossWeights) -> np.ndarray:
    """d(lambda_t2v * l_t2v + lambda_v2t * l_v2t) / d scores."""
    b = s.shape[0]
    eye = np.eye(b)
    p_row = np.exp(log_softmax(s, axis=1))
    p_col = np.exp(log_softmax(s, axis=0))
    return (weights.lambda_t2v * (p_row - eye) + weights.lambda_v2t * (p_col - eye)) / b


def total_loss(l_v2t: float, l_t2v: float, l_kl: float, weights: LossWeights = LossWeights()) -> float:
    return weights.lambda_v2t * l_v2t + weights.lambda_t2v * l_t2v + weights.lambda_v * l_kl
