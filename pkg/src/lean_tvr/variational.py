"""Gaussian latent node representation over the hypergraph.

Two graph convolutions share their first layer ``W0``; the second layers
``W_mu`` / ``W_sigma`` give the mean and log standard deviation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import SeededRng, relu
from .params import VariationalParams

LOG_SIGMA_CLAMP = 10.0


@dataclass
class LatentState:
    mu: np.ndarray
    log_sigma: np.ndarray
    z: np.ndarray


def gcn_forward(x, a_bar, vp: VariationalParams):
    xw = x @ vp.W0
    t1 = a_bar @ xw
    r = relu(t1)
    hid = a_bar @ r
    mu = hid @ vp.W_mu
    raw = hid @ vp.W_sigma
    log_sigma = np.clip(raw, -LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP)
    return mu, log_sigma, (x, a_bar, xw, t1, r, hid, raw)


def gcn_backward(cache, dmu, dlog_sigma, vp: VariationalParams):
    """Returns ``(dx, da_bar, grads)``."""
    x, a_bar, xw, t1, r, hid, raw = cache
    draw = dlog_sigma * (np.abs(raw) < LOG_SIGMA_CLAMP)
    grads = {"W_mu": hid.T @ dmu, "W_sigma": hid.T @ draw}
    dhid = dmu @ vp.W_mu.T + draw @ vp.W_sigma.T
    da = dhid @ r.T
    dt1 = (a_bar.T @ dhid) * (t1 > 0)
    da += dt1 @ xw.T
    dxw = a_bar.T @ dt1
    grads["W0"] = x.T @ dxw
    dx = dxw @ vp.W0.T
    return dx, da, grads


def gcn_encode(x, a_bar, params: VariationalParams, tol: float = 1e-12):
    x = np.asarray(x, dtype=np.float64)
    a_bar = np.asarray(a_bar, dtype=np.float64)
    if a_bar.ndim != 2 or a_bar.shape[0] != a_bar.shape[1] or a_bar.shape[1] != x.shape[0]:
        raise DimensionError(f"adjacency {a_bar.shape} does not match node states {x.shape}")
    if x.shape[1] != params.W0.shape[0]:
        raise DimensionError(f"node dim {x.shape[1]} does not match W0 {params.W0.shape}")
    if np.max(np.abs(a_bar - a_bar.T), initial=0.0) > tol:
        raise DimensionError("normalized adjacency must be symmetric")
    mu, log_sigma, _ = gcn_forward(x, a_bar, params)
    return mu, log_sigma


def reparameterize(mu, log_sigma, rng: SeededRng | None = None, mode: str = "eval", eps=None):
    """``mu + eps * exp(log_sigma)`` in train mode, ``mu`` in eval mode."""
    if mode == "eval":
        return np.array(mu, dtype=np.float64, copy=True)
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if eps is None:
        eps = rng.normal(np.shape(mu))
    return mu + eps * np.exp(log_sigma)


def kl_loss(mu, log_sigma) -> float:
    """KL(N(mu, sigma^2) || N(0, 1)) summed over every element."""
    mu = np.asarray(mu, dtype=np.float64)
    ls = np.asarray(log_sigma, dtype=np.float64)
    return float(-0.5 * np.sum(1.0 + 2.0 * ls - mu * mu - np.exp(2.0 * ls)))


def kl_backward(mu, log_sigma, dk: float):
    return dk * mu, dk * (np.exp(2.0 * log_sigma) - 1.0)
