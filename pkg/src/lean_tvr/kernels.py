"""Backend selection for the pair-graph kernel.

The compiled ``_pairgraph`` extension is used when it imports; otherwise the
pure-numpy implementation in ``_pairgraph_py``. Set ``LEAN_TVR_PURE_PYTHON=1``
to force the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, fields

import numpy as np

from . import _pairgraph_py
from .params import ModelParams

try:
    if os.environ.get("LEAN_TVR_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python forced")
    from . import _pairgraph as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _pairgraph_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

_active = _BACKENDS.get("cython", _pairgraph_py)


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def backend_name() -> str:
    return _active.BACKEND


def use_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _active = _BACKENDS[name]


def get_backend(name: str | None = None):
    return _active if name is None else _BACKENDS[name]


@dataclass
class KernelParams:
    """Per-layer parameters stacked along a leading layer axis, laid out as the
    kernels expect (C-contiguous float64)."""

    W_N: np.ndarray  # (L, d, d)
    W_x: np.ndarray
    W_fam: np.ndarray  # (L, 3, d, d): global, intra-text, intra-visual
    mlp_w1: np.ndarray  # (L, 2d, d)
    mlp_b1: np.ndarray  # (L, d)
    mlp_w2: np.ndarray  # (L, d)
    W0: np.ndarray
    W_mu: np.ndarray
    W_sigma: np.ndarray
    u: np.ndarray
    w: np.ndarray
    edge_logits: np.ndarray

    @classmethod
    def from_params(cls, p: ModelParams) -> "KernelParams":
        L, d = p.layers, p.dim

        def stack(key, shape):
            if L == 0:
                return np.zeros((0,) + shape)
            return np.ascontiguousarray(np.stack([p[f"enc.{l}.{key}"] for l in range(L)]))

        fam = (np.zeros((0, 3, d, d)) if L == 0 else np.ascontiguousarray(np.stack(
            [np.stack([p[f"enc.{l}.W_g"], p[f"enc.{l}.W_t"], p[f"enc.{l}.W_v"]]) for l in range(L)])))
        c = np.ascontiguousarray
        return cls(stack("W_N", (d, d)), stack("W_x", (d, d)), fam,
                   stack("mlp_w1", (2 * d, d)), stack("mlp_b1", (d,)), stack("mlp_w2", (d,)),
                   c(p["var.W0"]), c(p["var.W_mu"]), c(p["var.W_sigma"]),
                   c(p["readout.u"]), c(p["readout.w"]), c(p["edge_logits"]))

    def zeros_like(self) -> "KernelParams":
        return KernelParams(*(np.zeros_like(getattr(self, f.name)) for f in fields(self)))

    def scatter_into(self, grads: ModelParams) -> None:
        """Add these (gradient) values into the matching named entries."""
        for l in range(self.W_N.shape[0]):
            grads[f"enc.{l}.W_N"] += self.W_N[l]
            grads[f"enc.{l}.W_x"] += self.W_x[l]
            grads[f"enc.{l}.W_g"] += self.W_fam[l, 0]
            grads[f"enc.{l}.W_t"] += self.W_fam[l, 1]
            grads[f"enc.{l}.W_v"] += self.W_fam[l, 2]
            grads[f"enc.{l}.mlp_w1"] += self.mlp_w1[l]
            grads[f"enc.{l}.mlp_b1"] += self.mlp_b1[l]
            grads[f"enc.{l}.mlp_w2"] += self.mlp_w2[l]
        grads["var.W0"] += self.W0
        grads["var.W_mu"] += self.W_mu
        grads["var.W_sigma"] += self.W_sigma
        grads["readout.u"] += self.u
        grads["readout.w"] += self.w
        grads["edge_logits"] += self.edge_logits


def pair_forward(x0, st, kp: KernelParams, eps=None, backend: str | None = None):
    return get_backend(backend).pair_forward(np.ascontiguousarray(x0, dtype=np.float64), st, kp,
                                             None if eps is None else np.ascontiguousarray(eps))


def pair_grad(x0, st, kp: KernelParams, eps, dscore: float, dkl: float, gk: KernelParams,
              backend: str | None = None):
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    dx0 = np.zeros_like(x0)
    score, kl = get_backend(backend).pair_grad(
        x0, st, kp, None if eps is None else np.ascontiguousarray(eps),
        float(dscore), float(dkl), gk, dx0)
    return score, kl, dx0
