"""Batch-level model: projection, pair scoring, the B x B similarity matrix,
and the exact gradient of the weighted training loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError, GraphError, NonFiniteError
from .hypergraph import pair_structure
from .numerics import SeededRng
from .params import ModelParams
from .scoring import LossWeights, retrieval_losses, retrieval_losses_grad, total_loss


@dataclass
class Projected:
    words: list[np.ndarray]  # per text, (n_i, d)
    frames: list[np.ndarray]  # per video, (m_j, d)
    video_global: list[np.ndarray]  # per video, (d,)


def _check_inputs(texts, videos, params: ModelParams):
    for t in texts:
        if t.ndim != 2 or t.shape[0] < 1:
            raise GraphError("every text needs at least one feature row")
        if t.shape[1] != params.text_dim:
            raise DimensionError(f"text dim {t.shape[1]} != projection input {params.text_dim}")
    for v in videos:
        if v.ndim != 2 or v.shape[0] < 1:
            raise GraphError("every video needs at least one frame")
        if v.shape[1] != params.video_dim:
            raise DimensionError(f"video dim {v.shape[1]} != projection input {params.video_dim}")


def project(texts, videos, params: ModelParams) -> Projected:
    _check_inputs(texts, videos, params)
    pt, pv = params["proj.text"], params["proj.video"]
    return Projected(
        words=[t @ pt for t in texts],
        frames=[v @ pv for v in videos],
        video_global=[v.mean(axis=0) @ pv for v in videos],
    )


def node_inputs(proj: Projected, i: int, j: int) -> np.ndarray:
    return np.vstack([proj.video_global[j][None, :], proj.frames[j], proj.words[i]])


def _eps(rng: SeededRng | None, n_nodes: int, d: int):
    return None if rng is None else rng.normal((n_nodes, d))


def score_matrix(texts, videos, params: ModelParams, mode: str = "eval",
                 rng: SeededRng | None = None, backend: str | None = None):
    """Scores and per-graph KL values for every (text i, video j) pair.

    Rows index texts, columns index videos. In train mode one noise draw per
    pair graph is taken from ``rng`` in row-major pair order.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "train" and rng is None:
        raise ValueError("train mode needs an rng")
    if len(texts) == 0 or len(videos) == 0:
        raise ValueError("empty batch")
    proj = project(texts, videos, params)
    kp = kernels.KernelParams.from_params(params)
    d = params.dim
    s = np.empty((len(texts), len(videos)))
    kl = np.empty_like(s)
    for i in range(len(texts)):
        for j in range(len(videos)):
            st = pair_structure(proj.words[i].shape[0], proj.frames[j].shape[0])
            eps = _eps(rng if mode == "train" else None, st.n_nodes, d)
            s[i, j], kl[i, j] = kernels.pair_forward(node_inputs(proj, i, j), st, kp, eps, backend)
    return s, kl


def similarity_matrix(texts, videos, params: ModelParams, mode: str = "eval",
                      rng: SeededRng | None = None, backend: str | None = None) -> np.ndarray:
    return score_matrix(texts, videos, params, mode, rng, backend)[0]


def pair_score(text_feats, video_feats, params: ModelParams, mode: str = "eval",
               rng: SeededRng | None = None, backend: str | None = None) -> float:
    s = similarity_matrix([np.asarray(text_feats, dtype=np.float64)],
                          [np.asarray(video_feats, dtype=np.float64)], params, mode, rng, backend)
    return float(s[0, 0])


def _kl_sizes(proj: Projected, d: int) -> np.ndarray:
    """Element count of each pair graph's latent matrix."""
    n = np.array([w.shape[0] for w in proj.words], dtype=np.float64)
    m = np.array([f.shape[0] for f in proj.frames], dtype=np.float64)
    return (1.0 + m[None, :] + n[:, None]) * d


@dataclass
class BatchResult:
    loss: float
    l_t2v: float
    l_v2t: float
    l_kl: float
    scores: np.ndarray


def loss_and_grad(texts, videos, params: ModelParams, weights: LossWeights = LossWeights(),
                  rng: SeededRng | None = None, backend: str | None = None):
    """Exact gradient of the weighted batch loss w.r.t. every named parameter.

    ``rng=None`` runs the deterministic (eval-mode) forward. Otherwise one
    noise matrix per pair graph is drawn and held fixed through the reverse
    pass. The KL term is each graph's summed KL divided by its element count
    (nodes x dim), averaged over the B*B pair graphs.
    """
    b = len(texts)
    if b == 0 or len(videos) != b:
        raise ValueError("need a non-empty batch of matched text/video pairs")
    proj = project(texts, videos, params)
    kp = kernels.KernelParams.from_params(params)
    d = params.dim
    eps = {}
    s = np.empty((b, b))
    kl = np.empty((b, b))
    for i in range(b):
        for j in range(b):
            st = pair_structure(proj.words[i].shape[0], proj.frames[j].shape[0])
            eps[i, j] = _eps(rng, st.n_nodes, d)
            s[i, j], kl[i, j] = kernels.pair_forward(node_inputs(proj, i, j), st, kp, eps[i, j], backend)
    sizes = _kl_sizes(proj, d)
    l_t2v, l_v2t = retrieval_losses(s)
    l_kl = float(np.mean(kl / sizes))
    loss = total_loss(l_v2t, l_t2v, l_kl, weights)

    ds = retrieval_losses_grad(s, weights)
    dkl = weights.lambda_v / (b * b) / sizes
    gk = kp.zeros_like()
    dwords = [np.zeros_like(w) for w in proj.words]
    dframes = [np.zeros_like(f) for f in proj.frames]
    dglobal = [np.zeros_like(g) for g in proj.video_global]
    for i in range(b):
        for j in range(b):
            n_i = proj.words[i].shape[0]
            m_j = proj.frames[j].shape[0]
            st = pair_structure(n_i, m_j)
            _, _, dx0 = kernels.pair_grad(node_inputs(proj, i, j), st, kp, eps[i, j],
                                          ds[i, j], dkl[i, j], gk, backend)
            dglobal[j] += dx0[0]
            dframes[j] += dx0[1:1 + m_j]
            dwords[i] += dx0[1 + m_j:]

    grads = params.zeros_like()
    gk.scatter_into(grads)
    for t, dw in zip(texts, dwords):
        grads["proj.text"] += t.T @ dw
    for v, df, dg in zip(videos, dframes, dglobal):
        grads["proj.video"] += v.T @ df + np.outer(v.mean(axis=0), dg)

    if not np.isfinite(loss):
        bad = [k for k, v in params.items() if not np.all(np.isfinite(v))]
        bad += [k for k, v in grads.items() if not np.all(np.isfinite(v))]
        raise NonFiniteError(f"non-finite loss; offending parameter: {bad[0] if bad else 'unknown'}")
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {k!r}")
    return BatchResult(loss, l_t2v, l_v2t, l_kl, s), grads


def batch_loss(texts, videos, params: ModelParams, weights: LossWeights = LossWeights(),
               rng: SeededRng | None = None, backend: str | None = None) -> float:
    """Forward-only loss with the same noise draws :func:`loss_and_grad` would use."""
    s, kl = score_matrix(texts, videos, params, "eval" if rng is None else "train", rng, backend)
    proj = project(texts, videos, params)
    l_t2v, l_v2t = retrieval_losses(s)
    return total_loss(l_v2t, l_t2v, float(np.mean(kl / _kl_sizes(proj, params.dim))), weights)
