"""Multi-modal hypergraph construction.

Node order is fixed as ``[video_global, frame_1..frame_m, word_1..word_n]``.
Hyperedges come in the order ``[Global, IntraText, IntraVisual,
CrossModal(1..n)]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionError, GraphError


class EdgeKind(enum.IntEnum):
    GLOBAL = 0
    INTRA_TEXT = 1
    INTRA_VISUAL = 2
    CROSS_MODAL = 3


N_FAMILIES = len(EdgeKind)


@dataclass(frozen=True)
class Hyperedge:
    kind: EdgeKind
    members: tuple[int, ...]
    word: int | None = None  # cross-modal edges only, 0-based word position


@dataclass
class NodeSet:
    video_global: np.ndarray  # (d,)
    frames: np.ndarray  # (m, d)
    words: np.ndarray  # (n, d)

    @property
    def m(self) -> int:
        return self.frames.shape[0]

    @property
    def n(self) -> int:
        return self.words.shape[0]

    @property
    def size(self) -> int:
        return 1 + self.m + self.n

    def features(self) -> np.ndarray:
        return np.vstack([self.video_global[None, :], self.frames, self.words])


@dataclass
class Hypergraph:
    nodes: NodeSet
    edges: list[Hyperedge]
    incidence: np.ndarray
    edge_weights: np.ndarray
    node_degrees: np.ndarray
    edge_degrees: np.ndarray
    structure: "PairStructure" = field(repr=False, default=None)


def select_keyframes(raw_frames, m: int) -> list[int]:
    """Greedy farthest-point keyframe selection starting from frame 0.

    Each step picks the frame whose distance to the closest already-chosen
    frame is largest; ties go to the lowest index.
    """
    raw = np.asarray(raw_frames, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] == 0:
        raise GraphError("select_keyframes needs a non-empty (frames, dim) matrix")
    if m < 1:
        raise GraphError(f"keyframe count must be >= 1, got {m}")
    count = min(m, raw.shape[0])
    chosen = [0]
    taken = np.zeros(raw.shape[0], dtype=bool)
    taken[0] = True
    nearest = np.sqrt(((raw - raw[0]) ** 2).sum(axis=1))
    while len(chosen) < count:
        cand = np.where(taken, -np.inf, nearest)
        # argmax returns the first maximum, which is the lowest index
        nxt = int(np.argmax(cand))
        chosen.append(nxt)
        taken[nxt] = True
        nearest = np.minimum(nearest, np.sqrt(((raw - raw[nxt]) ** 2).sum(axis=1)))
    return chosen


def build_nodes(text_feats, frame_feats, proj_text, proj_video) -> NodeSet:
    text = np.asarray(text_feats, dtype=np.float64)
    frames = np.asarray(frame_feats, dtype=np.float64)
    if text.ndim != 2 or text.shape[0] == 0:
        raise GraphError("need at least one textual node")
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise GraphError("need at least one frame")
    if text.shape[1] != proj_text.shape[0]:
        raise DimensionError(
            f"text features have dim {text.shape[1]}, projection expects {proj_text.shape[0]}"
        )
    if frames.shape[1] != proj_video.shape[0]:
        raise DimensionError(
            f"frame features have dim {frames.shape[1]}, projection expects {proj_video.shape[0]}"
        )
    return NodeSet(
        video_global=frames.mean(axis=0) @ proj_video,
        frames=frames @ proj_video,
        words=text @ proj_text,
    )


def build_hyperedges(n: int, m: int) -> list[Hyperedge]:
    if n < 1 or m < 1:
        raise GraphError(f"need n >= 1 words and m >= 1 frames, got n={n}, m={m}")
    visual = tuple(range(0, m + 1))
    words = tuple(range(m + 1, m + 1 + n))
    edges = [
        Hyperedge(EdgeKind.GLOBAL, visual + words),
        Hyperedge(EdgeKind.INTRA_TEXT, words),
        Hyperedge(EdgeKind.INTRA_VISUAL, visual),
    ]
    for j, w in enumerate(words):
        edges.append(Hyperedge(EdgeKind.CROSS_MODAL, visual + (w,), word=j))
    return edges


def build_incidence(n_nodes: int, edges: list[Hyperedge]) -> np.ndarray:
    h = np.zeros((n_nodes, len(edges)), dtype=np.float64)
    for j, e in enumerate(edges):
        for i in e.members:
            if not 0 <= i < n_nodes:
                raise GraphError(f"edge {j} references node {i}, graph has {n_nodes} nodes")
            h[i, j] = 1.0
    return h


def degrees(h, w) -> tuple[np.ndarray, np.ndarray]:
    h = np.asarray(h, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (h.shape[1],):
        raise DimensionError(f"need {h.shape[1]} edge weights, got shape {w.shape}")
    if np.any(w <= 0):
        raise GraphError("edge weights must be strictly positive")
    return h @ w, h.sum(axis=0)


def normalized_adjacency(h, w, d_d, d_e) -> np.ndarray:
    """``D_d^-1/2 H W D_e^-1/2 H^T D_d^-1/2`` with the edge-degree exponent -1/2."""
    h = np.asarray(h, dtype=np.float64)
    d_d = np.asarray(d_d, dtype=np.float64)
    d_e = np.asarray(d_e, dtype=np.float64)
    if np.any(d_d <= 0) or np.any(d_e <= 0):
        raise GraphError("degrees must be strictly positive")
    r = d_d ** -0.5
    k = (h * (np.asarray(w) / np.sqrt(d_e))) @ h.T
    a = r[:, None] * k * r[None, :]
    return 0.5 * (a + a.T)


@dataclass(frozen=True, eq=False)
class PairStructure:
    """Index tables derived once per (n, m) and shared by every pair graph
    of that size."""

    n: int
    m: int
    edges: tuple[Hyperedge, ...]
    incidence: np.ndarray  # (N, M) float 0/1
    families: np.ndarray  # (M,) int32 EdgeKind codes
    text_mask: np.ndarray  # (N,) int8, 1 for word nodes
    adjacency: np.ndarray  # (N, N) shared-edge mask, zero diagonal
    mean_op: np.ndarray  # (M, N) member averaging
    text_mean_op: np.ndarray  # (M, N) text-member averaging (cross rows only)
    visual_mean_op: np.ndarray  # (M, N)
    pair_node: np.ndarray  # incidence nonzeros, sorted by node
    pair_edge: np.ndarray
    node_starts: np.ndarray  # offset of each node's first incidence pair
    incident_count: np.ndarray  # (N,)

    @property
    def n_nodes(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_edges(self) -> int:
        return self.incidence.shape[1]


@lru_cache(maxsize=256)
def pair_structure(n: int, m: int) -> PairStructure:
    edges = build_hyperedges(n, m)
    n_nodes = 1 + m + n
    h = build_incidence(n_nodes, edges)
    fam = np.array([e.kind for e in edges], dtype=np.int32)
    text_mask = np.zeros(n_nodes, dtype=np.int8)
    text_mask[m + 1:] = 1
    adj = ((h @ h.T) > 0).astype(np.float64)
    np.fill_diagonal(adj, 0.0)
    de = h.sum(axis=0)
    mean_op = h.T / de[:, None]
    tmean = np.zeros_like(mean_op)
    vmean = np.zeros_like(mean_op)
    for j, e in enumerate(edges):
        if e.kind == EdgeKind.CROSS_MODAL:
            t = [i for i in e.members if text_mask[i]]
            v = [i for i in e.members if not text_mask[i]]
            tmean[j, t] = 1.0 / len(t)
            vmean[j, v] = 1.0 / len(v)
    pn, pe = np.nonzero(h)
    counts = h.sum(axis=1).astype(np.int64)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    for arr in (h, fam, text_mask, adj, mean_op, tmean, vmean, pn, pe, starts, counts):
        arr.setflags(write=False)
    return PairStructure(n, m, tuple(edges), h, fam, text_mask, adj, mean_op, tmean, vmean,
                         pn.astype(np.int64), pe.astype(np.int64), starts, counts)


def family_weights(edge_logits, families) -> np.ndarray:
    """Per-edge positive weights ``exp(logit[family])``."""
    return np.exp(np.asarray(edge_logits, dtype=np.float64))[families]


def build_graph(nodes: NodeSet, edge_logits=None) -> Hypergraph:
    st = pair_structure(nodes.n, nodes.m)
    if edge_logits is None:
        edge_logits = np.zeros(N_FAMILIES)
    w = family_weights(edge_logits, st.families)
    d_d, d_e = degrees(st.incidence, w)
    return Hypergraph(nodes, list(st.edges), st.incidence, w, d_d, d_e, st)
