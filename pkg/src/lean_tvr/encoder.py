"""Hypergraph attention encoder.

Each layer runs, in order: node message passing, hyperedge update,
per-node attention over incident hyperedges, the attention-weighted node
update, and gated hyperedge aggregation.

The public functions take ``(GraphState, Hypergraph, EncoderLayerParams)``.
The ``*_forward`` / ``*_backward`` pairs underneath work on raw arrays plus a
:class:`~lean_tvr.hypergraph.PairStructure` and are what the pure-Python
kernel composes for exact gradients.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GraphError
from .hypergraph import EdgeKind, Hypergraph, PairStructure
from .numerics import LEAKY_SLOPE, leaky_relu, relu
from .params import EncoderLayerParams

_FAMILY_KINDS = (EdgeKind.GLOBAL, EdgeKind.INTRA_TEXT, EdgeKind.INTRA_VISUAL)


@dataclass
class GraphState:
    node_states: np.ndarray
    edge_states: np.ndarray
    layer: int = 0
    attention: list[np.ndarray] = field(default_factory=list)
    """Per-layer attention values aligned with ``structure.pair_node``."""


# -- node message passing -----------------------------------------------------

def message_forward(x, st: PairStructure, d_d, W_N, W_x):
    y = x / d_d[:, None]
    q = st.adjacency @ y
    pre = q @ W_N + x @ W_x
    return relu(pre), (x, d_d, q, pre)


def message_backward(cache, dout, st: PairStructure, W_N, W_x):
    x, d_d, q, pre = cache
    dpre = dout * (pre > 0)
    dW_N = q.T @ dpre
    dW_x = x.T @ dpre
    dy = st.adjacency.T @ (dpre @ W_N.T)
    dx = dpre @ W_x.T + dy / d_d[:, None]
    dd_d = -(dy * x).sum(axis=1) / d_d ** 2
    return dx, dd_d, dW_N, dW_x


def node_message_pass(state: GraphState, graph: Hypergraph, params: EncoderLayerParams):
    out, _ = message_forward(state.node_states, graph.structure, graph.node_degrees,
                             params.W_N, params.W_x)
    return out


# -- hyperedge update ---------------------------------------------------------

def edge_update_forward(x, st: PairStructure, lp: EncoderLayerParams):
    mbar = st.mean_op @ x
    e = np.empty_like(mbar)
    cache = {"x": x, "mbar": mbar}
    for kind in _FAMILY_KINDS:
        idx = np.flatnonzero(st.families == kind)
        if idx.size == 0:
            continue
        pre = mbar[idx] @ lp.family_transform(kind)
        e[idx] = leaky_relu(pre)
        cache[int(kind)] = (idx, pre)
    idx = np.flatnonzero(st.families == EdgeKind.CROSS_MODAL)
    if idx.size:
        tb = st.text_mean_op[idx] @ x
        vb = st.visual_mean_op[idx] @ x
        s = (tb * vb).sum(axis=1)
        y = s[:, None] * mbar[idx]
        nrm = np.sqrt((y * y).sum(axis=1))
        safe = np.where(nrm > 0, nrm, 1.0)
        e[idx] = np.where(nrm[:, None] > 0, y / safe[:, None], 0.0)
        cache["cross"] = (idx, tb, vb, s, y, nrm)
    return e, cache


def edge_update_backward(cache, de, st: PairStructure, lp: EncoderLayerParams):
    mbar = cache["mbar"]
    dmbar = np.zeros_like(mbar)
    dx = np.zeros_like(cache["x"])
    grads = {}
    names = {EdgeKind.GLOBAL: "W_g", EdgeKind.INTRA_TEXT: "W_t", EdgeKind.INTRA_VISUAL: "W_v"}
    for kind in _FAMILY_KINDS:
        if int(kind) not in cache:
            grads[names[kind]] = np.zeros_like(lp.W_g)
            continue
        idx, pre = cache[int(kind)]
        dpre = de[idx] * np.where(pre > 0, 1.0, LEAKY_SLOPE)
        grads[names[kind]] = mbar[idx].T @ dpre
        dmbar[idx] += dpre @ lp.family_transform(kind).T
    if "cross" in cache:
        idx, tb, vb, s, y, nrm = cache["cross"]
        live = nrm > 0
        safe = np.where(live, nrm, 1.0)
        yhat = y / safe[:, None]
        g = de[idx]
        dy = (g - yhat * (yhat * g).sum(axis=1, keepdims=True)) / safe[:, None]
        dy[~live] = 0.0
        ds = (dy * mbar[idx]).sum(axis=1)
        dmbar[idx] += s[:, None] * dy
        dx += st.text_mean_op[idx].T @ (ds[:, None] * vb)
        dx += st.visual_mean_op[idx].T @ (ds[:, None] * tb)
    dx += st.mean_op.T @ dmbar
    return dx, grads


def hyperedge_update(state: GraphState, graph: Hypergraph, params: EncoderLayerParams):
    st = graph.structure
    for e in st.edges:
        if e.kind == EdgeKind.CROSS_MODAL:
            kinds = {bool(st.text_mask[i]) for i in e.members}
            if kinds != {True, False}:
                raise GraphError("cross-modal hyperedge must hold both text and visual nodes")
    out, _ = edge_update_forward(state.node_states, st, params)
    return out


# -- attention ----------------------------------------------------------------

def _segment_softmax(scores, st: PairStructure):
    starts = st.node_starts
    mx = np.maximum.reduceat(scores, starts)
    ex = np.exp(scores - mx[st.pair_node])
    tot = np.add.reduceat(ex, starts)
    return ex / tot[st.pair_node]


def attention_forward(x, e, st: PairStructure, lp: EncoderLayerParams):
    d = x.shape[1]
    w1 = lp.mlp_w1
    u = x @ w1[:d]
    v = e @ w1[d:]
    pre = u[st.pair_node] + v[st.pair_edge] + lp.mlp_b1
    h = relu(pre)
    scores = h @ lp.mlp_w2
    alpha = _segment_softmax(scores, st)
    return alpha, (x, e, pre, h, alpha)


def attention_backward(cache, dalpha, st: PairStructure, lp: EncoderLayerParams):
    x, e, pre, h, alpha = cache
    d = x.shape[1]
    weighted = alpha * dalpha
    dscore = weighted - alpha * np.add.reduceat(weighted, st.node_starts)[st.pair_node]
    dw2 = h.T @ dscore
    dpre = (dscore[:, None] * lp.mlp_w2[None, :]) * (pre > 0)
    db1 = dpre.sum(axis=0)
    du = np.zeros_like(x)
    np.add.at(du, st.pair_node, dpre)
    dv = np.zeros_like(e)
    np.add.at(dv, st.pair_edge, dpre)
    dw1 = np.vstack([x.T @ du, e.T @ dv])
    dx = du @ lp.mlp_w1[:d].T
    de = dv @ lp.mlp_w1[d:].T
    return dx, de, {"mlp_w1": dw1, "mlp_b1": db1, "mlp_w2": dw2}


def attention_weights(state: GraphState, graph: Hypergraph, params: EncoderLayerParams):
    """Attention of every node over its incident hyperedges, as an (N, M)
    matrix that is zero off the incidence pattern."""
    st = graph.structure
    alpha, _ = attention_forward(state.node_states, state.edge_states, st, params)
    out = np.zeros((st.n_nodes, st.n_edges))
    out[st.pair_node, st.pair_edge] = alpha
    return out


def _attention_matrix(alpha, st: PairStructure):
    a = np.zeros((st.n_nodes, st.n_edges))
    a[st.pair_node, st.pair_edge] = alpha / st.incident_count[st.pair_node]
    return a


def node_update_forward(x, e, alpha, st: PairStructure):
    return x + _attention_matrix(alpha, st) @ e


def node_update_backward(dout, e, alpha, st: PairStructure):
    a = _attention_matrix(alpha, st)
    de = a.T @ dout
    dalpha = (dout[st.pair_node] * e[st.pair_edge]).sum(axis=1) / st.incident_count[st.pair_node]
    return dout, de, dalpha


def attention_node_update(state: GraphState, alpha, graph: Hypergraph):
    """``alpha`` is the (N, M) matrix from :func:`attention_weights`."""
    st = graph.structure
    flat = np.asarray(alpha)[st.pair_node, st.pair_edge]
    return node_update_forward(state.node_states, state.edge_states, flat, st)


# -- gated hyperedge aggregation ------------------------------------------------

def aggregate_forward(x, st: PairStructure, d_d, W_r, gamma: float):
    gate = np.exp(-gamma * x)
    msg = (x * gate) / d_d[:, None]
    return relu((st.incidence.T @ msg) @ W_r)


def hyperedge_aggregate(state: GraphState, graph: Hypergraph, params: EncoderLayerParams):
    if params.gamma <= 0:
        raise ValueError("gamma must be positive")
    return aggregate_forward(state.node_states, graph.structure, graph.node_degrees,
                             params.W_r, params.gamma)


# -- full encoder ---------------------------------------------------------------

def encode(graph: Hypergraph, layers: list[EncoderLayerParams], L: int | None = None) -> GraphState:
    if L is None:
        L = len(layers)
    if L < 0 or L > len(layers):
        raise ValueError(f"L must lie in [0, {len(layers)}], got {L}")
    st = graph.structure
    x = graph.nodes.features()
    state = GraphState(x, st.mean_op @ x, 0)
    for l in range(L):
        lp = layers[l]
        x1, _ = message_forward(state.node_states, st, graph.node_degrees, lp.W_N, lp.W_x)
        e, _ = edge_update_forward(x1, st, lp)
        alpha, _ = attention_forward(x1, e, st, lp)
        x2 = node_update_forward(x1, e, alpha, st)
        e2 = aggregate_forward(x2, st, graph.node_degrees, lp.W_r, lp.gamma)
        state = GraphState(x2, e2, l + 1, state.attention + [alpha])
    return state
