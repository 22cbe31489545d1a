"""Pure-numpy pair-graph kernel.

Runs encoder -> variational -> readout on one joint text/video hypergraph
and, for :func:`pair_grad`, the exact reverse pass. Built from the op-level
forward/backward functions so every piece stays individually testable.
The compiled ``_pairgraph`` extension implements the same two entry points.
"""
from __future__ import annotations

import numpy as np

from . import encoder as enc
from .hypergraph import N_FAMILIES, PairStructure
from .params import EncoderLayerParams, ReadoutParams, VariationalParams
from .scoring import readout_backward, readout_forward
from .variational import gcn_backward, gcn_forward, kl_backward, kl_loss

BACKEND = "python"


def _layers(kp):
    out = []
    for l in range(kp.W_N.shape[0]):
        out.append(EncoderLayerParams(
            W_N=kp.W_N[l], W_x=kp.W_x[l], W_g=kp.W_fam[l, 0], W_t=kp.W_fam[l, 1],
            W_v=kp.W_fam[l, 2], mlp_w1=kp.mlp_w1[l], mlp_b1=kp.mlp_b1[l],
            mlp_w2=kp.mlp_w2[l], W_r=None))
    return out


def _adjacency(st: PairStructure, omega):
    h = st.incidence
    w = np.exp(omega)[st.families]
    d_d = h @ w
    d_e = h.sum(axis=0)
    r = d_d ** -0.5
    k = (h * (w / np.sqrt(d_e))) @ h.T
    a = r[:, None] * k * r[None, :]
    return w, d_d, d_e, r, k, 0.5 * (a + a.T)


def _forward(x0, st, kp, eps):
    w, d_d, d_e, r, k, a_bar = _adjacency(st, kp.edge_logits)
    layers = _layers(kp)
    x = x0
    caches = []
    for lp in layers:
        x1, c_msg = enc.message_forward(x, st, d_d, lp.W_N, lp.W_x)
        e, c_edge = enc.edge_update_forward(x1, st, lp)
        alpha, c_att = enc.attention_forward(x1, e, st, lp)
        x = enc.node_update_forward(x1, e, alpha, st)
        caches.append((c_msg, c_edge, c_att, e, alpha))
    vp = VariationalParams(kp.W0, kp.W_mu, kp.W_sigma)
    mu, ls, c_gcn = gcn_forward(x, a_bar, vp)
    z = mu if eps is None else mu + eps * np.exp(ls)
    rp = ReadoutParams(kp.u, kp.w)
    score, _, c_read = readout_forward(z, rp)
    kl = kl_loss(mu, ls)
    return score, kl, (w, d_d, d_e, r, k, layers, caches, vp, mu, ls, c_gcn, rp, c_read)


def pair_forward(x0, st: PairStructure, kp, eps=None):
    score, kl, _ = _forward(x0, st, kp, eps)
    return score, kl


def pair_grad(x0, st: PairStructure, kp, eps, dscore, dkl, gk, dx0):
    """Accumulate d(dscore*score + dkl*kl) into ``gk``; write node-input
    gradient into ``dx0``. Returns ``(score, kl)``."""
    score, kl, (w, d_d, d_e, r, k, layers, caches, vp, mu, ls, c_gcn, rp, c_read) = \
        _forward(x0, st, kp, eps)
    dz, g_read = readout_backward(c_read, dscore, rp)
    gk.u[...] += g_read["u"]
    gk.w[...] += g_read["w"]
    dmu, dls = kl_backward(mu, ls, dkl)
    dmu = dmu + dz
    if eps is not None:
        dls = dls + dz * eps * np.exp(ls)
    dx, da, g_gcn = gcn_backward(c_gcn, dmu, dls, vp)
    gk.W0[...] += g_gcn["W0"]
    gk.W_mu[...] += g_gcn["W_mu"]
    gk.W_sigma[...] += g_gcn["W_sigma"]

    # normalized adjacency -> node degrees and edge weights
    h = st.incidence
    da = 0.5 * (da + da.T)
    dk = da * np.outer(r, r)
    dak = da * k
    dr = dak @ r + dak.T @ r
    dw = ((h.T @ dk) * h.T).sum(axis=1) / np.sqrt(d_e)
    dd_d = dr * (-0.5) * d_d ** -1.5

    for l in range(len(layers) - 1, -1, -1):
        lp = layers[l]
        c_msg, c_edge, c_att, e, alpha = caches[l]
        dx1, de, dalpha = enc.node_update_backward(dx, e, alpha, st)
        dx_att, de_att, g_att = enc.attention_backward(c_att, dalpha, st, lp)
        dx1 = dx1 + dx_att
        de = de + de_att
        dx_edge, g_edge = enc.edge_update_backward(c_edge, de, st, lp)
        dx1 = dx1 + dx_edge
        dx, ddd_l, dW_N, dW_x = enc.message_backward(c_msg, dx1, st, lp.W_N, lp.W_x)
        dd_d = dd_d + ddd_l
        gk.W_N[l] += dW_N
        gk.W_x[l] += dW_x
        gk.W_fam[l, 0] += g_edge["W_g"]
        gk.W_fam[l, 1] += g_edge["W_t"]
        gk.W_fam[l, 2] += g_edge["W_v"]
        gk.mlp_w1[l] += g_att["mlp_w1"]
        gk.mlp_b1[l] += g_att["mlp_b1"]
        gk.mlp_w2[l] += g_att["mlp_w2"]

    dw = dw + h.T @ dd_d
    gk.edge_logits[...] += np.bincount(st.families, weights=dw * w, minlength=N_FAMILIES)
    dx0[...] = dx
    return score, kl
