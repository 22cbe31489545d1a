# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pair-graph kernel.

Same contract as ``_pairgraph_py``: one joint hypergraph through the encoder
layers, the variational convolution and the readout, plus the exact reverse
pass. Small dense loops; no BLAS, no per-op Python overhead. The gated
hyperedge aggregation is skipped because nothing downstream reads it.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

BACKEND = "cython"

cdef double SLOPE = 0.01
cdef double CLAMP = 10.0


cdef inline void mm_nn(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C, bint acc):
    # C (+)= A @ B
    cdef Py_ssize_t n = A.shape[0], k = A.shape[1], m = B.shape[1], i, j, t
    cdef double a
    if not acc:
        for i in range(n):
            for j in range(m):
                C[i, j] = 0.0
    for i in range(n):
        for t in range(k):
            a = A[i, t]
            if a != 0.0:
                for j in range(m):
                    C[i, j] += a * B[t, j]


cdef inline void mm_tn(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C, bint acc):
    # C (+)= A.T @ B
    cdef Py_ssize_t k = A.shape[0], n = A.shape[1], m = B.shape[1], i, j, t
    cdef double a
    if not acc:
        for i in range(n):
            for j in range(m):
                C[i, j] = 0.0
    for t in range(k):
        for i in range(n):
            a = A[t, i]
            if a != 0.0:
                for j in range(m):
                    C[i, j] += a * B[t, j]


cdef inline void mm_nt(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C, bint acc):
    # C (+)= A @ B.T
    cdef Py_ssize_t n = A.shape[0], k = A.shape[1], m = B.shape[0], i, j, t
    cdef double s
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += A[i, t] * B[j, t]
            if acc:
                C[i, j] += s
            else:
                C[i, j] = s


cdef class _Work:
    """Forward caches for one pair graph."""
    cdef public Py_ssize_t N, M, d, L, P
    # structure
    cdef const double[:, ::1] H
    cdef const int[::1] fam
    cdef const signed char[::1] tmask
    cdef double[:, ::1] adj, K, abar
    cdef int[::1] pn, pe, start, cnt
    cdef double[::1] w, dd, de, r, ntext, nvis
    # per layer
    cdef double[:, :, ::1] X, Q, PRE, X1, MBAR, EPRE, TB, VB, YC, E, U, V, APRE, AH
    cdef double[:, ::1] S, NRM, ALPHA
    # variational / readout
    cdef double[:, ::1] XL, XW, T1, R, HID, MU, RAW, LS, Z
    cdef double[::1] beta, pooled, zr
    cdef double g, score, kl


cdef _Work _forward(double[:, ::1] x0, object st, object kp, object eps_obj):
    cdef _Work wk = _Work()
    cdef const double[:, ::1] H = st.incidence
    cdef const int[::1] fam = st.families
    cdef const signed char[::1] tmask = st.text_mask
    cdef Py_ssize_t N = H.shape[0], M = H.shape[1], d = x0.shape[1]
    cdef double[:, :, ::1] WN = kp.W_N, WX = kp.W_x, A1 = kp.mlp_w1
    cdef double[:, :, :, ::1] WF = kp.W_fam
    cdef double[:, ::1] B1 = kp.mlp_b1, A2 = kp.mlp_w2
    cdef double[:, ::1] W0 = kp.W0, WMU = kp.W_mu, WSG = kp.W_sigma
    cdef double[::1] u = kp.u, wv = kp.w, om = kp.edge_logits
    cdef Py_ssize_t L = WN.shape[0]
    cdef Py_ssize_t i, j, a, b, c, l, p, k, f, s0, s1
    cdef double acc, mx, tot, v, nrm
    cdef double[:, ::1] eps
    cdef bint train = eps_obj is not None
    if train:
        eps = eps_obj

    wk.N, wk.M, wk.d, wk.L = N, M, d, L
    wk.H, wk.fam, wk.tmask = H, fam, tmask

    # ---- structure and normalized adjacency
    wk.w = np.empty(M)
    wk.dd = np.zeros(N)
    wk.de = np.zeros(M)
    wk.ntext = np.zeros(M)
    wk.nvis = np.zeros(M)
    wk.r = np.empty(N)
    for j in range(M):
        wk.w[j] = exp(om[fam[j]])
    for i in range(N):
        for j in range(M):
            if H[i, j] != 0.0:
                wk.dd[i] += wk.w[j]
                wk.de[j] += 1.0
                if tmask[i]:
                    wk.ntext[j] += 1.0
                else:
                    wk.nvis[j] += 1.0
    for i in range(N):
        wk.r[i] = 1.0 / sqrt(wk.dd[i])
    wk.K = np.zeros((N, N))
    wk.abar = np.zeros((N, N))
    wk.adj = np.zeros((N, N))
    for a in range(N):
        for b in range(a, N):
            acc = 0.0
            for j in range(M):
                if H[a, j] != 0.0 and H[b, j] != 0.0:
                    acc += wk.w[j] / sqrt(wk.de[j])
            wk.K[a, b] = acc
            wk.K[b, a] = acc
            wk.abar[a, b] = wk.r[a] * acc * wk.r[b]
            wk.abar[b, a] = wk.abar[a, b]
            if a != b and acc != 0.0:
                wk.adj[a, b] = 1.0
                wk.adj[b, a] = 1.0
    P = 0
    wk.cnt = np.zeros(N, dtype=np.int32)
    wk.start = np.zeros(N, dtype=np.int32)
    for i in range(N):
        for j in range(M):
            if H[i, j] != 0.0:
                wk.cnt[i] += 1
        wk.start[i] = P
        P += wk.cnt[i]
    wk.P = P
    wk.pn = np.empty(P, dtype=np.int32)
    wk.pe = np.empty(P, dtype=np.int32)
    p = 0
    for i in range(N):
        for j in range(M):
            if H[i, j] != 0.0:
                wk.pn[p] = i
                wk.pe[p] = j
                p += 1

    # ---- encoder layers
    wk.X = np.empty((L + 1, N, d))
    wk.Q = np.empty((L, N, d))
    wk.PRE = np.empty((L, N, d))
    wk.X1 = np.empty((L, N, d))
    wk.MBAR = np.empty((L, M, d))
    wk.EPRE = np.zeros((L, M, d))
    wk.TB = np.zeros((L, M, d))
    wk.VB = np.zeros((L, M, d))
    wk.YC = np.zeros((L, M, d))
    wk.S = np.zeros((L, M))
    wk.NRM = np.zeros((L, M))
    wk.E = np.empty((L, M, d))
    wk.U = np.empty((L, N, d))
    wk.V = np.empty((L, M, d))
    wk.APRE = np.empty((L, P, d))
    wk.AH = np.empty((L, P, d))
    wk.ALPHA = np.empty((L, P))
    wk.X[0, :, :] = x0
    cdef double[:, ::1] Y = np.empty((N, d))
    cdef double[::1] sc = np.empty(P)
    for l in range(L):
        # message passing
        for i in range(N):
            for c in range(d):
                Y[i, c] = wk.X[l, i, c] / wk.dd[i]
        mm_nn(wk.adj, Y, wk.Q[l], False)
        mm_nn(wk.Q[l], WN[l], wk.PRE[l], False)
        mm_nn(wk.X[l], WX[l], wk.PRE[l], True)
        for i in range(N):
            for c in range(d):
                v = wk.PRE[l, i, c]
                wk.X1[l, i, c] = v if v > 0.0 else 0.0
        # hyperedge update
        for j in range(M):
            for c in range(d):
                wk.MBAR[l, j, c] = 0.0
        for i in range(N):
            for j in range(M):
                if H[i, j] != 0.0:
                    for c in range(d):
                        wk.MBAR[l, j, c] += wk.X1[l, i, c]
                        if fam[j] == 3:
                            if tmask[i]:
                                wk.TB[l, j, c] += wk.X1[l, i, c]
                            else:
                                wk.VB[l, j, c] += wk.X1[l, i, c]
        for j in range(M):
            for c in range(d):
                wk.MBAR[l, j, c] /= wk.de[j]
            f = fam[j]
            if f < 3:
                for c in range(d):
                    acc = 0.0
                    for k in range(d):
                        acc += wk.MBAR[l, j, k] * WF[l, f, k, c]
                    wk.EPRE[l, j, c] = acc
                    wk.E[l, j, c] = acc if acc > 0.0 else SLOPE * acc
            else:
                acc = 0.0
                for c in range(d):
                    wk.TB[l, j, c] /= wk.ntext[j]
                    wk.VB[l, j, c] /= wk.nvis[j]
                    acc += wk.TB[l, j, c] * wk.VB[l, j, c]
                wk.S[l, j] = acc
                nrm = 0.0
                for c in range(d):
                    wk.YC[l, j, c] = acc * wk.MBAR[l, j, c]
                    nrm += wk.YC[l, j, c] * wk.YC[l, j, c]
                nrm = sqrt(nrm)
                wk.NRM[l, j] = nrm
                for c in range(d):
                    wk.E[l, j, c] = wk.YC[l, j, c] / nrm if nrm > 0.0 else 0.0
        # attention over incident hyperedges
        mm_nn(wk.X1[l], A1[l, :d, :], wk.U[l], False)
        mm_nn(wk.E[l], A1[l, d:, :], wk.V[l], False)
        for p in range(P):
            acc = 0.0
            for c in range(d):
                v = wk.U[l, wk.pn[p], c] + wk.V[l, wk.pe[p], c] + B1[l, c]
                wk.APRE[l, p, c] = v
                v = v if v > 0.0 else 0.0
                wk.AH[l, p, c] = v
                acc += v * A2[l, c]
            sc[p] = acc
        for i in range(N):
            s0 = wk.start[i]
            s1 = s0 + wk.cnt[i]
            mx = sc[s0]
            for p in range(s0 + 1, s1):
                if sc[p] > mx:
                    mx = sc[p]
            tot = 0.0
            for p in range(s0, s1):
                wk.ALPHA[l, p] = exp(sc[p] - mx)
                tot += wk.ALPHA[l, p]
            for p in range(s0, s1):
                wk.ALPHA[l, p] /= tot
        # attention-weighted node update with residual
        wk.X[l + 1, :, :] = wk.X1[l]
        for p in range(P):
            i = wk.pn[p]
            v = wk.ALPHA[l, p] / wk.cnt[i]
            for c in range(d):
                wk.X[l + 1, i, c] += v * wk.E[l, wk.pe[p], c]

    # ---- variational graph convolution
    wk.XL = wk.X[L]
    wk.XW = np.empty((N, d))
    wk.T1 = np.empty((N, d))
    wk.R = np.empty((N, d))
    wk.HID = np.empty((N, d))
    wk.MU = np.empty((N, d))
    wk.RAW = np.empty((N, d))
    wk.LS = np.empty((N, d))
    wk.Z = np.empty((N, d))
    mm_nn(wk.XL, W0, wk.XW, False)
    mm_nn(wk.abar, wk.XW, wk.T1, False)
    for i in range(N):
        for c in range(d):
            v = wk.T1[i, c]
            wk.R[i, c] = v if v > 0.0 else 0.0
    mm_nn(wk.abar, wk.R, wk.HID, False)
    mm_nn(wk.HID, WMU, wk.MU, False)
    mm_nn(wk.HID, WSG, wk.RAW, False)
    acc = 0.0
    for i in range(N):
        for c in range(d):
            v = wk.RAW[i, c]
            if v > CLAMP:
                v = CLAMP
            elif v < -CLAMP:
                v = -CLAMP
            wk.LS[i, c] = v
            wk.Z[i, c] = wk.MU[i, c] + (eps[i, c] * exp(v) if train else 0.0)
            acc += 1.0 + 2.0 * v - wk.MU[i, c] * wk.MU[i, c] - exp(2.0 * v)
    wk.kl = -0.5 * acc

    # ---- readout
    wk.beta = np.empty(N)
    wk.pooled = np.zeros(d)
    wk.zr = np.empty(d)
    mx = -1e300
    for i in range(N):
        acc = 0.0
        for c in range(d):
            acc += wk.Z[i, c] * u[c]
        wk.beta[i] = acc
        if acc > mx:
            mx = acc
    tot = 0.0
    for i in range(N):
        wk.beta[i] = exp(wk.beta[i] - mx)
        tot += wk.beta[i]
    for i in range(N):
        wk.beta[i] /= tot
        for c in range(d):
            wk.pooled[c] += wk.beta[i] * wk.Z[i, c]
    acc = 0.0
    for c in range(d):
        v = wk.pooled[c]
        if v >= 0:
            wk.zr[c] = 1.0 / (1.0 + exp(-v))
        else:
            wk.zr[c] = exp(v) / (1.0 + exp(v))
        acc += wk.zr[c] * wv[c]
    wk.g = acc
    wk.score = acc if acc > 0.0 else SLOPE * acc
    return wk


def pair_forward(double[:, ::1] x0, st, kp, eps=None):
    cdef _Work wk = _forward(x0, st, kp, eps)
    return wk.score, wk.kl


def pair_grad(double[:, ::1] x0, st, kp, eps, double dscore, double dkl, gk, double[:, ::1] dx0):
    cdef _Work wk = _forward(x0, st, kp, eps)
    cdef Py_ssize_t N = wk.N, M = wk.M, d = wk.d, L = wk.L, P = wk.P
    cdef Py_ssize_t i, j, a, b, c, k, l, p, f, s0, s1
    cdef double v, acc, dg, tmp, dot, dsj
    cdef bint train = eps is not None
    cdef double[:, ::1] E_ps
    if train:
        E_ps = eps
    cdef double[:, :, ::1] WN = kp.W_N, WX = kp.W_x, A1 = kp.mlp_w1
    cdef double[:, :, :, ::1] WF = kp.W_fam
    cdef double[:, ::1] A2 = kp.mlp_w2
    cdef double[:, ::1] W0 = kp.W0, WMU = kp.W_mu, WSG = kp.W_sigma
    cdef double[::1] u = kp.u, wv = kp.w
    cdef double[:, :, ::1] gWN = gk.W_N, gWX = gk.W_x, gA1 = gk.mlp_w1
    cdef double[:, :, :, ::1] gWF = gk.W_fam
    cdef double[:, ::1] gB1 = gk.mlp_b1, gA2 = gk.mlp_w2
    cdef double[:, ::1] gW0 = gk.W0, gWMU = gk.W_mu, gWSG = gk.W_sigma
    cdef double[::1] gu = gk.u, gw = gk.w, gom = gk.edge_logits
    cdef const double[:, ::1] H = wk.H

    # ---- readout
    dg = dscore * (1.0 if wk.g > 0.0 else SLOPE)
    cdef double[::1] dpooled = np.empty(d)
    for c in range(d):
        gw[c] += dg * wk.zr[c]
        dpooled[c] = dg * wv[c] * wk.zr[c] * (1.0 - wk.zr[c])
    cdef double[:, ::1] dZ = np.empty((N, d))
    cdef double[::1] dbeta = np.empty(N)
    dot = 0.0
    for i in range(N):
        acc = 0.0
        for c in range(d):
            dZ[i, c] = wk.beta[i] * dpooled[c]
            acc += wk.Z[i, c] * dpooled[c]
        dbeta[i] = acc
        dot += wk.beta[i] * acc
    for i in range(N):
        v = wk.beta[i] * (dbeta[i] - dot)  # d score / d attention logit
        for c in range(d):
            gu[c] += v * wk.Z[i, c]
            dZ[i, c] += v * u[c]

    # ---- latent sample, KL, clamp
    cdef double[:, ::1] dMU = np.empty((N, d))
    cdef double[:, ::1] dRAW = np.empty((N, d))
    for i in range(N):
        for c in range(d):
            dMU[i, c] = dZ[i, c] + dkl * wk.MU[i, c]
            v = dkl * (exp(2.0 * wk.LS[i, c]) - 1.0)
            if train:
                v += dZ[i, c] * E_ps[i, c] * exp(wk.LS[i, c])
            dRAW[i, c] = v if (wk.RAW[i, c] < CLAMP and wk.RAW[i, c] > -CLAMP) else 0.0
    mm_tn(wk.HID, dMU, gWMU, True)
    mm_tn(wk.HID, dRAW, gWSG, True)
    cdef double[:, ::1] dHID = np.empty((N, d))
    mm_nt(dMU, WMU, dHID, False)
    mm_nt(dRAW, WSG, dHID, True)
    cdef double[:, ::1] dA = np.empty((N, N))
    mm_nt(dHID, wk.R, dA, False)
    cdef double[:, ::1] dT1 = np.empty((N, d))
    mm_tn(wk.abar, dHID, dT1, False)
    for i in range(N):
        for c in range(d):
            if wk.T1[i, c] <= 0.0:
                dT1[i, c] = 0.0
    mm_nt(dT1, wk.XW, dA, True)
    cdef double[:, ::1] dXW = np.empty((N, d))
    mm_tn(wk.abar, dT1, dXW, False)
    mm_tn(wk.XL, dXW, gW0, True)
    cdef double[:, ::1] dX = np.empty((N, d))
    mm_nt(dXW, W0, dX, False)

    # ---- adjacency -> degrees and edge weights
    cdef double[::1] dr = np.zeros(N)
    cdef double[::1] ddd = np.zeros(N)
    cdef double[::1] dw = np.zeros(M)
    cdef double[:, ::1] dK = np.empty((N, N))
    for a in range(N):
        for b in range(N):
            v = dA[a, b] + dA[b, a]
            dr[a] += v * wk.K[a, b] * wk.r[b]
            dK[a, b] = dA[a, b] * wk.r[a] * wk.r[b]
    for j in range(M):
        acc = 0.0
        for a in range(N):
            if H[a, j] != 0.0:
                for b in range(N):
                    if H[b, j] != 0.0:
                        acc += dK[a, b]
        dw[j] = acc / sqrt(wk.de[j])
    for i in range(N):
        ddd[i] = dr[i] * (-0.5) * wk.r[i] / wk.dd[i]

    # ---- encoder layers, reversed
    cdef double[:, ::1] dX1 = np.empty((N, d))
    cdef double[:, ::1] dE = np.empty((M, d))
    cdef double[::1] dalpha = np.empty(P)
    cdef double[::1] dsc = np.empty(P)
    cdef double[:, ::1] dU = np.empty((N, d))
    cdef double[:, ::1] dV = np.empty((M, d))
    cdef double[:, ::1] dMB = np.empty((M, d))
    cdef double[:, ::1] dPRE = np.empty((N, d))
    cdef double[:, ::1] dQ = np.empty((N, d))
    cdef double[:, ::1] dY = np.empty((N, d))
    cdef double[:, ::1] Xl
    cdef double[::1] dpre_vec = np.empty(d)
    cdef double[::1] dyc = np.empty(d)
    for l in range(L - 1, -1, -1):
        # node update: X = X1 + sum_p alpha/cnt * E
        dX1[:, :] = dX
        dE[:, :] = 0.0
        for p in range(P):
            i = wk.pn[p]
            j = wk.pe[p]
            v = wk.ALPHA[l, p] / wk.cnt[i]
            acc = 0.0
            for c in range(d):
                dE[j, c] += v * dX[i, c]
                acc += dX[i, c] * wk.E[l, j, c]
            dalpha[p] = acc / wk.cnt[i]
        # segment softmax
        for i in range(N):
            s0 = wk.start[i]
            s1 = s0 + wk.cnt[i]
            dot = 0.0
            for p in range(s0, s1):
                dot += wk.ALPHA[l, p] * dalpha[p]
            for p in range(s0, s1):
                dsc[p] = wk.ALPHA[l, p] * (dalpha[p] - dot)
        # scoring MLP
        dU[:, :] = 0.0
        dV[:, :] = 0.0
        for p in range(P):
            i = wk.pn[p]
            j = wk.pe[p]
            for c in range(d):
                gA2[l, c] += dsc[p] * wk.AH[l, p, c]
                v = dsc[p] * A2[l, c] if wk.APRE[l, p, c] > 0.0 else 0.0
                gB1[l, c] += v
                dU[i, c] += v
                dV[j, c] += v
        mm_tn(wk.X1[l], dU, gA1[l, :d, :], True)
        mm_tn(wk.E[l], dV, gA1[l, d:, :], True)
        mm_nt(dU, A1[l, :d, :], dX1, True)
        mm_nt(dV, A1[l, d:, :], dE, True)
        # hyperedge update
        for j in range(M):
            f = wk.fam[j]
            if f < 3:
                for c in range(d):
                    v = wk.EPRE[l, j, c]
                    dpre_vec[c] = dE[j, c] * (1.0 if v > 0.0 else SLOPE)
                for k in range(d):
                    acc = 0.0
                    for c in range(d):
                        gWF[l, f, k, c] += wk.MBAR[l, j, k] * dpre_vec[c]
                        acc += WF[l, f, k, c] * dpre_vec[c]
                    dMB[j, k] = acc
            else:
                if wk.NRM[l, j] > 0.0:
                    dot = 0.0
                    for c in range(d):
                        dot += wk.YC[l, j, c] * dE[j, c]
                    tmp = wk.NRM[l, j]
                    dsj = 0.0
                    for c in range(d):
                        dyc[c] = (dE[j, c] - wk.YC[l, j, c] * dot / (tmp * tmp)) / tmp
                        dsj += dyc[c] * wk.MBAR[l, j, c]
                        dMB[j, c] = wk.S[l, j] * dyc[c]
                else:
                    dsj = 0.0
                    for c in range(d):
                        dMB[j, c] = 0.0
                # s = mean(text members) . mean(visual members)
                for i in range(N):
                    if H[i, j] != 0.0:
                        if wk.tmask[i]:
                            for c in range(d):
                                dX1[i, c] += dsj * wk.VB[l, j, c] / wk.ntext[j]
                        else:
                            for c in range(d):
                                dX1[i, c] += dsj * wk.TB[l, j, c] / wk.nvis[j]
        for i in range(N):
            for j in range(M):
                if H[i, j] != 0.0:
                    for c in range(d):
                        dX1[i, c] += dMB[j, c] / wk.de[j]
        # message passing: X1 = relu(adj (X / dd) W_N + X W_x)
        Xl = wk.X[l]
        for i in range(N):
            for c in range(d):
                dPRE[i, c] = dX1[i, c] if wk.PRE[l, i, c] > 0.0 else 0.0
        mm_tn(wk.Q[l], dPRE, gWN[l], True)
        mm_tn(Xl, dPRE, gWX[l], True)
        mm_nt(dPRE, WN[l], dQ, False)
        mm_tn(wk.adj, dQ, dY, False)
        mm_nt(dPRE, WX[l], dX, False)
        for i in range(N):
            acc = 0.0
            for c in range(d):
                dX[i, c] += dY[i, c] / wk.dd[i]
                acc += dY[i, c] * Xl[i, c]
            ddd[i] -= acc / (wk.dd[i] * wk.dd[i])

    for j in range(M):
        acc = 0.0
        for i in range(N):
            if H[i, j] != 0.0:
                acc += ddd[i]
        dw[j] += acc
        gom[wk.fam[j]] += dw[j] * wk.w[j]
    dx0[:, :] = dX
    return wk.score, wk.kl
