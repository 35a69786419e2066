"""Pure-numpy trajectory kernels.

Same contract as the compiled ``_kernels`` extension; used when the extension
is not built or when ``SEQMAG_PURE_PYTHON`` is set.  Both kernels advance
``S`` states (the record-generating state first, then optional siblings at
shifted phase) through a block of measurements driven by pre-drawn uniforms.

Accumulator layout (``acc``, length 4):

0. log-probability of the realized record under the first state
1. sum of log(q_sibling1 / q_first) over realized outcomes
2. sum of log(q_sibling2 / q_first)
3. sum over steps of  sum_x (q_x^(1) - q_x^(2))**2 / q_x^(0)

Return value is -1 on success, otherwise the index of the step at which a
realized outcome had probability below ``UNDERFLOW`` for some tracked state.
"""

import numpy as np

UNDERFLOW = 1e-300


def _accumulate(acc, qx, qp, qm):
    acc[0] += np.log(qx[0])
    if qx.shape[0] == 3:
        acc[1] += np.log1p((qx[1] - qx[0]) / qx[0])
        acc[2] += np.log1p((qx[2] - qx[0]) / qx[0])
        fi = 0.0
        if qp[0] > 0.0:
            fi += (qp[1] - qp[2]) ** 2 / qp[0]
        if qm[0] > 0.0:
            fi += (qm[1] - qm[2]) ** 2 / qm[0]
        acc[3] += fi


def pure_segment(VT, g_plus, g_minus, psi, uniforms, outcomes, probs, acc):
    """Advance pure states held in a basis where the Kraus pair is diagonal.

    ``VT`` holds the transposed real free-evolution matrices, shape (S, D, D).
    ``g_plus``/``g_minus`` are the real diagonal Kraus factors.  ``psi`` is a
    complex (S, D) array updated in place.
    """
    V = np.ascontiguousarray(np.transpose(VT, (0, 2, 1)))
    w_plus = g_plus * g_plus
    w_minus = g_minus * g_minus
    state = np.array(psi)
    for t in range(uniforms.shape[0]):
        y = np.matmul(V, state[:, :, None])[:, :, 0]
        a2 = y.real**2 + y.imag**2
        qp = a2 @ w_plus
        qm = a2 @ w_minus
        p = min(max(qp[0], 0.0), 1.0)
        probs[t] = p
        if uniforms[t] < p:
            outcomes[t] = 0
            qx, g = qp, g_plus
        else:
            outcomes[t] = 1
            qx, g = qm, g_minus
        if np.any(qx < UNDERFLOW):
            psi[...] = state
            return t
        state = y * g[None, :] / np.sqrt(qx)[:, None]
        _accumulate(acc, qx, qp, qm)
    psi[...] = state
    return -1


def density_segment(F, G_plus, G_minus, rho, uniforms, outcomes, probs, acc):
    """Advance density matrices held in the ``Jz`` basis.

    ``F`` (S, D, D) is the elementwise free-evolution-plus-dephasing factor;
    ``G_plus``/``G_minus`` are the real Kraus matrices (global phase dropped).
    """
    P_plus = G_plus.T @ G_plus
    P_minus = G_minus.T @ G_minus
    state = np.array(rho)
    for t in range(uniforms.shape[0]):
        state = state * F
        re = state.real
        qp = np.einsum("kj,sjk->s", P_plus, re)
        qm = np.einsum("kj,sjk->s", P_minus, re)
        p = min(max(qp[0], 0.0), 1.0)
        probs[t] = p
        if uniforms[t] < p:
            outcomes[t] = 0
            qx, G = qp, G_plus
        else:
            outcomes[t] = 1
            qx, G = qm, G_minus
        if np.any(qx < UNDERFLOW):
            rho[...] = state
            return t
        state = G @ state @ G.T
        state = 0.5 * (state + np.conj(np.transpose(state, (0, 2, 1))))
        state /= qx[:, None, None]
        _accumulate(acc, qx, qp, qm)
    rho[...] = state
    return -1


def block_segment(D_data, D_indices, D_indptr, F, G_plus, G_minus, sizes, offsets,
                  rho, uniforms, outcomes, probs, acc):
    """Advance permutation-invariant states stored as packed spin-j blocks.

    ``D_*`` is the CSR form of the per-step dephasing map on packed entries
    (empty to skip it), ``F`` (S, L) the free-evolution phases and
    ``G_plus``/``G_minus`` the real Kraus blocks packed the same way.
    """
    from scipy.sparse import csr_matrix

    L = F.shape[1]
    D = csr_matrix((D_data, D_indices, D_indptr), shape=(L, L)) if D_data.shape[0] else None
    blocks = [(int(o), int(d)) for o, d in zip(offsets, sizes)]
    Gp = [G_plus[o:o + d * d].reshape(d, d) for o, d in blocks]
    Gm = [G_minus[o:o + d * d].reshape(d, d) for o, d in blocks]
    Pp = np.concatenate([(g.T @ g).ravel() for g in Gp])
    Pm = np.concatenate([(g.T @ g).ravel() for g in Gm])
    state = np.array(rho)
    for t in range(uniforms.shape[0]):
        if D is not None:
            state = (D @ state.T).T
        state = state * F
        re = state.real
        qp = re @ Pp
        qm = re @ Pm
        p = min(max(qp[0], 0.0), 1.0)
        probs[t] = p
        if uniforms[t] < p:
            outcomes[t] = 0
            qx, G = qp, Gp
        else:
            outcomes[t] = 1
            qx, G = qm, Gm
        if np.any(qx < UNDERFLOW):
            rho[...] = state
            return t
        new = np.empty_like(state)
        for (o, d), g in zip(blocks, G):
            blk = state[:, o:o + d * d].reshape(-1, d, d)
            blk = g @ blk @ g.T
            blk = 0.5 * (blk + np.conj(np.transpose(blk, (0, 2, 1))))
            new[:, o:o + d * d] = (blk / qx[:, None, None]).reshape(-1, d * d)
        state = new
        _accumulate(acc, qx, qp, qm)
    rho[...] = state
    return -1
