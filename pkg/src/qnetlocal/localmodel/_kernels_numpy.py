"""Pure-numpy kernels mirroring the numba backend.

Batched BLAS operations over sample chunks; the chunk size caps scratch
memory so million-sample evaluation passes stay small.
"""

from __future__ import annotations

import numpy as np

__all__ = ["mlp_probs", "mlp_backward", "joint_accumulate", "joint_backward"]

#: Rough number of scratch floats allowed per chunk.
_CHUNK_BUDGET = 4_000_000


def _chunk_size(per_sample: int) -> int:
    return max(256, min(65536, _CHUNK_BUDGET // max(1, per_sample)))


def _forward_chunk(x, w_in, b_in, w_mid, b_mid, w_out, b_out):
    """Hidden activations (one per layer) and softmax output for a chunk."""
    acts = [np.maximum(x @ w_in.T + b_in, 0)]
    for l in range(w_mid.shape[0]):
        acts.append(np.maximum(acts[-1] @ w_mid[l].T + b_mid[l], 0))
    z = acts[-1] @ w_out.T + b_out
    z -= z.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return acts, z


def mlp_probs(x, w_in, b_in, w_mid, b_mid, w_out, b_out, out):
    n = x.shape[0]
    step = _chunk_size(w_in.shape[0] * (w_mid.shape[0] + 2))
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        _, p = _forward_chunk(x[lo:hi], w_in, b_in, w_mid, b_mid, w_out, b_out)
        out[lo:hi] = p


def mlp_backward(x, w_in, b_in, w_mid, b_mid, w_out, b_out, dp,
                 gw_in, gb_in, gw_mid, gb_mid, gw_out, gb_out):
    n = x.shape[0]
    depth_m1 = w_mid.shape[0]
    step = _chunk_size(w_in.shape[0] * (depth_m1 + 2))
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        xc = x[lo:hi]
        acts, p = _forward_chunk(xc, w_in, b_in, w_mid, b_mid, w_out, b_out)
        dpc = dp[lo:hi]
        dz = p * (dpc - np.sum(dpc * p, axis=1, keepdims=True))
        gw_out += dz.T @ acts[-1]
        gb_out += dz.sum(axis=0)
        dh = dz @ w_out
        for l in range(depth_m1 - 1, -1, -1):
            dpre = np.where(acts[l + 1] > 0, dh, 0)
            gw_mid[l] += dpre.T @ acts[l]
            gb_mid[l] += dpre.sum(axis=0)
            dh = dpre @ w_mid[l]
        dpre = np.where(acts[0] > 0, dh, 0)
        gw_in += dpre.T @ xc
        gb_in += dpre.sum(axis=0)


def _party_blocks(p_cat, offsets):
    return [p_cat[:, offsets[i] : offsets[i + 1]] for i in range(len(offsets) - 1)]


def joint_accumulate(p_cat, offsets, acc):
    n = p_cat.shape[0]
    total = acc.shape[0]
    step = _chunk_size(total)
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        prod = np.ones((hi - lo, 1), dtype=p_cat.dtype)
        for block in _party_blocks(p_cat[lo:hi], offsets):
            prod = (prod[:, :, None] * block[:, None, :]).reshape(hi - lo, -1)
        acc += prod.sum(axis=0, dtype=np.float64)


def joint_backward(p_cat, offsets, prefix_offsets, grad_flat, dp_cat):
    n = p_cat.shape[0]
    total = grad_flat.shape[0]
    n_parties = len(offsets) - 1
    step = _chunk_size(total * 2)
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        nk = hi - lo
        blocks = _party_blocks(p_cat[lo:hi], offsets)
        prefixes = [np.ones((nk, 1), dtype=p_cat.dtype)]
        for block in blocks[:-1]:
            prefixes.append(
                (prefixes[-1][:, :, None] * block[:, None, :]).reshape(nk, -1)
            )
        c = np.broadcast_to(grad_flat, (nk, total))
        for i in range(n_parties - 1, -1, -1):
            oi = offsets[i + 1] - offsets[i]
            pre = c.shape[1] // oi
            c3 = c.reshape(nk, pre, oi)
            dp_cat[lo:hi, offsets[i] : offsets[i + 1]] = np.einsum(
                "ku,kua->ka", prefixes[i], c3
            )
            if i > 0:
                c = np.einsum("kua,ka->ku", c3, blocks[i])
