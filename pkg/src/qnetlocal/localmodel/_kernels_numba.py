"""Serial numba kernels for the response-block forward/backward passes.

All kernels loop over samples one at a time, so reductions have a fixed
order and results are bit-reproducible for a given dtype.  Scratch
buffers are allocated once per call, never per sample.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["mlp_probs", "mlp_backward", "joint_accumulate", "joint_backward"]


@njit(cache=True, fastmath=True)
def mlp_probs(x, w_in, b_in, w_mid, b_mid, w_out, b_out, out):
    n_samples, d_in = x.shape
    width = w_in.shape[0]
    depth_m1 = w_mid.shape[0]
    n_out = w_out.shape[0]
    h = np.empty(width, dtype=x.dtype)
    h2 = np.empty(width, dtype=x.dtype)
    z = np.empty(n_out, dtype=x.dtype)
    for k in range(n_samples):
        for j in range(width):
            s = b_in[j]
            for i in range(d_in):
                s += w_in[j, i] * x[k, i]
            h[j] = s if s > 0 else 0
        for l in range(depth_m1):
            for j in range(width):
                s = b_mid[l, j]
                for i in range(width):
                    s += w_mid[l, j, i] * h[i]
                h2[j] = s if s > 0 else 0
            h, h2 = h2, h
        zmax = -np.inf
        for a in range(n_out):
            s = b_out[a]
            for i in range(width):
                s += w_out[a, i] * h[i]
            z[a] = s
            if s > zmax:
                zmax = s
        tot = 0.0
        for a in range(n_out):
            e = np.exp(z[a] - zmax)
            z[a] = e
            tot += e
        inv = 1.0 / tot
        for a in range(n_out):
            out[k, a] = z[a] * inv


@njit(cache=True, fastmath=True)
def mlp_backward(x, w_in, b_in, w_mid, b_mid, w_out, b_out, dp,
                 gw_in, gb_in, gw_mid, gb_mid, gw_out, gb_out):
    n_samples, d_in = x.shape
    width = w_in.shape[0]
    depth_m1 = w_mid.shape[0]
    n_out = w_out.shape[0]
    acts = np.empty((depth_m1 + 1, width), dtype=x.dtype)
    z = np.empty(n_out, dtype=x.dtype)
    p = np.empty(n_out, dtype=x.dtype)
    dz = np.empty(n_out, dtype=x.dtype)
    dh = np.empty(width, dtype=x.dtype)
    dpre = np.empty(width, dtype=x.dtype)
    for k in range(n_samples):
        # Forward again, keeping every hidden activation.
        for j in range(width):
            s = b_in[j]
            for i in range(d_in):
                s += w_in[j, i] * x[k, i]
            acts[0, j] = s if s > 0 else 0
        for l in range(depth_m1):
            for j in range(width):
                s = b_mid[l, j]
                for i in range(width):
                    s += w_mid[l, j, i] * acts[l, i]
                acts[l + 1, j] = s if s > 0 else 0
        zmax = -np.inf
        for a in range(n_out):
            s = b_out[a]
            for i in range(width):
                s += w_out[a, i] * acts[depth_m1, i]
            z[a] = s
            if s > zmax:
                zmax = s
        tot = 0.0
        for a in range(n_out):
            e = np.exp(z[a] - zmax)
            p[a] = e
            tot += e
        inv = 1.0 / tot
        for a in range(n_out):
            p[a] *= inv

        # Softmax Jacobian: dz_a = p_a (dp_a - sum_b dp_b p_b).
        srow = 0.0
        for a in range(n_out):
            srow += dp[k, a] * p[a]
        for a in range(n_out):
            dz[a] = p[a] * (dp[k, a] - srow)

        for a in range(n_out):
            gb_out[a] += dz[a]
            t = dz[a]
            for i in range(width):
                gw_out[a, i] += t * acts[depth_m1, i]
        for i in range(width):
            dh[i] = 0
        for a in range(n_out):
            t = dz[a]
            for i in range(width):
                dh[i] += w_out[a, i] * t

        for l in range(depth_m1 - 1, -1, -1):
            for j in range(width):
                dpre[j] = dh[j] if acts[l + 1, j] > 0 else 0
            for j in range(width):
                gb_mid[l, j] += dpre[j]
                t = dpre[j]
                for i in range(width):
                    gw_mid[l, j, i] += t * acts[l, i]
            for i in range(width):
                dh[i] = 0
            for j in range(width):
                t = dpre[j]
                for i in range(width):
                    dh[i] += w_mid[l, j, i] * t

        for j in range(width):
            dpre[j] = dh[j] if acts[0, j] > 0 else 0
        for j in range(width):
            gb_in[j] += dpre[j]
            t = dpre[j]
            for i in range(d_in):
                gw_in[j, i] += t * x[k, i]


@njit(cache=True, fastmath=True)
def joint_accumulate(p_cat, offsets, acc):
    """acc[flat outcome] += per-sample products of party probabilities."""
    n_samples = p_cat.shape[0]
    n_parties = offsets.shape[0] - 1
    total = acc.shape[0]
    buf1 = np.empty(total, dtype=p_cat.dtype)
    buf2 = np.empty(total, dtype=p_cat.dtype)
    for k in range(n_samples):
        buf1[0] = 1
        cur = 1
        for i in range(n_parties):
            start = offsets[i]
            oi = offsets[i + 1] - start
            idx = 0
            for u in range(cur):
                f = buf1[u]
                for a in range(oi):
                    buf2[idx] = f * p_cat[k, start + a]
                    idx += 1
            buf1, buf2 = buf2, buf1
            cur *= oi
        for j in range(cur):
            acc[j] += buf1[j]


@njit(cache=True, fastmath=True)
def joint_backward(p_cat, offsets, prefix_offsets, grad_flat, dp_cat):
    """Per-party probability gradients of sum_k <grad_flat, joint products>.

    ``grad_flat`` is the float64 gradient of the loss with respect to the
    accumulated (unnormalized) joint-outcome vector; ``prefix_offsets[i]``
    locates the level-i prefix tensor (size prod of the first i outcome
    counts) in the flat scratch array.
    """
    n_samples = p_cat.shape[0]
    n_parties = offsets.shape[0] - 1
    total = grad_flat.shape[0]
    prefixes = np.empty(prefix_offsets[n_parties], dtype=p_cat.dtype)
    c1 = np.empty(total, dtype=np.float64)
    c2 = np.empty(total, dtype=np.float64)
    for k in range(n_samples):
        prefixes[0] = 1
        cur = 1
        for i in range(n_parties - 1):
            start = offsets[i]
            oi = offsets[i + 1] - start
            src = prefix_offsets[i]
            dst = prefix_offsets[i + 1]
            idx = 0
            for u in range(cur):
                f = prefixes[src + u]
                for a in range(oi):
                    prefixes[dst + idx] = f * p_cat[k, start + a]
                    idx += 1
            cur *= oi

        for j in range(total):
            c1[j] = grad_flat[j]
        size = total
        for i in range(n_parties - 1, -1, -1):
            start = offsets[i]
            oi = offsets[i + 1] - start
            pre = size // oi
            base = prefix_offsets[i]
            for a in range(oi):
                dp_cat[k, start + a] = 0
            for u in range(pre):
                f = prefixes[base + u]
                row = u * oi
                for a in range(oi):
                    dp_cat[k, start + a] += f * c1[row + a]
            if i > 0:
                for u in range(pre):
                    s = 0.0
                    row = u * oi
                    for a in range(oi):
                        s += c1[row + a] * p_cat[k, start + a]
                    c2[u] = s
                c1, c2 = c2, c1
                size = pre
