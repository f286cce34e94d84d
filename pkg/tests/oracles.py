"""Independent reference implementations used to cross-check the package.

Everything in here deliberately avoids the package's own contraction
paths: the Born-rule oracle builds the full tensor-product operator with
``np.kron`` and reorders subsystems with an explicit permutation matrix,
so it shares no code with the einsum/transpose route in
``qnetlocal.quantum``.
"""

from __future__ import annotations

import itertools

import numpy as np


def permutation_matrix(order, dims) -> np.ndarray:
    """Unitary taking particle-ordered basis kets to slot-ordered ones.

    ``order[l] = p`` means slot ``l`` holds particle ``p`` (matching
    ``HilbertWiring``): ``P |i_0, ..., i_{T-1}>_particles =
    |i_{order[0]}, ..., i_{order[T-1]}>_slots``.  ``dims`` are the
    particle dimensions in particle order.
    """
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    slot_dims = [dims[p] for p in order]
    mat = np.zeros((total, total))
    for idx in itertools.product(*[range(d) for d in dims]):
        col = 0
        for i, d in zip(idx, dims):
            col = col * d + i
        row = 0
        for l, d in zip(order, slot_dims):
            row = row * d + idx[l]
        mat[row, col] = 1.0
    return mat


def born_probabilities_bruteforce(net, states, povms, order) -> np.ndarray:
    """Flat outcome probabilities via full kron products and Tr[rho M].

    ``net`` is a NetworkConfig, ``states`` per-source StateVector or
    DensityMatrix objects, ``povms`` per-party Povm objects, ``order`` the
    wiring permutation as a plain sequence.
    """
    rho = np.array([[1.0]], dtype=np.complex128)
    particle_dims: list[int] = []
    for s in states:
        mat = s.matrix if hasattr(s, "matrix") else np.outer(s.amplitudes, s.amplitudes.conj())
        rho = np.kron(rho, mat)
        particle_dims.extend(s.dims)
    perm = permutation_matrix(order, particle_dims)
    rho_slots = perm @ rho @ perm.T

    out_shape = [p.n_outcomes for p in net.parties]
    probs = np.zeros(int(np.prod(out_shape)))
    for flat, outcome in enumerate(itertools.product(*[range(n) for n in out_shape])):
        op = np.array([[1.0]], dtype=np.complex128)
        for a, povm in zip(outcome, povms):
            op = np.kron(op, povm.effects[a])
        probs[flat] = np.trace(rho_slots @ op).real
    return probs


def central_difference_gradient(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f`` at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xflat = x.reshape(-1)
    for i in range(xflat.size):
        orig = xflat[i]
        xflat[i] = orig + eps
        hi = f(x)
        xflat[i] = orig - eps
        lo = f(x)
        xflat[i] = orig
        flat[i] = (hi - lo) / (2 * eps)
    return grad


def mlp_probs_reference(block, x: np.ndarray) -> np.ndarray:
    """Straightforward float64 forward pass of one response block.

    Uses only the block's layer views (weights stored (out, in)) and
    textbook matmul/ReLU/softmax, sharing nothing with the kernel code.
    """
    h = np.asarray(x, dtype=np.float64) @ block.w_in.astype(np.float64).T
    h += block.b_in.astype(np.float64)
    np.maximum(h, 0.0, out=h)
    for layer in range(block.depth - 1):
        h = h @ block.w_mid[layer].astype(np.float64).T
        h += block.b_mid[layer].astype(np.float64)
        np.maximum(h, 0.0, out=h)
    z = h @ block.w_out.astype(np.float64).T + block.b_out.astype(np.float64)
    z -= z.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def empirical_joint_reference(net, values: np.ndarray) -> np.ndarray:
    """Sample-averaged joint distribution via per-sample kron products."""
    n = values.shape[0]
    total = int(np.prod(net.config.shape))
    acc = np.zeros(total)
    per_party = [
        mlp_probs_reference(block, np.asarray(values, dtype=np.float64)[:, list(idxs)])
        for block, idxs in zip(net.blocks, net.wiring)
    ]
    for k in range(n):
        joint = np.array([1.0])
        for probs in per_party:
            joint = np.kron(joint, probs[k])
        acc += joint
    return acc / n


def enumerate_deterministic_local(net) -> np.ndarray:
    """All deterministic local distributions of a network, one per row.

    Hidden variables are restricted to a single shared bit per source;
    each party applies every function from its received bit tuple to its
    outcome set.  This is a small discrete sanity oracle, not the full
    continuum of local models.
    """
    n_src = net.n_sources
    src_states = list(itertools.product([0, 1], repeat=n_src))
    party_inputs = [net.party_source_indices(party) for party in net.parties]

    # Per party: all functions {0,1}^k -> outcomes.
    party_fns = []
    for party, idxs in zip(net.parties, party_inputs):
        k = len(idxs)
        inputs = list(itertools.product([0, 1], repeat=k))
        fns = list(itertools.product(range(party.n_outcomes), repeat=len(inputs)))
        party_fns.append((inputs, fns))

    shape = net.shape
    total = int(np.prod(shape))
    rows = []
    for choice in itertools.product(*[range(len(fns)) for _, fns in party_fns]):
        probs = np.zeros(total)
        for state in src_states:
            flat = 0
            for (inputs, fns), idxs, fi, n_out in zip(
                party_fns, party_inputs, choice, shape
            ):
                received = tuple(state[j] for j in idxs)
                a = fns[fi][inputs.index(received)]
                flat = flat * n_out + a
            probs[flat] += 1.0 / len(src_states)
        rows.append(probs)
    return np.array(rows)
