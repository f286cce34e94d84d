"""Quantum states, joint measurements, and the Born-rule evaluator.

Everything here is small dense complex linear algebra: two-qubit source
states (pure or noisy), four-outcome joint measurements, and the
contraction that turns a network full of them into a flat outcome
distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import Distribution, NetworkConfig, OutcomeIndexer

__all__ = [
    "StateVector",
    "DensityMatrix",
    "Povm",
    "HilbertWiring",
    "bell_state",
    "rotated_state",
    "werner",
    "rgb4_povm",
    "tetra_joint_measurement",
    "computational_povm",
    "born_distribution",
    "coarse_grain",
    "TETRAHEDRON_VECTORS",
]

HERMITICITY_TOL = 1e-10
NORM_TOL = 1e-10
#: Entrywise negatives beyond this magnitude are treated as an error rather
#: than floating-point noise.
NEGATIVE_PROB_TOL = 1e-12


@dataclass(frozen=True)
class StateVector:
    """Pure state on a tensor product of subsystems."""

    amplitudes: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        amps.setflags(write=False)
        if amps.size != int(np.prod(self.dims)):
            raise ValueError(f"amplitude length {amps.size} != prod(dims) {np.prod(self.dims)}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: |psi| = {norm!r}")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.dims)


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state on a tensor product of subsystems."""

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        mat = np.asarray(self.matrix, dtype=np.complex128)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        mat.setflags(write=False)
        d = int(np.prod(self.dims))
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} != ({d}, {d})")
        if np.abs(mat - mat.conj().T).max() > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian")
        eigs = np.linalg.eigvalsh(mat)
        if eigs.min() < -HERMITICITY_TOL:
            raise ValueError(f"density matrix is not PSD (min eigenvalue {eigs.min():.3e})")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > HERMITICITY_TOL:
            raise ValueError(f"trace is {tr!r}, expected 1")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Povm:
    """Measurement given by effects ``M_a >= 0`` with ``sum_a M_a = 1``."""

    effects: tuple[np.ndarray, ...]
    dim: int
    n_outcomes: int

    def __post_init__(self) -> None:
        effects = tuple(np.asarray(e, dtype=np.complex128) for e in self.effects)
        object.__setattr__(self, "effects", effects)
        for e in effects:
            e.setflags(write=False)
        if len(effects) != self.n_outcomes:
            raise ValueError(f"{len(effects)} effects but n_outcomes={self.n_outcomes}")
        total = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for i, e in enumerate(effects):
            if e.shape != (self.dim, self.dim):
                raise ValueError(f"effect {i} has shape {e.shape}, expected {(self.dim, self.dim)}")
            if np.abs(e - e.conj().T).max() > HERMITICITY_TOL:
                raise ValueError(f"effect {i} is not Hermitian")
            if np.linalg.eigvalsh(e).min() < -HERMITICITY_TOL:
                raise ValueError(f"effect {i} is not PSD")
            total += e
        if np.abs(total - np.eye(self.dim)).max() > HERMITICITY_TOL:
            raise ValueError("effects do not sum to the identity")

    @classmethod
    def from_kets(cls, kets) -> "Povm":
        """Rank-1 projective measurement from an orthonormal list of kets."""
        kets = [np.asarray(k, dtype=np.complex128).reshape(-1) for k in kets]
        dim = kets[0].size
        effects = tuple(np.outer(k, k.conj()) for k in kets)
        return cls(effects, dim, len(kets))

    def stacked(self) -> np.ndarray:
        """Effects as one array of shape (n_outcomes, dim, dim)."""
        return np.stack(self.effects, axis=0)


@dataclass(frozen=True)
class HilbertWiring:
    """Permutation matching source particles to measurement slots.

    ``order[l] = p`` means that particle ``p`` (in source-major
    enumeration: sources in network order, particles within a source in
    the source state's own tensor order) occupies the l-th measurement
    Hilbert space (party-major enumeration).
    """

    order: tuple[int, ...]

    def __post_init__(self) -> None:
        order = tuple(int(x) for x in self.order)
        object.__setattr__(self, "order", order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"wiring {list(order)} is not a permutation of 0..{len(order) - 1}")

    def __len__(self) -> int:
        return len(self.order)

    def inverse(self) -> "HilbertWiring":
        inv = np.argsort(np.asarray(self.order))
        return HilbertWiring(tuple(int(i) for i in inv))

    @classmethod
    def identity(cls, n: int) -> "HilbertWiring":
        return cls(tuple(range(n)))


# --------------------------------------------------------------------------
# State and measurement families
# --------------------------------------------------------------------------

_BELL_AMPLITUDES = {
    "phi_plus": np.array([1, 0, 0, 1], dtype=np.complex128) / np.sqrt(2),
    "phi_minus": np.array([1, 0, 0, -1], dtype=np.complex128) / np.sqrt(2),
    "psi_plus": np.array([0, 1, 1, 0], dtype=np.complex128) / np.sqrt(2),
    "psi_minus": np.array([0, 1, -1, 0], dtype=np.complex128) / np.sqrt(2),
}


def bell_state(kind: str) -> StateVector:
    """One of the four two-qubit Bell states.

    ``kind`` is one of ``phi_plus``, ``phi_minus``, ``psi_plus``,
    ``psi_minus``.
    """
    try:
        amps = _BELL_AMPLITUDES[kind]
    except KeyError:
        raise ValueError(
            f"unknown Bell state {kind!r}; expected one of {sorted(_BELL_AMPLITUDES)}"
        ) from None
    return StateVector(amps, (2, 2))


def rotated_state(theta: float, family: int = 1) -> StateVector:
    """Maximally entangled state interpolating between two Bell states.

    Family 1: ``cos(theta/2)|phi+> + i sin(theta/2)|psi+>``;
    family 2: ``cos(theta/2)|phi-> + i sin(theta/2)|psi->``.
    ``theta`` runs over [0, pi].
    """
    if not 0.0 <= theta <= np.pi:
        raise ValueError(f"theta must be in [0, pi], got {theta}")
    if family == 1:
        base, partner = _BELL_AMPLITUDES["phi_plus"], _BELL_AMPLITUDES["psi_plus"]
    elif family == 2:
        base, partner = _BELL_AMPLITUDES["phi_minus"], _BELL_AMPLITUDES["psi_minus"]
    else:
        raise ValueError(f"family must be 1 or 2, got {family}")
    amps = np.cos(theta / 2) * base + 1j * np.sin(theta / 2) * partner
    return StateVector(amps, (2, 2))


def werner(pure: StateVector, visibility: float) -> DensityMatrix:
    """Two-qubit state mixed with white noise: ``V |psi><psi| + (1-V) I/4``."""
    if pure.dims != (2, 2):
        raise ValueError(f"expected a two-qubit state, got dims {pure.dims}")
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must be in [0, 1], got {visibility}")
    rho = visibility * np.outer(pure.amplitudes, pure.amplitudes.conj())
    rho += (1.0 - visibility) * np.eye(4) / 4.0
    return DensityMatrix(rho, (2, 2))


def rgb4_povm(u: float) -> Povm:
    """Four-outcome two-qubit projective measurement with eigenvectors
    ``{|00>; u|01>+v|10>; v|01>-u|10>; |11>}`` where ``v = sqrt(1-u^2)``.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must be in [0, 1], got {u}")
    v = np.sqrt(1.0 - u * u)
    kets = [
        np.array([1, 0, 0, 0], dtype=np.complex128),
        np.array([0, u, v, 0], dtype=np.complex128),
        np.array([0, v, -u, 0], dtype=np.complex128),
        np.array([0, 0, 0, 1], dtype=np.complex128),
    ]
    return Povm.from_kets(kets)


#: Bloch vectors of a regular tetrahedron, rows b = 0..3.
TETRAHEDRON_VECTORS = np.array(
    [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64
) / np.sqrt(3)


def bloch_ket(v) -> np.ndarray:
    """Qubit ket with Bloch vector ``v`` and ``<0|v>`` real and >= 0."""
    x, y, z = np.asarray(v, dtype=np.float64)
    beta = np.arccos(np.clip(z, -1.0, 1.0))
    alpha = np.arctan2(y, x)
    return np.array([np.cos(beta / 2), np.exp(1j * alpha) * np.sin(beta / 2)])


def tetra_joint_measurement(mu: float) -> Povm:
    """Two-qubit joint measurement with tetrahedral symmetry.

    The four eigenvectors are
    ``((sqrt3 + e^{i mu}) |m_b, -m_b> + (sqrt3 - e^{i mu}) |-m_b, m_b>) / (2 sqrt2)``
    with ``m_b`` drawn from :data:`TETRAHEDRON_VECTORS`.  ``mu = 0`` gives
    the elegant joint measurement; ``mu = pi/2`` a local rotation of the
    Bell basis.
    """
    if not 0.0 <= mu <= np.pi / 2:
        raise ValueError(f"mu must be in [0, pi/2], got {mu}")
    a = (np.sqrt(3) + np.exp(1j * mu)) / (2 * np.sqrt(2))
    b = (np.sqrt(3) - np.exp(1j * mu)) / (2 * np.sqrt(2))
    kets = []
    for m in TETRAHEDRON_VECTORS:
        plus, minus = bloch_ket(m), bloch_ket(-m)
        kets.append(a * np.kron(plus, minus) + b * np.kron(minus, plus))
    return Povm.from_kets(kets)


def computational_povm(dim: int) -> Povm:
    """Projective measurement in the computational basis of dimension ``dim``."""
    return Povm.from_kets(list(np.eye(dim, dtype=np.complex128)))


# --------------------------------------------------------------------------
# Born-rule evaluation
# --------------------------------------------------------------------------


def _group_slots_by_party(net: NetworkConfig, povms, slot_dims) -> list[int]:
    """Split the wired slot dimensions into per-party measured dimensions.

    Walks the slots left to right; each party absorbs slots until their
    dimension product matches its measurement.
    """
    counts: list[int] = []
    pos = 0
    for party, povm in zip(net.parties, povms):
        d = 1
        start = pos
        while d < povm.dim and pos < len(slot_dims):
            d *= slot_dims[pos]
            pos += 1
        if d != povm.dim:
            raise ValueError(
                f"party {party.name!r}: wired particle dimensions "
                f"{slot_dims[start:pos]} give {d}, but its measurement acts on "
                f"dimension {povm.dim}"
            )
        counts.append(pos - start)
    if pos != len(slot_dims):
        raise ValueError(f"{len(slot_dims) - pos} wired particles left over after all parties")
    return counts


def born_distribution(
    net: NetworkConfig,
    states,
    povms,
    wiring: HilbertWiring,
) -> Distribution:
    """Outcome distribution of a quantum network via the Born rule.

    ``states`` are per-source (network source order), ``povms`` per-party
    (network party order), and ``wiring`` places source particles into the
    party-major measurement slots.  Pure states are contracted directly;
    if any source is mixed, all are promoted to density matrices and the
    trace form is used.
    """
    if len(states) != net.n_sources:
        raise ValueError(f"expected {net.n_sources} states, got {len(states)}")
    if len(povms) != net.n_parties:
        raise ValueError(f"expected {net.n_parties} povms, got {len(povms)}")
    for party, povm in zip(net.parties, povms):
        if povm.n_outcomes != party.n_outcomes:
            raise ValueError(
                f"party {party.name!r} has {party.n_outcomes} outcomes but its "
                f"measurement has {povm.n_outcomes}"
            )

    particle_dims = [d for s in states for d in s.dims]
    total_particles = len(particle_dims)
    if len(wiring) != total_particles:
        raise ValueError(f"wiring length {len(wiring)} != particle count {total_particles}")

    # Slot dimensions after wiring, grouped by party.
    slot_dims = [particle_dims[p] for p in wiring.order]
    slot_counts = _group_slots_by_party(net, povms, slot_dims)
    party_dims = []
    pos = 0
    for povm, k in zip(povms, slot_counts):
        party_dims.append(int(np.prod(slot_dims[pos : pos + k], dtype=np.int64)))
        pos += k

    mixed = any(isinstance(s, DensityMatrix) for s in states)
    if mixed:
        probs = _born_mixed(states, povms, wiring, particle_dims, party_dims)
    else:
        probs = _born_pure(states, povms, wiring, particle_dims, party_dims)

    if probs.min() < -NEGATIVE_PROB_TOL:
        raise ValueError(f"Born rule produced a negative probability: {probs.min():.3e}")
    probs = np.clip(probs, 0.0, None)
    return Distribution(probs, OutcomeIndexer(net.shape))


def _born_pure(states, povms, wiring, particle_dims, party_dims) -> np.ndarray:
    psi = np.array([1.0], dtype=np.complex128)
    for s in states:
        psi = np.kron(psi, s.amplitudes)
    tensor = psi.reshape(particle_dims)
    permuted = np.transpose(tensor, axes=wiring.order)
    grouped = np.ascontiguousarray(permuted).reshape(party_dims)

    # p(a) = <psi| M_{a_1} x ... x M_{a_n} |psi>, party i acting on axis i.
    n = len(povms)
    operands: list = [grouped.conj(), list(range(n))]
    out_subs: list[int] = []
    for i, povm in enumerate(povms):
        a_i, y_i = 2 * n + i, n + i
        operands.extend([povm.stacked(), [a_i, i, y_i]])
        out_subs.append(a_i)
    operands.extend([grouped, list(range(n, 2 * n))])
    operands.append(out_subs)
    probs = np.einsum(*operands, optimize=True)
    return probs.real.reshape(-1)


def _born_mixed(states, povms, wiring, particle_dims, party_dims) -> np.ndarray:
    rho = np.array([[1.0]], dtype=np.complex128)
    for s in states:
        mat = s.matrix if isinstance(s, DensityMatrix) else s.density().matrix
        rho = np.kron(rho, mat)
    t = len(particle_dims)
    tensor = rho.reshape(particle_dims + particle_dims)
    axes = list(wiring.order) + [t + p for p in wiring.order]
    permuted = np.transpose(tensor, axes=axes)
    grouped = np.ascontiguousarray(permuted).reshape(party_dims + party_dims)

    # p(a) = Tr[rho M_{a_1} x ... x M_{a_n}] = rho[x, y] * prod_i M_i[a_i, y_i, x_i].
    n = len(povms)
    operands: list = [grouped, list(range(2 * n))]
    out_subs: list[int] = []
    for i, povm in enumerate(povms):
        a_i = 2 * n + i
        operands.extend([povm.stacked(), [a_i, n + i, i]])
        out_subs.append(a_i)
    operands.append(out_subs)
    probs = np.einsum(*operands, optimize=True)
    return probs.real.reshape(-1)


def coarse_grain(dist: Distribution, merges) -> Distribution:
    """Merge outcomes party by party.

    ``merges`` is a sequence with one entry per party; each entry maps old
    outcome -> new outcome (dict or list) and must be a surjection onto
    ``0..max``.  Probabilities of merged outcomes are summed.
    """
    shape = dist.indexer.shape
    if len(merges) != len(shape):
        raise ValueError(f"expected {len(shape)} merge maps, got {len(merges)}")
    tensor = dist.probs.reshape(shape)
    new_shape = []
    for axis, (merge, old_n) in enumerate(zip(merges, shape)):
        if isinstance(merge, dict):
            mapping = [merge[a] for a in range(old_n)] if all(
                a in merge for a in range(old_n)
            ) else None
            if mapping is None:
                missing = [a for a in range(old_n) if a not in merge]
                raise ValueError(f"party {axis}: merge map missing outcomes {missing}")
        else:
            mapping = list(merge)
            if len(mapping) != old_n:
                raise ValueError(
                    f"party {axis}: merge list has {len(mapping)} entries, expected {old_n}"
                )
        new_n = max(mapping) + 1
        if set(mapping) != set(range(new_n)):
            raise ValueError(f"party {axis}: merge map is not onto 0..{new_n - 1}")
        mat = np.zeros((new_n, old_n))
        for old, new in enumerate(mapping):
            mat[new, old] = 1.0
        tensor = np.tensordot(mat, tensor, axes=([1], [axis]))
        tensor = np.moveaxis(tensor, 0, axis)
        new_shape.append(new_n)
    return Distribution(tensor.reshape(-1), OutcomeIndexer(tuple(new_shape)))
