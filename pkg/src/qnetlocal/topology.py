"""Network structure, outcome indexing, and distribution distances.

A network is a set of named parties, each wired to one or more named
sources and producing one of ``n_outcomes`` outputs.  Joint outcomes are
stored as flat vectors in row-major order (last party's outcome varies
fastest), which fixes the layout of every probability vector in the
package.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PartySpec",
    "NetworkConfig",
    "OutcomeIndexer",
    "Distribution",
    "ConfigError",
    "parse_config",
    "kl_divergence",
    "euclidean_distance",
]

#: Lower clamp applied to the second argument of the KL divergence so that
#: empirical estimates with unvisited outcomes stay finite.
KL_CLAMP = 1e-12

#: Tolerance on ``sum(probs) == 1`` when constructing a Distribution.
NORMALIZATION_TOL = 1e-9


class ConfigError(ValueError):
    """Raised for malformed or inconsistent network configuration documents."""


@dataclass(frozen=True)
class PartySpec:
    """One party: its name, the sources it receives, and its outcome count."""

    name: str
    sources: tuple[str, ...]
    n_outcomes: int

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("party name must be a non-empty string")
        if len(self.sources) == 0:
            raise ConfigError(f"party {self.name!r}: source list is empty")
        if len(set(self.sources)) != len(self.sources):
            raise ConfigError(f"party {self.name!r}: duplicate source in {list(self.sources)}")
        if self.n_outcomes < 2:
            raise ConfigError(
                f"party {self.name!r}: outcomes must be >= 2 (got {self.n_outcomes})"
            )


@dataclass(frozen=True)
class NetworkConfig:
    """Ordered parties plus the ordered list of all distinct sources.

    Party order fixes the outcome-tuple order; source order is the order
    of first appearance across parties (in document order) and fixes the
    hidden-variable column order as well as the quantum particle
    enumeration.
    """

    parties: tuple[PartySpec, ...]
    sources: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.parties) == 0:
            raise ConfigError("network has no parties")
        names = [p.name for p in self.parties]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ConfigError(f"duplicate party name(s): {dupes}")
        derived = _first_appearance_sources(self.parties)
        if self.sources == ():
            object.__setattr__(self, "sources", derived)
        elif tuple(self.sources) != derived:
            raise ConfigError(
                f"declared source order {list(self.sources)} does not match "
                f"first-appearance order {list(derived)}"
            )
        usage = self.source_usage()
        lonely = [s for s, ps in usage.items() if len(ps) == 1]
        if lonely:
            warnings.warn(
                f"source(s) {lonely} feed only one party; accepted, but they "
                "cannot create correlations",
                stacklevel=2,
            )

    @property
    def n_parties(self) -> int:
        return len(self.parties)

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(p.n_outcomes for p in self.parties)

    def indexer(self) -> OutcomeIndexer:
        return OutcomeIndexer(self.shape)

    def source_index(self, name: str) -> int:
        try:
            return self.sources.index(name)
        except ValueError:
            raise ConfigError(f"unknown source {name!r}") from None

    def party_source_indices(self, party: PartySpec) -> tuple[int, ...]:
        """Column indices of a party's sources in the hidden-variable matrix."""
        return tuple(self.source_index(s) for s in party.sources)

    def source_usage(self) -> dict[str, list[str]]:
        """Map source name -> party names that receive it, in party order."""
        usage: dict[str, list[str]] = {s: [] for s in self.sources}
        for p in self.parties:
            for s in p.sources:
                usage[s].append(p.name)
        return usage

    def to_dict(self) -> dict:
        return {
            "parties": {
                p.name: {"sources": list(p.sources), "outcomes": p.n_outcomes}
                for p in self.parties
            }
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkConfig":
        if not isinstance(doc, dict) or "parties" not in doc:
            raise ConfigError('config document must be an object with a "parties" key')
        parties_doc = doc["parties"]
        if not isinstance(parties_doc, dict) or not parties_doc:
            raise ConfigError('"parties" must be a non-empty object')
        parties = []
        for name, entry in parties_doc.items():
            if not isinstance(entry, dict):
                raise ConfigError(f"party {name!r}: entry must be an object")
            missing = {"sources", "outcomes"} - entry.keys()
            if missing:
                raise ConfigError(f"party {name!r}: missing key(s) {sorted(missing)}")
            sources = entry["sources"]
            if not isinstance(sources, list) or not all(isinstance(s, str) for s in sources):
                raise ConfigError(f"party {name!r}: sources must be a list of strings")
            outcomes = entry["outcomes"]
            if not isinstance(outcomes, int) or isinstance(outcomes, bool):
                raise ConfigError(f"party {name!r}: outcomes must be an integer")
            parties.append(PartySpec(name, tuple(sources), outcomes))
        return cls(tuple(parties))


def _first_appearance_sources(parties: tuple[PartySpec, ...]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for p in parties:
        for s in p.sources:
            seen.setdefault(s, None)
    return tuple(seen)


def parse_config(text: str) -> NetworkConfig:
    """Parse a JSON config document into a validated NetworkConfig.

    Expected format::

        {"parties": {"<name>": {"sources": ["<src>", ...], "outcomes": <int>}, ...}}

    Party iteration order is document order and defines the outcome-tuple
    order; source order is first appearance across parties.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config document: {exc}") from exc
    return NetworkConfig.from_dict(doc)


@dataclass(frozen=True)
class OutcomeIndexer:
    """Bijection between outcome tuples and flat row-major indices."""

    shape: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", tuple(int(o) for o in self.shape))
        if any(o < 1 for o in self.shape):
            raise ValueError(f"invalid shape {self.shape}")

    @property
    def total(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    def index(self, outcome: tuple[int, ...]) -> int:
        """Flat row-major index of an outcome tuple (last party fastest)."""
        if len(outcome) != len(self.shape):
            raise ValueError(f"expected {len(self.shape)} components, got {len(outcome)}")
        flat = 0
        for a, o in zip(outcome, self.shape):
            if not 0 <= a < o:
                raise ValueError(f"outcome component {a} out of range [0, {o})")
            flat = flat * o + a
        return flat

    def tuple_of(self, flat: int) -> tuple[int, ...]:
        """Inverse of :meth:`index`."""
        if not 0 <= flat < self.total:
            raise ValueError(f"flat index {flat} out of range [0, {self.total})")
        out = []
        for o in reversed(self.shape):
            out.append(flat % o)
            flat //= o
        return tuple(reversed(out))

    def all_tuples(self):
        """Iterate all outcome tuples in row-major order."""
        return (self.tuple_of(i) for i in range(self.total))


@dataclass(frozen=True)
class Distribution:
    """Flat nonnegative probability vector over joint outcomes."""

    probs: np.ndarray
    indexer: OutcomeIndexer

    def __post_init__(self) -> None:
        arr = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "probs", arr)
        arr.setflags(write=False)
        if arr.size != self.indexer.total:
            raise ValueError(
                f"probability vector has length {arr.size}, expected {self.indexer.total}"
            )
        if np.any(arr < 0):
            raise ValueError(f"negative probability entries (min {arr.min():.3e})")
        total = arr.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(
                f"probabilities sum to {total!r}; off by more than {NORMALIZATION_TOL}"
            )

    def __getitem__(self, outcome: tuple[int, ...]) -> float:
        return float(self.probs[self.indexer.index(outcome)])

    @classmethod
    def uniform(cls, indexer: OutcomeIndexer) -> "Distribution":
        n = indexer.total
        return cls(np.full(n, 1.0 / n), indexer)

    @classmethod
    def from_array(cls, probs, shape: tuple[int, ...]) -> "Distribution":
        return cls(np.asarray(probs, dtype=np.float64), OutcomeIndexer(tuple(shape)))


def _check_same_shape(p: Distribution, q: Distribution) -> None:
    if p.indexer.shape != q.indexer.shape:
        raise ValueError(f"shape mismatch: {p.indexer.shape} vs {q.indexer.shape}")


def kl_divergence(p: Distribution, q: Distribution, *, clamp: float = KL_CLAMP) -> float:
    """Relative entropy ``sum_i p_i * log(p_i / q_i)`` with natural log.

    ``q`` is clamped below by ``clamp`` so empirical estimates with
    unvisited outcomes stay finite; terms with ``p_i == 0`` contribute 0.
    """
    _check_same_shape(p, q)
    return kl_divergence_raw(p.probs, q.probs, clamp=clamp)


def kl_divergence_raw(p: np.ndarray, q: np.ndarray, *, clamp: float = KL_CLAMP) -> float:
    mask = p > 0
    if not mask.any():
        return 0.0
    ps = p[mask]
    qs = np.maximum(q[mask], clamp)
    return float(np.sum(ps * np.log(ps / qs)))


def euclidean_distance(p: Distribution, q: Distribution) -> float:
    """Euclidean (L2) distance ``sqrt(sum_i |p_i - q_i|^2)``."""
    _check_same_shape(p, q)
    return euclidean_distance_raw(p.probs, q.probs)


def euclidean_distance_raw(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sqrt(np.sum((p - q) ** 2)))
