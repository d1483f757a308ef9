"""Probability-simplex primitives.

A finite vocabulary of ``n >= 2`` symbols carries three kinds of objects:

* :class:`VocabDistribution` -- a validated probability vector;
* :class:`NeighborhoodSpec`  -- an anchor distribution ``p0`` together with an
  L1 radius ``delta``, describing the polytope of admissible targets
  ``{q : ||q - p0||_1 <= delta}``;
* :class:`ExtremePair` / :class:`MixtureDecomposition` -- the vertices of that
  polytope and convex combinations of them.

A vertex shifts ``delta/2`` of mass from a *loss* symbol ``b`` onto a *gain*
symbol ``a``: ``q_ab = p0 + (delta/2) * (1_a - 1_b)``.  Because every point of
the ball is a convex combination of vertices (a transportation/circulation
argument), :func:`decompose_target` can express any admissible target as a
mixture over vertices; the construction is a deterministic greedy transport so
the decomposition is reproducible.

Tolerances are centralized here: ``SIMPLEX_ATOL`` for accepting input weight
vectors, ``RECONSTRUCT_ATOL`` for mixture reconstruction, ``EXACT_ATOL`` for
arithmetic identities.

All types are immutable values and all operations are pure functions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadDeltaError,
    FormatError,
    InvalidPairError,
    InvalidSpecError,
    LengthMismatchError,
    NegativeWeightError,
    OutsideNeighborhoodError,
    SumNotOneError,
    TooShortError,
)

# Accepted deviation of input weights from unit sum (renormalized inside it).
SIMPLEX_ATOL = 1e-9
# Mixture reconstruction accuracy, L-infinity.
RECONSTRUCT_ATOL = 1e-10
# Arithmetic identities (entropy/growth-rate cross-checks, marginal sums).
EXACT_ATOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class VocabDistribution:
    """Probability vector over a vocabulary of size ``n >= 2``.

    Construct through :func:`make_distribution`; direct construction skips
    validation and is reserved for internal callers that guarantee it.
    """

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _freeze(self.weights))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def as_list(self) -> list[float]:
        return [float(x) for x in self.weights]


@dataclass(frozen=True, eq=False)
class NeighborhoodSpec:
    """Anchor distribution plus L1 robustness radius.

    Standing assumption: ``min_v anchor(v) > delta`` and ``0 < delta < 2``,
    so the ball is a strict subset of the simplex and every vertex has
    strictly positive entries.
    """

    anchor: VocabDistribution
    delta: float

    @property
    def n(self) -> int:
        return self.anchor.n


@dataclass(frozen=True)
class ExtremePair:
    """Vertex of the neighborhood: gain index ``a``, loss index ``b``, a != b."""

    gain: int
    loss: int

    def __post_init__(self):
        if self.gain == self.loss:
            raise InvalidPairError(f"gain and loss must differ, got ({self.gain}, {self.loss})")
        if self.gain < 0 or self.loss < 0:
            raise InvalidPairError(f"indices must be nonnegative, got ({self.gain}, {self.loss})")


@dataclass(frozen=True, eq=False)
class MixtureDecomposition:
    """Convex combination of extreme pairs: tuple of (pair, weight) terms."""

    terms: tuple[tuple[ExtremePair, float], ...]

    def weight_sum(self) -> float:
        return float(sum(w for _, w in self.terms))


def make_distribution(weights) -> VocabDistribution:
    """Validate a weight vector and return it as a distribution.

    Weights must be nonnegative and sum to 1 within ``SIMPLEX_ATOL``; within
    that slack, they are renormalized to an exact unit sum.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1:
        raise FormatError(f"weights must be one-dimensional, got shape {w.shape}")
    if w.shape[0] < 2:
        raise TooShortError(f"need at least 2 symbols, got {w.shape[0]}")
    if not np.all(np.isfinite(w)):
        raise FormatError("weights must be finite")
    if np.any(w < 0.0):
        raise NegativeWeightError(f"negative weight at index {int(np.argmin(w))}")
    total = float(w.sum())
    if abs(total - 1.0) > SIMPLEX_ATOL:
        raise SumNotOneError(f"weights sum to {total!r}, deviation exceeds {SIMPLEX_ATOL}")
    return VocabDistribution(w / total)


def make_neighborhood(anchor: VocabDistribution, delta: float) -> NeighborhoodSpec:
    """Validate ``0 < delta < 2`` and ``min(anchor) > delta``."""
    delta = float(delta)
    if not (0.0 < delta < 2.0):
        raise InvalidSpecError(f"delta must lie in (0, 2), got {delta!r}")
    lo = float(anchor.weights.min())
    if not lo > delta:
        raise InvalidSpecError(f"min anchor weight {lo!r} must exceed delta {delta!r}")
    return NeighborhoodSpec(anchor=anchor, delta=delta)


def entropy(d: VocabDistribution) -> float:
    """Shannon entropy in nats; terms with zero weight contribute zero."""
    w = d.weights
    nz = w[w > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def l1_distance(p: VocabDistribution, q: VocabDistribution) -> float:
    """Sum of absolute coordinate differences."""
    if p.n != q.n:
        raise LengthMismatchError(f"lengths differ: {p.n} vs {q.n}")
    return float(np.abs(p.weights - q.weights).sum())


def extreme_target(spec: NeighborhoodSpec, pair: ExtremePair) -> VocabDistribution:
    """The vertex distribution ``p0 + (delta/2)(1_gain - 1_loss)``."""
    _check_pair(spec, pair)
    q = spec.anchor.weights.copy()
    q[pair.gain] += spec.delta / 2.0
    q[pair.loss] -= spec.delta / 2.0
    return VocabDistribution(q)


def enumerate_extremes(spec: NeighborhoodSpec) -> list[ExtremePair]:
    """All ``n(n-1)`` vertices in lexicographic (gain, loss) order."""
    n = spec.n
    return [ExtremePair(a, b) for a in range(n) for b in range(n) if a != b]


def decompose_target(spec: NeighborhoodSpec, q: VocabDistribution) -> MixtureDecomposition:
    """Express an admissible target as a convex combination of vertices.

    The shift ``s = q - p0`` is split into its positive (supply) and negative
    (demand) supports and routed greedily in ascending index order
    (northwest-corner).  Each routed unit of mass ``a_ij`` becomes weight
    ``a_ij * 2/delta`` on the vertex ``(i, j)``.  When the total transported
    mass falls short of ``delta/2`` the remaining weight is padded, split
    equally, on the canceling pair (0,1)/(1,0), whose contributions sum to the
    anchor itself.
    """
    if q.n != spec.n:
        raise LengthMismatchError(f"lengths differ: {q.n} vs {spec.n}")
    p0 = spec.anchor.weights
    delta = spec.delta
    shift = q.weights - p0
    if float(np.abs(shift).sum()) > delta + RECONSTRUCT_ATOL:
        raise OutsideNeighborhoodError(
            f"target at L1 distance {float(np.abs(shift).sum())!r} > delta {delta!r}"
        )

    supply = [(i, float(shift[i])) for i in range(spec.n) if shift[i] > 0.0]
    demand = [(j, float(-shift[j])) for j in range(spec.n) if shift[j] < 0.0]

    weights: dict[tuple[int, int], float] = {}
    moved = 0.0
    di = 0
    remaining_demand = demand[di][1] if demand else 0.0
    for i, si in supply:
        left = si
        while left > 0.0 and di < len(demand):
            amount = min(left, remaining_demand)
            if amount > 0.0:
                key = (i, demand[di][0])
                weights[key] = weights.get(key, 0.0) + amount * 2.0 / delta
                moved += amount
                left -= amount
                remaining_demand -= amount
            if remaining_demand <= 0.0:
                di += 1
                remaining_demand = demand[di][1] if di < len(demand) else 0.0

    pad = 1.0 - 2.0 * moved / delta
    if pad > EXACT_ATOL:  # below that it is rounding dust, not residual mass
        weights[(0, 1)] = weights.get((0, 1), 0.0) + pad / 2.0
        weights[(1, 0)] = weights.get((1, 0), 0.0) + pad / 2.0

    terms = tuple(
        (ExtremePair(a, b), w) for (a, b), w in sorted(weights.items()) if w > 0.0
    )
    return MixtureDecomposition(terms=terms)


def reconstruct_mixture(spec: NeighborhoodSpec, mix: MixtureDecomposition) -> VocabDistribution:
    """Weighted sum of vertex distributions; inverse of :func:`decompose_target`."""
    q = spec.anchor.weights.copy()
    half = spec.delta / 2.0
    for pair, w in mix.terms:
        q[pair.gain] += w * half
        q[pair.loss] -= w * half
    return VocabDistribution(q)


def noise_profile(n: int, delta: float) -> VocabDistribution:
    """The categorical noise distribution ``(1 - delta/2, delta/(2(n-1)), ...)``.

    Its entropy deficit against the anchor is exactly the optimal growth rate:
    ``jstar = entropy(p0) - entropy(noise_profile(n, delta))``.
    """
    if n < 2:
        raise TooShortError(f"need at least 2 symbols, got {n}")
    if not (0.0 < float(delta) < 2.0):
        raise BadDeltaError(f"delta must lie in (0, 2), got {delta!r}")
    w = np.full(n, delta / (2.0 * (n - 1)))
    w[0] = 1.0 - delta / 2.0
    return VocabDistribution(w)


def _check_pair(spec: NeighborhoodSpec, pair: ExtremePair) -> None:
    if pair.gain >= spec.n or pair.loss >= spec.n:
        raise InvalidPairError(
            f"pair ({pair.gain}, {pair.loss}) out of range for n={spec.n}"
        )


# -- JSON wire formats --------------------------------------------------------

def distribution_to_json(d: VocabDistribution) -> str:
    """A bare JSON array of weights."""
    return json.dumps(d.as_list())


def distribution_from_json(text: str) -> VocabDistribution:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise FormatError("expected a JSON array of weights")
    return make_distribution(payload)


def spec_to_json(spec: NeighborhoodSpec) -> str:
    return json.dumps({"anchor": spec.anchor.as_list(), "delta": spec.delta})


def spec_from_json(text: str) -> NeighborhoodSpec:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "anchor" not in payload or "delta" not in payload:
        raise FormatError('expected {"anchor": [...], "delta": x}')
    return make_neighborhood(make_distribution(payload["anchor"]), float(payload["delta"]))
