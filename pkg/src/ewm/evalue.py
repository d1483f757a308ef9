"""Worst-case log-optimal score tables.

A score table ``e(v, s) >= 0`` over (outcome, seed) pairs is a valid one-step
detection score for a neighborhood when its expectation is at most 1 under
*every* admissible null: ``sum_{v,s} q(v) p0(s) e(v,s) <= 1`` for all targets
``q`` in the L1 ball.  The expectation is linear in ``q``, so the supremum over
the ball is attained at a vertex, and :func:`null_worst_expectation` audits
exactly the ``n(n-1)`` vertices.

The unique score table maximizing the worst-case expected log score under the
alternative has the closed form built by :func:`optimal_evalue`::

    e*(v, s) = (1 - delta/2) / p0(s)          if v == s
             = delta / (2 (n-1) p0(s))        otherwise

Its row normalizers ``A(v) = sum_s p0(s) e(v, s)`` all equal 1, so the kernel
``r(v, s) = p0(s) e(v, s) / A(v)`` is row-stochastic with constant diagonal
``1 - delta/2`` and constant off-diagonal ``delta / (2n - 2)``.  The resulting
optimal growth rate is

    jstar = H(p0) + (1 - delta/2) log(1 - delta/2)
                  + (delta/2) log(delta / (2(n-1)))
          = H(p0) - H(noise_profile(n, delta)),

the entropy of the anchor minus the entropy of the induced noise channel.
All logarithms are natural; rates are in nats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    FormatError,
    NegativeWeightError,
    ZeroRowError,
)
from .simplex import NeighborhoodSpec, _freeze, entropy


@dataclass(frozen=True, eq=False)
class EValueTable:
    """Nonnegative score matrix indexed (outcome v, seed s)."""

    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scores", _freeze(self.scores))

    @property
    def n(self) -> int:
        return self.scores.shape[0]


def make_evalue_table(scores) -> EValueTable:
    """Validate a square, finite, nonnegative score matrix."""
    m = np.asarray(scores, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"scores must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise FormatError("scores must be finite")
    if np.any(m < 0.0):
        raise NegativeWeightError("scores must be nonnegative")
    return EValueTable(m)


def optimal_evalue(spec: NeighborhoodSpec) -> EValueTable:
    """The worst-case log-optimal score table for the given neighborhood.

    Every row normalizer equals 1 exactly:
    ``(1 - delta/2) + (n-1) * delta/(2(n-1)) = 1``.
    """
    p0 = spec.anchor.weights
    n = spec.n
    scores = spec.delta / (2.0 * (n - 1)) / p0[np.newaxis, :] * np.ones((n, n))
    idx = np.arange(n)
    scores[idx, idx] = (1.0 - spec.delta / 2.0) / p0
    return EValueTable(scores)


def row_sums(e: EValueTable, spec: NeighborhoodSpec) -> np.ndarray:
    """Row normalizers ``A(v) = sum_s p0(s) e(v, s)``."""
    _check_dims(e, spec)
    return e.scores @ spec.anchor.weights


def null_worst_expectation(e: EValueTable, spec: NeighborhoodSpec) -> float:
    """Largest null expectation of the table over the whole neighborhood.

    Equals ``max`` over the vertices ``q_ab`` of ``sum_v q_ab(v) A(v)``; a
    table is a valid score iff the result is <= 1 (up to 1e-10 slack).
    """
    a = row_sums(e, spec)
    base = float(spec.anchor.weights @ a)
    # value at vertex (gain, loss) is base + (delta/2) * (A[gain] - A[loss])
    diff = a[:, np.newaxis] - a[np.newaxis, :]
    np.fill_diagonal(diff, -np.inf)
    return base + spec.delta / 2.0 * float(diff.max())


def jstar(spec: NeighborhoodSpec) -> float:
    """Closed-form optimal worst-case log growth rate, in nats."""
    d = spec.delta
    n = spec.n
    return (
        entropy(spec.anchor)
        + (1.0 - d / 2.0) * math.log(1.0 - d / 2.0)
        + d / 2.0 * math.log(d / (2.0 * (n - 1)))
    )


def kernel_of(e: EValueTable, spec: NeighborhoodSpec) -> np.ndarray:
    """Row-stochastic kernel ``r(v, s) = p0(s) e(v, s) / A(v)``."""
    a = row_sums(e, spec)
    if np.any(a <= 0.0):
        raise ZeroRowError(f"zero row normalizer at row {int(np.argmin(a))}")
    return spec.anchor.weights[np.newaxis, :] * e.scores / a[:, np.newaxis]


def _check_dims(e: EValueTable, spec: NeighborhoodSpec) -> None:
    if e.n != spec.n:
        raise DimensionMismatchError(f"table is {e.n}x{e.n} but vocabulary has n={spec.n}")


# -- JSON wire format ---------------------------------------------------------

def evalue_to_json(e: EValueTable) -> str:
    """``{"n": n, "scores": row-major array}``; floats round-trip exactly."""
    return json.dumps({"n": e.n, "scores": [float(x) for x in e.scores.ravel()]})


def evalue_from_json(text: str) -> EValueTable:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "n" not in payload or "scores" not in payload:
        raise FormatError('expected {"n": n, "scores": [...]}')
    n = int(payload["n"])
    flat = np.asarray(payload["scores"], dtype=np.float64)
    if flat.shape != (n * n,):
        raise DimensionMismatchError(f"expected {n * n} scores, got {flat.shape[0]}")
    return make_evalue_table(flat.reshape(n, n))
