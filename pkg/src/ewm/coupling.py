"""Generator-side couplings with prescribed marginals.

A coupling is a joint distribution ``w`` over (outcome v, seed s) whose row
marginal is the target ``q`` and whose column marginal is the anchor ``p0``.
Sampling (v, s) from ``w`` is distortion-free (the outcome marginal equals the
target exactly) and model-agnostic (the seed marginal is the anchor regardless
of the target).

Three constructions cover every admissible target:

* :func:`extreme_coupling` -- for a vertex target, move ``delta/2`` of mass
  from the diagonal cell (loss, loss) into (gain, loss) and keep the rest of
  the diagonal at ``p0``;
* :func:`mixture_coupling` -- weighted sums of vertex couplings for targets
  decomposed into vertices;
* :func:`path_coupling` -- chain a vertex shift along a simple path of
  vocabulary indices; the single-hop case coincides with
  :func:`extreme_coupling`, and under the optimal score table every multi-hop
  chain is strictly worse (each extra hop costs
  ``log(delta/(2n-2)) - log(1 - delta/2) < 0``).

Sampling draws one uniform per step and inverts the CDF of the row-major
flattened joint, which is exact and reproducible for a fixed seeded stream.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import BadWeightsError, FormatError, InvalidPathError
from .simplex import (
    EXACT_ATOL,
    ExtremePair,
    MixtureDecomposition,
    NeighborhoodSpec,
    VocabDistribution,
    _check_pair,
    _freeze,
    extreme_target,
    reconstruct_mixture,
)

# Entries more negative than this are construction bugs; above it they are
# floating-point cancellation dust and are clamped to zero.
NEG_CLAMP = 1e-14


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Joint distribution over (outcome, seed) with marginals (target, anchor)."""

    joint: np.ndarray
    target: VocabDistribution
    anchor: VocabDistribution

    def __post_init__(self):
        object.__setattr__(self, "joint", _freeze(self.joint))

    @property
    def n(self) -> int:
        return self.joint.shape[0]


@dataclass(frozen=True)
class PathSpec:
    """Ordered distinct vocabulary indices u0 ... uK, K >= 1."""

    vertices: tuple[int, ...]

    def __post_init__(self):
        v = tuple(int(x) for x in self.vertices)
        object.__setattr__(self, "vertices", v)
        if len(v) < 2:
            raise InvalidPathError(f"path needs at least 2 vertices, got {len(v)}")
        if len(set(v)) != len(v):
            raise InvalidPathError(f"path vertices must be distinct, got {v}")


def make_coupling(joint, target: VocabDistribution, anchor: VocabDistribution) -> CouplingMatrix:
    """Clamp cancellation dust and enforce the marginal constraints."""
    w = np.array(joint, dtype=np.float64)
    if w.ndim != 2 or w.shape != (target.n, anchor.n) or target.n != anchor.n:
        raise BadWeightsError(f"joint shape {w.shape} incompatible with n={anchor.n}")
    low = float(w.min())
    if low < -NEG_CLAMP:
        raise BadWeightsError(f"joint entry {low!r} below clamp threshold -{NEG_CLAMP}")
    w[w < 0.0] = 0.0
    rows = w.sum(axis=1)
    cols = w.sum(axis=0)
    if float(np.abs(rows - target.weights).max()) > EXACT_ATOL:
        raise BadWeightsError("row marginal does not match the target")
    if float(np.abs(cols - anchor.weights).max()) > EXACT_ATOL:
        raise BadWeightsError("column marginal does not match the anchor")
    if abs(float(w.sum()) - 1.0) > EXACT_ATOL:
        raise BadWeightsError(f"total mass {float(w.sum())!r} differs from 1")
    return CouplingMatrix(joint=w, target=target, anchor=anchor)


def extreme_coupling(spec: NeighborhoodSpec, pair: ExtremePair) -> CouplingMatrix:
    """Optimal coupling for a vertex target: diagonal anchor mass plus one
    off-diagonal cell (gain, loss) of size ``delta/2`` taken from (loss, loss)."""
    _check_pair(spec, pair)
    w = np.diag(spec.anchor.weights).astype(np.float64)
    w[pair.loss, pair.loss] -= spec.delta / 2.0
    w[pair.gain, pair.loss] += spec.delta / 2.0
    return make_coupling(w, extreme_target(spec, pair), spec.anchor)


def mixture_coupling(spec: NeighborhoodSpec, mix: MixtureDecomposition) -> CouplingMatrix:
    """Weight-average of vertex couplings; marginals are (reconstructed q, p0)."""
    if not mix.terms:
        raise BadWeightsError("mixture has no terms")
    if any(w < 0.0 for _, w in mix.terms):
        raise BadWeightsError("mixture weights must be nonnegative")
    if abs(mix.weight_sum() - 1.0) > EXACT_ATOL:
        raise BadWeightsError(f"mixture weights sum to {mix.weight_sum()!r}")
    joint = np.zeros((spec.n, spec.n))
    for pair, w in mix.terms:
        joint += w * extreme_coupling(spec, pair).joint
    return make_coupling(joint, reconstruct_mixture(spec, mix), spec.anchor)


def path_coupling(spec: NeighborhoodSpec, path: PathSpec) -> CouplingMatrix:
    """Chain the vertex shift along a simple path u0 -> ... -> uK.

    Each hop moves ``delta/2`` from (u_{i+1}, u_{i+1}) into (u_i, u_{i+1});
    the column perturbations cancel, so the seed marginal stays the anchor
    while the outcome marginal gains at u0 and loses at uK.
    """
    verts = path.vertices
    if max(verts) >= spec.n:
        raise InvalidPathError(f"path vertex {max(verts)} out of range for n={spec.n}")
    w = np.diag(spec.anchor.weights).astype(np.float64)
    half = spec.delta / 2.0
    for u, nxt in zip(verts[:-1], verts[1:]):
        w[u, nxt] += half
        w[nxt, nxt] -= half
    return make_coupling(w, extreme_target(spec, ExtremePair(verts[0], verts[-1])), spec.anchor)


def sample_pair(w: CouplingMatrix, rng: np.random.Generator) -> tuple[int, int]:
    """One exact draw: invert the CDF of the row-major flattened joint."""
    cdf = np.cumsum(w.joint.ravel())
    u = rng.random()
    idx = min(int(np.searchsorted(cdf, u, side="right")), w.n * w.n - 1)
    return divmod(idx, w.n)


def sample_stream(w: CouplingMatrix, steps: int, rng: np.random.Generator) -> np.ndarray:
    """``steps`` draws at once; consumes the stream exactly like repeated
    :func:`sample_pair`, so chunked and one-at-a-time sampling agree."""
    cdf = np.cumsum(w.joint.ravel())
    u = rng.random(steps)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), w.n * w.n - 1)
    out = np.empty((steps, 2), dtype=np.int64)
    out[:, 0], out[:, 1] = np.divmod(idx, w.n)
    return out


# -- CSV stream format --------------------------------------------------------

def write_stream_csv(fh: io.TextIOBase, pairs) -> None:
    """Header ``step,v,s`` then one row per draw, 0-based indices."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["step", "v", "s"])
    for step, (v, s) in enumerate(pairs):
        writer.writerow([step, int(v), int(s)])


def read_stream_csv(fh: io.TextIOBase) -> list[tuple[int, int]]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [c.strip() for c in header] != ["step", "v", "s"]:
        raise FormatError("stream file must start with header 'step,v,s'")
    out = []
    for row in reader:
        if not row:
            continue
        if len(row) != 3:
            raise FormatError(f"malformed stream row: {row!r}")
        out.append((int(row[1]), int(row[2])))
    return out
