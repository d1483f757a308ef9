"""Anytime-valid sequential detection.

The detector accumulates wealth ``W_n = sum_t log e(v_t, s_t)`` and rejects at
the first step where ``W_n >= log(1/alpha)``.  Because the running product of
valid one-step scores is a nonnegative supermartingale under every admissible
null, the time-uniform (Ville) bound makes this stopping rule valid at level
``alpha`` no matter when or whether monitoring stops.  Wealth is kept in log
space only; the raw product would overflow within a few hundred steps.

A match-count baseline is included for comparisons: it counts steps with
``v == s``, computes an exact binomial upper tail against the worst-case null
match probability, and rejects on the schedule ``alpha / (k (k+1))`` whose sum
telescopes to ``alpha``, preserving anytime validity for p-value tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import binom

from .errors import (
    AlreadyStoppedError,
    BadAlphaError,
    BadParamsError,
    EmptyStreamError,
    FormatError,
    IndexOutOfRangeError,
)
from .evalue import EValueTable
from .simplex import NeighborhoodSpec


@dataclass(frozen=True)
class DetectorState:
    """Wealth-process detector; a single-writer value updated functionally."""

    wealth: float
    steps: int
    alpha: float
    rejected_at: int | None = None

    @property
    def threshold(self) -> float:
        return math.log(1.0 / self.alpha)

    @property
    def running(self) -> bool:
        return self.rejected_at is None


@dataclass(frozen=True)
class BaselineState:
    """Match-count baseline with Bonferroni-style rejection schedule."""

    matches: int
    steps: int
    alpha: float
    null_match_prob: float
    rejected_at: int | None = None

    @property
    def running(self) -> bool:
        return self.rejected_at is None


@dataclass(frozen=True)
class DetectionReport:
    decision: str  # "rejected" or "undecided"
    stop_step: int | None
    wealth: float
    threshold: float
    steps: int


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise BadAlphaError(f"alpha must lie in (0, 1), got {alpha!r}")
    return alpha


def init_detector(e: EValueTable, alpha: float) -> DetectorState:
    """Fresh state: zero wealth, zero steps, running."""
    del e  # the table travels alongside the state; nothing to precompute
    return DetectorState(wealth=0.0, steps=0, alpha=_check_alpha(alpha))


def observe(state: DetectorState, e: EValueTable, v: int, s: int) -> DetectorState:
    """Fold one (outcome, seed) pair into the wealth process."""
    if not state.running:
        raise AlreadyStoppedError(f"detector rejected at step {state.rejected_at}")
    if not (0 <= v < e.n and 0 <= s < e.n):
        raise IndexOutOfRangeError(f"pair ({v}, {s}) out of range for n={e.n}")
    with np.errstate(divide="ignore"):
        wealth = state.wealth + float(np.log(e.scores[v, s]))
    steps = state.steps + 1
    rejected_at = steps if wealth >= state.threshold else None
    return replace(state, wealth=wealth, steps=steps, rejected_at=rejected_at)


def worst_null_match_prob(spec: NeighborhoodSpec) -> float:
    """Largest P(v == s) over all nulls in the neighborhood.

    ``sum_v q(v) p0(v)`` is linear in q; its supremum over the ball moves
    ``delta/2`` of mass onto the anchor's argmax from its argmin.
    """
    p0 = spec.anchor.weights
    return float(p0 @ p0 + spec.delta / 2.0 * (p0.max() - p0.min()))


def init_baseline(alpha: float, null_match_prob: float) -> BaselineState:
    pbar = float(null_match_prob)
    if not (0.0 < pbar <= 1.0):
        raise BadParamsError(f"null match probability must lie in (0, 1], got {pbar!r}")
    return BaselineState(matches=0, steps=0, alpha=_check_alpha(alpha), null_match_prob=pbar)


def baseline_observe(state: BaselineState, v: int, s: int) -> BaselineState:
    """Exact binomial upper tail on the match count vs the rejection schedule."""
    if not state.running:
        raise AlreadyStoppedError(f"baseline rejected at step {state.rejected_at}")
    matches = state.matches + (1 if v == s else 0)
    k = state.steps + 1
    p_k = float(binom.sf(matches - 1, k, state.null_match_prob))
    rejected_at = k if p_k < state.alpha / (k * (k + 1)) else None
    return replace(state, matches=matches, steps=k, rejected_at=rejected_at)


def batch_detect(e: EValueTable, alpha: float, stream, budget: int) -> DetectionReport:
    """Fold :func:`observe` over up to ``budget`` pairs from the stream."""
    if budget < 1:
        raise BadParamsError(f"budget must be >= 1, got {budget}")
    pairs = list(stream)
    if not pairs:
        raise EmptyStreamError("stream holds no observations")
    state = init_detector(e, alpha)
    for v, s in pairs[:budget]:
        state = observe(state, e, int(v), int(s))
        if not state.running:
            break
    decision = "undecided" if state.running else "rejected"
    return DetectionReport(
        decision=decision,
        stop_step=state.rejected_at,
        wealth=state.wealth,
        threshold=state.threshold,
        steps=state.steps,
    )


def baseline_batch_detect(
    alpha: float, null_match_prob: float, stream, budget: int
) -> DetectionReport:
    """Baseline analogue of :func:`batch_detect`; wealth is reported as NaN."""
    if budget < 1:
        raise BadParamsError(f"budget must be >= 1, got {budget}")
    pairs = list(stream)
    if not pairs:
        raise EmptyStreamError("stream holds no observations")
    state = init_baseline(alpha, null_match_prob)
    for v, s in pairs[:budget]:
        state = baseline_observe(state, int(v), int(s))
        if not state.running:
            break
    decision = "undecided" if state.running else "rejected"
    return DetectionReport(
        decision=decision,
        stop_step=state.rejected_at,
        wealth=float("nan"),
        threshold=float("nan"),
        steps=state.steps,
    )


# -- JSON wire formats --------------------------------------------------------

def detector_to_json(state: DetectorState) -> str:
    return json.dumps(
        {
            "wealth": state.wealth,
            "steps": state.steps,
            "alpha": state.alpha,
            "status": "running" if state.running else "rejected",
            "rejected_at": state.rejected_at,
        }
    )


def detector_from_json(text: str) -> DetectorState:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    try:
        state = DetectorState(
            wealth=float(payload["wealth"]),
            steps=int(payload["steps"]),
            alpha=_check_alpha(payload["alpha"]),
            rejected_at=(None if payload.get("rejected_at") is None else int(payload["rejected_at"])),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed detector state: {exc}") from exc
    return state


def report_to_dict(report: DetectionReport) -> dict:
    return {
        "decision": report.decision,
        "stop_step": report.stop_step,
        "wealth": report.wealth,
        "threshold": report.threshold,
        "steps": report.steps,
    }
