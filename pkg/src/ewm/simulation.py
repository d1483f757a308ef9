"""Adversary/generator process and Monte Carlo stopping-time estimation.

At each step an adversary picks a vertex target inside the neighborhood, the
generator responds with the vertex coupling (its best response under the
optimal score table), a pair (v, s) is drawn from it, and the detector's
wealth advances by ``log e(v, s)``.  The trial stops at the first threshold
crossing or at a horizon cap.

Reproducibility contract
------------------------
Each trial owns an independent counter-based random stream (Philox) keyed by

    trial_seed = mix64( base_seed XOR (alpha_index * 0x9E3779B97F4A7C15)
                                  XOR trial_index )

where ``mix64`` is the splitmix64 finalizer (xor-shift/multiply avalanche).
Trials are therefore embarrassingly parallel, and results are identical for
any worker count or scheduling order.  Fixed-target trials additionally take
a vectorized fast path that consumes the per-trial stream in chunks; chunked
and stepwise consumption of a stream coincide draw for draw, so the fast path
reproduces the stepwise loop exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coupling import CouplingMatrix, extreme_coupling, sample_pair
from .detection import init_detector, observe
from .errors import (
    BadAlphaError,
    BadParamsError,
    InvalidPairError,
    OutsideNeighborhoodError,
)
from .evalue import EValueTable, jstar, optimal_evalue
from .simplex import (
    RECONSTRUCT_ATOL,
    ExtremePair,
    NeighborhoodSpec,
    VocabDistribution,
    enumerate_extremes,
    l1_distance,
)

_MASK64 = (1 << 64) - 1
_ALPHA_STRIDE = 0x9E3779B97F4A7C15  # golden-ratio odd constant


def mix64(x: int) -> int:
    """Splitmix64 finalizer: a fixed 64-bit avalanche permutation."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def trial_seed(base_seed: int, alpha_index: int, trial_index: int) -> int:
    """Order-independent per-trial seed derivation."""
    return mix64(base_seed ^ ((alpha_index * _ALPHA_STRIDE) & _MASK64) ^ trial_index)


def trial_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for one trial; deterministic across platforms."""
    return np.random.Generator(np.random.Philox(key=seed))


# -- adversary policies ---------------------------------------------------------
# Every policy emits vertices of the neighborhood, so each per-step target is
# admissible by construction.


@dataclass(frozen=True)
class FixedPair:
    """Play one vertex forever (the worst-case stationary adversary)."""

    gain: int
    loss: int


@dataclass(frozen=True)
class RoundRobin:
    """Cycle through all vertices in lexicographic order."""


@dataclass(frozen=True)
class RandomPair:
    """Pick a vertex uniformly at random each step."""


@dataclass(frozen=True)
class HistoryGreedy:
    """Play the vertex whose recent realized log score was smallest.

    Unplayed vertices are tried first in lexicographic order; afterwards the
    vertex with the lowest mean log score over the last ``window`` steps is
    chosen, ties broken lexicographically.  Under the optimal score table all
    vertices share the same expected log score, so no choice lowers the drift.
    """

    window: int = 32


AdversaryPolicy = FixedPair | RoundRobin | RandomPair | HistoryGreedy


@dataclass(frozen=True)
class StepOutcome:
    pair_index: int
    v: int
    s: int
    log_e: float


@dataclass(frozen=True)
class TrialRecord:
    """One simulated detection run; ``stop_step`` is None when censored."""

    stop_step: int | None
    final_wealth: float
    steps_run: int
    seed: int


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    log_inv_alpha: float
    mean_tau: float
    std_err: float
    ratio: float
    censored_count: int


@dataclass(frozen=True)
class ExperimentConfig:
    spec: NeighborhoodSpec
    alphas: tuple[float, ...]
    trials: int
    policy: AdversaryPolicy
    horizon_cap: int | None = None  # None: ceil(10 * log(1/alpha) / jstar) per alpha
    base_seed: int = 0

    def __post_init__(self):
        if not self.alphas:
            raise BadParamsError("need at least one alpha")
        for a in self.alphas:
            if not (0.0 < a < 1.0):
                raise BadAlphaError(f"alpha must lie in (0, 1), got {a!r}")
        if self.trials < 1:
            raise BadParamsError(f"trials must be >= 1, got {self.trials}")
        if self.horizon_cap is not None and self.horizon_cap < 1:
            raise BadParamsError(f"horizon cap must be >= 1, got {self.horizon_cap}")
        if isinstance(self.policy, FixedPair):
            n = self.spec.n
            if not (0 <= self.policy.gain < n and 0 <= self.policy.loss < n):
                raise InvalidPairError(f"fixed pair out of range for n={n}")
            if self.policy.gain == self.policy.loss:
                raise InvalidPairError("fixed pair indices must differ")


def choose_pair(
    policy: AdversaryPolicy,
    step: int,
    history: list[StepOutcome],
    spec: NeighborhoodSpec,
    rng: np.random.Generator,
) -> ExtremePair:
    """The adversary's vertex for this step."""
    pairs = enumerate_extremes(spec)
    if isinstance(policy, FixedPair):
        return ExtremePair(policy.gain, policy.loss)
    if isinstance(policy, RoundRobin):
        return pairs[step % len(pairs)]
    if isinstance(policy, RandomPair):
        return pairs[int(rng.integers(len(pairs)))]
    if isinstance(policy, HistoryGreedy):
        recent = history[-policy.window:]
        seen: dict[int, list[float]] = {}
        for rec in recent:
            seen.setdefault(rec.pair_index, []).append(rec.log_e)
        played = {rec.pair_index for rec in history}
        for idx in range(len(pairs)):
            if idx not in played:
                return pairs[idx]
        best_idx = 0
        best_mean = math.inf
        for idx in range(len(pairs)):
            vals = seen.get(idx)
            mean = sum(vals) / len(vals) if vals else math.inf
            if mean < best_mean:
                best_mean = mean
                best_idx = idx
        return pairs[best_idx]
    raise BadParamsError(f"unknown policy {policy!r}")


def step_process(
    policy: AdversaryPolicy,
    history: list[StepOutcome],
    spec: NeighborhoodSpec,
    e: EValueTable,
    rng: np.random.Generator,
) -> tuple[VocabDistribution, CouplingMatrix, tuple[int, int]]:
    """One adversary/generator round: target, best-response coupling, sample."""
    pair = choose_pair(policy, len(history), history, spec, rng)
    w = extreme_coupling(spec, pair)
    v, s = sample_pair(w, rng)
    return w.target, w, (v, s)


def default_horizon(spec: NeighborhoodSpec, alpha: float) -> int:
    """Cap generous enough that censoring is negligible under steady drift."""
    return int(math.ceil(10.0 * math.log(1.0 / alpha) / jstar(spec)))


def _pair_lex_index(pair: ExtremePair, n: int) -> int:
    offset = pair.loss if pair.loss < pair.gain else pair.loss - 1
    return pair.gain * (n - 1) + offset


def _run_trial_generic(
    spec: NeighborhoodSpec,
    e: EValueTable,
    policy: AdversaryPolicy,
    alpha: float,
    cap: int,
    seed: int,
    couplings: dict[int, CouplingMatrix] | None = None,
) -> TrialRecord:
    """Stepwise loop; the reference implementation for every policy."""
    rng = trial_rng(seed)
    state = init_detector(e, alpha)
    history: list[StepOutcome] = []
    pairs = enumerate_extremes(spec)
    cache = couplings if couplings is not None else {}
    log_scores = np.log(e.scores)
    while state.running and state.steps < cap:
        pair = choose_pair(policy, state.steps, history, spec, rng)
        idx = _pair_lex_index(pair, spec.n)
        w = cache.get(idx)
        if w is None:
            w = extreme_coupling(spec, pairs[idx])
            cache[idx] = w
        v, s = sample_pair(w, rng)
        state = observe(state, e, v, s)
        history.append(StepOutcome(idx, v, s, float(log_scores[v, s])))
    return TrialRecord(
        stop_step=state.rejected_at,
        final_wealth=state.wealth,
        steps_run=state.steps,
        seed=seed,
    )


def _run_trial_fixed(
    cdf: np.ndarray,
    log_flat: np.ndarray,
    threshold: float,
    cap: int,
    seed: int,
    chunk: int,
) -> TrialRecord:
    """Vectorized fast path for a constant coupling; stream-equivalent to the
    stepwise loop because chunked uniform draws consume the stream in order."""
    rng = trial_rng(seed)
    top = log_flat.size - 1
    wealth = 0.0
    steps = 0
    while steps < cap:
        k = min(chunk, cap - steps)
        u = rng.random(k)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), top)
        inc = log_flat[idx]
        # fold the carry into the first term so cumsum reproduces the exact
        # left-to-right rounding of the stepwise loop
        inc[0] += wealth
        cum = np.cumsum(inc)
        hit = np.nonzero(cum >= threshold)[0]
        if hit.size:
            j = int(hit[0])
            return TrialRecord(
                stop_step=steps + j + 1,
                final_wealth=float(cum[j]),
                steps_run=steps + j + 1,
                seed=seed,
            )
        wealth = float(cum[-1])
        steps += k
    return TrialRecord(stop_step=None, final_wealth=wealth, steps_run=steps, seed=seed)


def run_trial(
    config: ExperimentConfig, alpha: float, alpha_index: int, trial_index: int
) -> TrialRecord:
    """Simulate one detection run with its deterministically derived seed."""
    if not (0.0 < alpha < 1.0):
        raise BadAlphaError(f"alpha must lie in (0, 1), got {alpha!r}")
    seed = trial_seed(config.base_seed, alpha_index, trial_index)
    spec = config.spec
    e = optimal_evalue(spec)
    cap = config.horizon_cap or default_horizon(spec, alpha)
    if isinstance(config.policy, FixedPair):
        w = extreme_coupling(spec, ExtremePair(config.policy.gain, config.policy.loss))
        threshold = math.log(1.0 / alpha)
        chunk = max(64, int(1.25 * threshold / jstar(spec)) + 16)
        return _run_trial_fixed(
            np.cumsum(w.joint.ravel()), np.log(e.scores).ravel(), threshold, cap, seed, chunk
        )
    return _run_trial_generic(spec, e, config.policy, alpha, cap, seed)


def _sweep_task(args) -> tuple[int, int, np.ndarray]:
    """One (alpha, trial-range) work unit; returns stop steps, -1 = censored."""
    config, alpha, alpha_index, lo, hi = args
    spec = config.spec
    e = optimal_evalue(spec)
    cap = config.horizon_cap or default_horizon(spec, alpha)
    taus = np.empty(hi - lo, dtype=np.int64)
    if isinstance(config.policy, FixedPair):
        w = extreme_coupling(spec, ExtremePair(config.policy.gain, config.policy.loss))
        cdf = np.cumsum(w.joint.ravel())
        log_flat = np.log(e.scores).ravel()
        threshold = math.log(1.0 / alpha)
        chunk = max(64, int(1.25 * threshold / jstar(spec)) + 16)
        for t in range(lo, hi):
            rec = _run_trial_fixed(
                cdf, log_flat, threshold, cap,
                trial_seed(config.base_seed, alpha_index, t), chunk,
            )
            taus[t - lo] = -1 if rec.stop_step is None else rec.stop_step
    else:
        couplings: dict[int, CouplingMatrix] = {}
        for t in range(lo, hi):
            rec = _run_trial_generic(
                spec, e, config.policy, alpha, cap,
                trial_seed(config.base_seed, alpha_index, t), couplings,
            )
            taus[t - lo] = -1 if rec.stop_step is None else rec.stop_step
    return alpha_index, lo, taus


def estimate_stopping(config: ExperimentConfig, threads: int = 1) -> list[SweepRow]:
    """Monte Carlo stopping-time table, one row per alpha.

    Censored trials are counted at the horizon cap and reported in
    ``censored_count``.  The ratio column ``mean_tau / log(1/alpha)``
    converges to ``1 / jstar`` as alpha tends to zero.
    """
    threads = max(1, int(threads))
    tasks = []
    per_alpha_caps = []
    for ai, alpha in enumerate(config.alphas):
        per_alpha_caps.append(config.horizon_cap or default_horizon(config.spec, alpha))
        step = max(1, math.ceil(config.trials / max(1, threads)))
        for lo in range(0, config.trials, step):
            tasks.append((config, alpha, ai, lo, min(lo + step, config.trials)))
    results: dict[int, np.ndarray] = {
        ai: np.empty(config.trials, dtype=np.int64) for ai in range(len(config.alphas))
    }
    if threads == 1:
        outputs = map(_sweep_task, tasks)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(_sweep_task, tasks))
    for ai, lo, taus in outputs:
        results[ai][lo:lo + taus.size] = taus
    rows = []
    for ai, alpha in enumerate(config.alphas):
        taus = results[ai]
        censored = int(np.sum(taus < 0))
        filled = np.where(taus < 0, per_alpha_caps[ai], taus).astype(np.float64)
        log_inv = math.log(1.0 / alpha)
        mean = float(filled.mean())
        std_err = float(filled.std(ddof=1) / math.sqrt(filled.size)) if filled.size > 1 else 0.0
        rows.append(
            SweepRow(
                alpha=alpha,
                log_inv_alpha=log_inv,
                mean_tau=mean,
                std_err=std_err,
                ratio=mean / log_inv,
                censored_count=censored,
            )
        )
    return rows


def calibrate_null(
    spec: NeighborhoodSpec,
    alpha: float,
    trials: int,
    horizon: int,
    q_null: VocabDistribution,
    rng: np.random.Generator,
    e: EValueTable | None = None,
) -> float:
    """Fraction of independent null streams whose wealth ever crosses.

    Outcomes are drawn from ``q_null`` and seeds independently from the
    anchor, which is exactly the null the score table must guard against;
    the returned rate must stay at or below alpha up to Monte Carlo noise.
    """
    if not (0.0 < alpha < 1.0):
        raise BadAlphaError(f"alpha must lie in (0, 1), got {alpha!r}")
    if trials < 1 or horizon < 1:
        raise BadParamsError("trials and horizon must be >= 1")
    if l1_distance(q_null, spec.anchor) > spec.delta + RECONSTRUCT_ATOL:
        raise OutsideNeighborhoodError("null target lies outside the neighborhood")
    table = e if e is not None else optimal_evalue(spec)
    with np.errstate(divide="ignore"):
        log_scores = np.log(table.scores)
    threshold = math.log(1.0 / alpha)
    cum_q = np.cumsum(q_null.weights)
    cum_p = np.cumsum(spec.anchor.weights)
    hits = 0
    block = max(1, min(trials, 4_000_000 // max(1, horizon)))
    done = 0
    while done < trials:
        b = min(block, trials - done)
        v = np.minimum(np.searchsorted(cum_q, rng.random((b, horizon)), side="right"), spec.n - 1)
        s = np.minimum(np.searchsorted(cum_p, rng.random((b, horizon)), side="right"), spec.n - 1)
        wealth = np.cumsum(log_scores[v, s], axis=1)
        hits += int(np.sum(wealth.max(axis=1) >= threshold))
        done += b
    return hits / trials


# -- CSV emission ---------------------------------------------------------------

def write_sweep_csv(fh, rows: list[SweepRow]) -> None:
    """Columns: alpha,log_inv_alpha,mean_tau,std_err,ratio,censored_count."""
    fh.write("alpha,log_inv_alpha,mean_tau,std_err,ratio,censored_count\n")
    for r in rows:
        fh.write(
            f"{r.alpha:.12g},{r.log_inv_alpha:.12g},{r.mean_tau:.12g},"
            f"{r.std_err:.12g},{r.ratio:.12g},{r.censored_count}\n"
        )


def write_calibration_csv(fh, rows) -> None:
    """Columns: alpha,trials,horizon,false_positives,rate."""
    fh.write("alpha,trials,horizon,false_positives,rate\n")
    for alpha, trials, horizon, fp, rate in rows:
        fh.write(f"{alpha:.12g},{trials},{horizon},{fp},{rate:.12g}\n")
