"""Reproducibly parallel Monte Carlo engine for softmax-UCB episodes.

Episodes are simulated exactly (warm-up pull of every arm, then T softmax-UCB
decisions with Gaussian rewards) and reduced on the fly into a regret
histogram plus, optionally, per-(arm, time) moment accumulators conditioned on
regret windows.  Nothing is ever stored per episode: memory stays
O(bins + K * T * windows) no matter how many trials run.

Reproducibility contract: results are a pure function of
(spec, trials, master_seed, bin_width, windows).  Episodes are partitioned
into fixed-size chunks; each chunk draws from its own counter-based Philox
substream keyed by (master_seed, chunk index), and partial results are merged
in chunk order.  Worker count only decides who computes which chunk, so it
never changes a single output bit.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import BanditSpec, softmax

__all__ = [
    "CHUNK_EPISODES",
    "Trajectory",
    "RegretHistogram",
    "ConditionedStats",
    "substream",
    "run_episode",
    "run_ensemble",
    "empirical_action",
    "conditioned_trajectory_stats",
    "iter_chunk_arrays",
    "default_workers",
]

CHUNK_EPISODES = 16_384  # reproducibility unit; fixed, never worker-dependent

WORKERS_ENV = "UCBREGRET_WORKERS"


def default_workers() -> int:
    """Worker count: UCBREGRET_WORKERS if set, else available parallelism."""
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def substream(master_seed: int, index: int) -> np.random.Generator:
    """Independent counter-based substream for one episode or chunk."""
    return np.random.Generator(np.random.Philox(key=[master_seed, index]))


# ----------------------------------------------------------------------------
# Result containers.
# ----------------------------------------------------------------------------


@dataclass
class Trajectory:
    """One realized episode.

    n and s have shape (K, T+1) with n[:, 0] = 1 and s[:, 0] equal to the
    warm-up rewards; actions holds the 0-based arm pulled at each decision
    step 1..T and step_rewards the reward it paid.  regret is defined as
    (T+K) * mu_star - total_reward, so the regret identity holds exactly as
    constructed.
    """

    actions: np.ndarray
    warmup_rewards: np.ndarray
    step_rewards: np.ndarray
    n: np.ndarray
    s: np.ndarray
    regret: float
    total_reward: float


@dataclass
class RegretHistogram:
    """Sparse fixed-width histogram of episode regrets.

    Bin i covers [origin + i*bin_width, origin + (i+1)*bin_width); counts maps
    bin index to count.  With explicit limits, out-of-range regrets land in
    underflow/overflow, so counts + underflow + overflow always equals trials.
    Histograms with identical (bin_width, origin, limits) merge by exact
    integer addition, in any order.
    """

    bin_width: float = 0.5
    origin: float = 0.0
    limits: tuple[float, float] | None = None
    counts: dict[int, int] = field(default_factory=dict)
    trials: int = 0
    underflow: int = 0
    overflow: int = 0

    def add(self, regrets: np.ndarray) -> None:
        r = np.asarray(regrets, dtype=float).ravel()
        self.trials += r.size
        if self.limits is not None:
            lo, hi = self.limits
            self.underflow += int(np.sum(r < lo))
            self.overflow += int(np.sum(r >= hi))
            r = r[(r >= lo) & (r < hi)]
        idx = np.floor((r - self.origin) / self.bin_width).astype(np.int64)
        vals, cnts = np.unique(idx, return_counts=True)
        for v, c in zip(vals.tolist(), cnts.tolist()):
            self.counts[v] = self.counts.get(v, 0) + c

    def merge(self, other: "RegretHistogram") -> "RegretHistogram":
        if (self.bin_width, self.origin, self.limits) != (
            other.bin_width, other.origin, other.limits,
        ):
            raise ValueError("histograms must share bin_width, origin and limits")
        out = RegretHistogram(
            bin_width=self.bin_width, origin=self.origin, limits=self.limits,
            counts=dict(self.counts), trials=self.trials + other.trials,
            underflow=self.underflow + other.underflow,
            overflow=self.overflow + other.overflow,
        )
        for k, c in other.counts.items():
            out.counts[k] = out.counts.get(k, 0) + c
        return out

    def bin_center(self, index: int) -> float:
        return self.origin + (index + 0.5) * self.bin_width

    def items(self) -> list[tuple[float, int]]:
        """(bin center, count) for non-empty bins, ascending in r."""
        return [(self.bin_center(i), self.counts[i]) for i in sorted(self.counts)]


@dataclass
class ConditionedStats:
    """Per-(arm, time) moments of n and of the running mean s/n, conditioned
    on the episode regret landing in window = [r_lo, r_hi).

    Arrays have shape (K, T+1); std is the population standard deviation over
    matched episodes (the error bar convention used throughout).  empty is set
    when no episode matched; the arrays are then NaN.
    """

    window: tuple[float, float]
    matched: int
    n_mean: np.ndarray
    n_std: np.ndarray
    muhat_mean: np.ndarray
    muhat_std: np.ndarray
    empty: bool


class _Moments:
    """Streaming (count, mean, M2) accumulator merged in fixed order."""

    def __init__(self, shape):
        self.count = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def add_batch(self, count, mean, m2):
        if count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = count, mean.copy(), m2.copy()
            return
        total = self.count + count
        delta = mean - self.mean
        self.mean = self.mean + delta * (count / total)
        self.m2 = self.m2 + m2 + delta**2 * (self.count * count / total)
        self.count = total

    def std(self):
        return np.sqrt(self.m2 / self.count)


# ----------------------------------------------------------------------------
# Episode simulation.
# ----------------------------------------------------------------------------


def run_episode(spec: BanditSpec, stream: np.random.Generator) -> Trajectory:
    """Simulate one episode on a freshly positioned substream."""
    K, T = spec.K, spec.T
    sdev = np.sqrt(spec.gamma) * spec.sigma_tilde
    x0 = spec.mu + sdev * stream.standard_normal(K)
    n = np.empty((K, T + 1))
    s = np.empty((K, T + 1))
    n[:, 0] = 1.0
    s[:, 0] = x0
    actions = np.empty(T, dtype=np.int64)
    step_rewards = np.empty(T)
    for t in range(1, T + 1):
        logits = spec.beta * (
            s[:, t - 1] / n[:, t - 1]
            + spec.c * np.sqrt(np.log(K + t - 1) / n[:, t - 1])
        )
        cdf = np.cumsum(softmax(logits))
        cdf[-1] = 1.0
        a = int(np.sum(stream.random() >= cdf))
        x = spec.mu[a] + sdev[a] * float(stream.standard_normal())
        n[:, t] = n[:, t - 1]
        s[:, t] = s[:, t - 1]
        n[a, t] += 1.0
        s[a, t] += x
        actions[t - 1] = a
        step_rewards[t - 1] = x
    total = float(np.sum(s[:, T]))
    return Trajectory(
        actions=actions, warmup_rewards=x0, step_rewards=step_rewards,
        n=n, s=s, regret=(T + K) * spec.mu_star - total, total_reward=total,
    )


def _simulate_chunk(spec: BanditSpec, count: int, rng: np.random.Generator,
                    record: bool):
    """Vectorized simulation of one chunk of episodes.

    Returns (regrets, n_hist, muhat_hist); the histories are None unless
    ``record``.  The draw sequence per chunk is fixed: (count, K) warm-up
    normals, then per decision step count uniforms followed by count normals.
    """
    K, T = spec.K, spec.T
    m = count
    sdev = np.sqrt(spec.gamma) * spec.sigma_tilde
    s = spec.mu + sdev * rng.standard_normal((m, K))
    n = np.ones((m, K))
    if record:
        n_hist = np.empty((m, K, T + 1))
        mu_hist = np.empty((m, K, T + 1))
        n_hist[:, :, 0] = n
        mu_hist[:, :, 0] = s
    rows = np.arange(m)
    for t in range(1, T + 1):
        logits = spec.beta * (s / n + spec.c * np.sqrt(np.log(K + t - 1) / n))
        cdf = np.cumsum(softmax(logits), axis=1)
        cdf[:, -1] = 1.0
        a = np.sum(rng.random(m)[:, None] >= cdf, axis=1)
        x = spec.mu[a] + sdev[a] * rng.standard_normal(m)
        n[rows, a] += 1.0
        s[rows, a] += x
        if record:
            n_hist[:, :, t] = n
            mu_hist[:, :, t] = s / n
    regrets = (T + K) * spec.mu_star - s.sum(axis=1)
    return regrets, (n_hist if record else None), (mu_hist if record else None)


def _chunk_partial(spec: BanditSpec, count: int, master_seed: int,
                   chunk_index: int, windows, bin_width, origin, limits):
    """One chunk's histogram counts and per-window raw moments."""
    rng = substream(master_seed, chunk_index)
    regrets, n_hist, mu_hist = _simulate_chunk(spec, count, rng, bool(windows))
    hist = RegretHistogram(bin_width=bin_width, origin=origin, limits=limits)
    hist.add(regrets)
    window_parts = []
    for lo, hi in windows:
        mask = (regrets >= lo) & (regrets < hi)
        k = int(np.sum(mask))
        if k == 0:
            window_parts.append((0, None, None, None, None))
            continue
        sub_n = n_hist[mask]
        sub_mu = mu_hist[mask]
        mean_n = sub_n.mean(axis=0)
        mean_mu = sub_mu.mean(axis=0)
        window_parts.append((
            k,
            mean_n, ((sub_n - mean_n) ** 2).sum(axis=0),
            mean_mu, ((sub_mu - mean_mu) ** 2).sum(axis=0),
        ))
    return hist, window_parts


def _chunk_plan(trials: int) -> list[int]:
    """Episode count per chunk; all chunks full except possibly the last."""
    n_chunks = math.ceil(trials / CHUNK_EPISODES)
    plan = [CHUNK_EPISODES] * n_chunks
    plan[-1] = trials - CHUNK_EPISODES * (n_chunks - 1)
    return plan


def _worker_task(args):
    spec, plan_slice, first_index, master_seed, windows, bw, origin, limits = args
    return [
        _chunk_partial(spec, count, master_seed, first_index + i,
                       windows, bw, origin, limits)
        for i, count in enumerate(plan_slice)
    ]


def run_ensemble(
    spec: BanditSpec,
    trials: int,
    master_seed: int,
    bin_width: float = 0.5,
    windows: list[tuple[float, float]] | None = None,
    origin: float = 0.0,
    limits: tuple[float, float] | None = None,
    workers: int | None = None,
) -> tuple[RegretHistogram, list[ConditionedStats]]:
    """Simulate ``trials`` episodes; return the regret histogram and, for each
    window, conditioned per-(arm, time) statistics.

    Bit-identical for fixed (spec, trials, master_seed, bin_width, windows)
    regardless of ``workers``.  A window matching zero episodes yields stats
    flagged empty, never an exception.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    windows = [(float(lo), float(hi)) for lo, hi in (windows or [])]
    for lo, hi in windows:
        if not lo < hi:
            raise ValueError(f"window [{lo}, {hi}) is empty")
    plan = _chunk_plan(int(trials))
    workers = default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, len(plan))

    if workers == 1:
        partials = _worker_task(
            (spec, plan, 0, master_seed, windows, bin_width, origin, limits)
        )
    else:
        per = math.ceil(len(plan) / workers)
        tasks = [
            (spec, plan[i : i + per], i, master_seed, windows,
             bin_width, origin, limits)
            for i in range(0, len(plan), per)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partials = [p for batch in pool.map(_worker_task, tasks) for p in batch]

    # merge strictly in chunk order so grouping can never change the result
    hist = RegretHistogram(bin_width=bin_width, origin=origin, limits=limits)
    accum_n = [_Moments((spec.K, spec.T + 1)) for _ in windows]
    accum_mu = [_Moments((spec.K, spec.T + 1)) for _ in windows]
    for chunk_hist, window_parts in partials:
        hist = hist.merge(chunk_hist)
        for w, (k, mean_n, m2_n, mean_mu, m2_mu) in enumerate(window_parts):
            if k:
                accum_n[w].add_batch(k, mean_n, m2_n)
                accum_mu[w].add_batch(k, mean_mu, m2_mu)

    stats = []
    for w, window in enumerate(windows):
        matched = accum_n[w].count
        if matched == 0:
            nan = np.full((spec.K, spec.T + 1), np.nan)
            stats.append(ConditionedStats(window, 0, nan, nan.copy(),
                                          nan.copy(), nan.copy(), True))
        else:
            stats.append(ConditionedStats(
                window, matched,
                accum_n[w].mean, accum_n[w].std(),
                accum_mu[w].mean, accum_mu[w].std(), False,
            ))
    return hist, stats


def iter_chunk_arrays(spec: BanditSpec, trials: int, master_seed: int):
    """Yield (regrets, n_hist, muhat_hist) per chunk of the same ensemble that
    :func:`run_ensemble` reduces; intended for custom streaming reductions."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    for i, count in enumerate(_chunk_plan(int(trials))):
        yield _simulate_chunk(spec, count, substream(master_seed, i), True)


def empirical_action(hist: RegretHistogram):
    """Empirical action curve: minus log of the regret density, shifted so its
    minimum is exactly zero.

    Returns (bin centers, values) over non-empty bins only; normalization
    constants cancel in the shift, so counts are used directly.
    """
    if hist.trials < 1 or not hist.counts:
        raise ValueError("histogram is empty")
    centers, counts = zip(*hist.items())
    counts = np.asarray(counts, dtype=float)
    phi = np.log(counts.max()) - np.log(counts)
    return np.asarray(centers), phi


def conditioned_trajectory_stats(
    spec: BanditSpec,
    trials: int,
    master_seed: int,
    window: tuple[float, float],
    workers: int | None = None,
) -> ConditionedStats:
    """Per-(arm, time) statistics over episodes with regret in ``window``."""
    _, stats = run_ensemble(
        spec, trials, master_seed, windows=[window], workers=workers
    )
    return stats[0]
