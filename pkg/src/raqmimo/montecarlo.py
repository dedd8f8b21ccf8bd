"""
Deterministic trial orchestration.

Trial ``i`` draws from ``Philox4x64`` keyed by ``(master_seed, i)`` with a zero
counter, so its stream does not depend on chunking, worker count or on which
other trials ran. Moments are accumulated per chunk and merged in chunk order;
chunk boundaries are fixed by the plan, which makes the result bit-identical
for any number of workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameterError, TrialError

_MASK64 = (1 << 64) - 1


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    key = np.array([master_seed & _MASK64, trial & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class TrialPlan:
    master_seed: int
    trials: int
    chunking: int = 1000

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        if self.chunking < 1:
            raise InvalidParameterError("chunking must be >= 1")

    def chunks(self) -> list[range]:
        return [range(s, min(s + self.chunking, self.trials)) for s in range(0, self.trials, self.chunking)]


class RunningStats:
    """Count, mean vector and co-moment matrix of a stream of real vectors.

    ``push`` is Welford's update; ``merge`` is the pairwise combination of Chan
    et al., so partial results from independent chunks can be combined.
    """

    __slots__ = ("count", "mean", "comoment")

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self.comoment = np.zeros((dim, dim))

    @classmethod
    def from_samples(cls, X) -> "RunningStats":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = cls(X.shape[1])
        out.count = X.shape[0]
        out.mean = X.mean(axis=0)
        dev = X - out.mean
        out.comoment = dev.T @ dev
        return out

    def push(self, x) -> None:
        x = np.asarray(x, dtype=float)
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.comoment = self.comoment + np.outer(delta, x - self.mean)

    def merge(self, other: "RunningStats") -> "RunningStats":
        out = RunningStats(len(self.mean))
        n = self.count + other.count
        if n == 0:
            return out
        delta = other.mean - self.mean
        out.count = n
        out.mean = self.mean + delta * (other.count / n)
        out.comoment = self.comoment + other.comoment + np.outer(delta, delta) * (self.count * other.count / n)
        return out

    @property
    def covariance(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.comoment)
        return self.comoment / (self.count - 1)

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.covariance).copy()

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.variance / max(self.count, 1))

    def mean_covariance(self) -> np.ndarray:
        """Covariance of the sample mean, used for delta-method propagation."""
        return self.covariance / max(self.count, 1)


Evaluator = Callable[..., np.ndarray]


def _run_chunk(cfg, plan: TrialPlan, evaluator: Evaluator, idx: range, batched: bool) -> RunningStats:
    if batched:
        try:
            X = np.asarray(evaluator(cfg, [trial_rng(plan.master_seed, i) for i in idx]), dtype=float)
        except Exception as exc:
            # replay trial by trial on fresh streams to name the culprit
            for i in idx:
                try:
                    evaluator(cfg, [trial_rng(plan.master_seed, i)])
                except Exception as inner:
                    raise TrialError(i, inner) from inner
            raise TrialError(idx.start, exc) from exc
        if X.shape[0] != len(idx):
            raise ValueError(f"batched evaluator returned {X.shape[0]} rows for {len(idx)} trials")
    else:
        rows = []
        for i in idx:
            try:
                rows.append(np.atleast_1d(np.asarray(evaluator(cfg, trial_rng(plan.master_seed, i)), dtype=float)))
            except Exception as exc:
                raise TrialError(i, exc) from exc
        X = np.stack(rows)
    return RunningStats.from_samples(X)


def run_trials(
    cfg,
    plan: TrialPlan,
    evaluator: Evaluator,
    *,
    batched: bool = False,
    workers: Optional[int] = 1,
) -> RunningStats:
    """Evaluate ``plan.trials`` independent trials and aggregate their moments.

    ``evaluator(cfg, rng)`` returns a 1-D array of tracked scalars. With
    ``batched=True`` it is called as ``evaluator(cfg, rngs)`` for a whole chunk
    and must return one row per generator.
    """
    chunks = plan.chunks()
    if workers is None or workers <= 1:
        parts = [_run_chunk(cfg, plan, evaluator, c, batched) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _run_chunk(cfg, plan, evaluator, c, batched), chunks))
    total = parts[0]
    for part in parts[1:]:
        total = total.merge(part)
    return total
