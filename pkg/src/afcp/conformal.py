"""Split-conformal p-values and prediction sets for fixed protected attributes.

All p-values use the conformity orientation

    u = (1 + #{i in I : S_i <= S_test}) / (1 + |I|)

so plausible labels (or inlier-looking points) receive large values.  An empty
calibration subset gives ``u = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import GroupKey, phi


@dataclass
class OpCounter:
    """Tallies score comparisons performed by the batch routines."""

    comparisons: int = 0

    def add(self, count: float) -> None:
        self.comparisons += int(count)


def sort_cost(n: int) -> int:
    return n * max(1, math.ceil(math.log2(n))) if n > 1 else n


@dataclass(frozen=True)
class PValueVector:
    values: np.ndarray
    n_calib: int


@dataclass(frozen=True)
class PredictionSet:
    labels: frozenset[int]
    provenance: tuple = ("marginal",)

    def __contains__(self, y) -> bool:
        return y in self.labels

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_mask(cls, mask, provenance=("marginal",)) -> "PredictionSet":
        return cls(frozenset(int(y) for y in np.flatnonzero(mask)), provenance)


def conformal_pvalues(calib_scores, test_scores, counter: OpCounter | None = None) -> np.ndarray:
    """Vectorized p-values of every entry of ``test_scores`` against one pool."""
    cal = np.sort(np.asarray(calib_scores, dtype=float).ravel())
    test = np.asarray(test_scores, dtype=float)
    n = cal.size
    if counter is not None:
        counter.add(sort_cost(n) + test.size * max(1, math.ceil(math.log2(n + 1))))
    counts = np.searchsorted(cal, test, side="right")
    return (1 + counts) / (1 + n)


def classify_pvalues(calib_scores, calib_attrs, test_scores, protected: Sequence[int], test_attrs) -> PValueVector:
    """Per-label p-values for one test point.

    ``calib_scores`` holds each calibration record's score at its own label;
    ``test_scores`` is the length-L vector of test conformity scores.
    """
    key = phi(test_attrs, protected)
    members = np.ones(len(calib_scores), dtype=bool)
    attrs = np.asarray(calib_attrs)
    for k, v in zip(key.subset, key.values):
        members &= attrs[:, k] == v
    pool = np.asarray(calib_scores, dtype=float)[members]
    return PValueVector(conformal_pvalues(pool, test_scores), int(pool.size))


def set_from_pvalues(p: PValueVector | np.ndarray, alpha: float, provenance=("marginal",)) -> PredictionSet:
    values = p.values if isinstance(p, PValueVector) else np.asarray(p)
    return PredictionSet.from_mask(values >= alpha, provenance)


def outlier_pvalue(calib_scores, calib_attrs, test_score: float, protected: Sequence[int], test_attrs) -> float:
    pv = classify_pvalues(calib_scores, calib_attrs, np.array([test_score]), protected, test_attrs)
    return float(pv.values[0])


@dataclass(frozen=True)
class BatchPValues:
    """Leave-one-out p-values of an augmented pool, for many probes at once.

    ``calib[t, j]`` is the p-value of calibration point ``j`` when probe ``t``
    joins the pool and ``j`` is held out; ``probe[t]`` is the probe's own.
    """

    ranks: np.ndarray  # (n,) count of calibration scores <= S_j
    calib: np.ndarray  # (m, n)
    probe: np.ndarray  # (m,)


def batch_rank_pvalues(calib_scores, probe_scores, counter: OpCounter | None = None) -> BatchPValues:
    cal = np.asarray(calib_scores, dtype=float).ravel()
    probe = np.asarray(probe_scores, dtype=float).ravel()
    n, m = cal.size, probe.size
    order = np.sort(cal)
    ranks = np.searchsorted(order, cal, side="right")
    probe_ranks = np.searchsorted(order, probe, side="right")
    hits = probe[:, None] <= cal[None, :]
    if counter is not None:
        counter.add(2 * sort_cost(n) + m * max(1, math.ceil(math.log2(n + 1))) + n * m)
    calib_p = (ranks[None, :] + hits) / (1 + n)
    probe_p = (probe_ranks + 1) / (1 + n)
    return BatchPValues(ranks, calib_p, probe_p)


class GroupCalibrator:
    """Caches sorted calibration scores per group key for repeated lookups."""

    def __init__(self, calib_scores, calib_attrs):
        self.scores = np.asarray(calib_scores, dtype=float)
        self.attrs = np.asarray(calib_attrs, dtype=np.int64)
        self._cache: dict[GroupKey, np.ndarray] = {}

    def pool(self, key: GroupKey) -> np.ndarray:
        pool = self._cache.get(key)
        if pool is None:
            members = np.ones(self.scores.shape[0], dtype=bool)
            for k, v in zip(key.subset, key.values):
                members &= self.attrs[:, k] == v
            pool = np.sort(self.scores[members])
            self._cache[key] = pool
        return pool

    def pvalues(self, key: GroupKey, test_scores) -> np.ndarray:
        pool = self.pool(key)
        counts = np.searchsorted(pool, np.asarray(test_scores, dtype=float), side="right")
        return (1 + counts) / (1 + pool.size)

    def batch(self, subset: Sequence[int], test_scores: np.ndarray, test_attrs: np.ndarray) -> np.ndarray:
        """p-values for many test rows, each calibrated on its own group under ``subset``."""
        subset = tuple(sorted(int(k) for k in subset))
        test_scores = np.asarray(test_scores, dtype=float)
        out = np.empty(test_scores.shape)
        if not subset:
            out[...] = self.pvalues(GroupKey(), test_scores)
            return out
        keys = np.asarray(test_attrs)[:, list(subset)]
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        for g, values in enumerate(uniq):
            rows = inverse == g
            out[rows] = self.pvalues(GroupKey(subset, tuple(int(v) for v in values)), test_scores[rows])
        return out
