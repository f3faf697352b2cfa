"""Leave-one-out sensitive-attribute selection.

For a placeholder label the test point joins the calibration pool, every
member of the augmented pool is held out once, and the held-out miscoverage
(classification) or false-positive (outlier detection) indicators are
aggregated per attribute level.  The attribute whose worst level looks worst
is selected when a one-sided t-test says its rate exceeds ``alpha``.

The batch path evaluates many test points at once: calibration ranks are
computed once per pool, and the calibration membership of every
(attribute, level) group is built once and reused for all probes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .conformal import OpCounter, batch_rank_pvalues

DEFAULT_TEST_LEVEL = 0.05


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    df: int
    rejected: bool
    mean: float


def _t_decision(s: np.ndarray, c: np.ndarray, alpha: float, test_level: float):
    """Vectorized upper-tail one-sample t-test for binary samples.

    ``s`` successes out of ``c`` draws.  Samples of size < 2 are never
    rejected; zero-variance samples are rejected iff their mean exceeds alpha.
    """
    s = np.asarray(s, dtype=float)
    c = np.asarray(c, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = s / c
        var = (s - c * mean * mean) / (c - 1)
        var = np.where(var < 0, 0.0, var)
        sd = np.sqrt(var)
        tstat = (mean - alpha) / (sd / np.sqrt(c))
    df = np.maximum(c - 1, 0)
    crit = stats.t.ppf(1 - test_level, np.maximum(df, 1))
    degenerate = sd == 0
    rejected = np.where(degenerate, mean > alpha, tstat > crit)
    rejected &= c >= 2
    tstat = np.where(c >= 2, tstat, np.nan)
    return tstat, df.astype(np.int64), rejected, mean


def significance_test(e_worst, alpha: float, test_level: float = DEFAULT_TEST_LEVEL) -> TTestResult:
    e = np.asarray(e_worst, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("significance test needs a non-empty sample")
    t, df, rej, mean = _t_decision(e.sum(), e.size, alpha, test_level)
    return TTestResult(float(t), int(df), bool(rej), float(mean))


def loo_miscoverage(calib_scores, test_score: float, alpha: float, inclusive: bool = False) -> np.ndarray:
    """Held-out indicators for the augmented pool, test point last.

    With ``inclusive=False`` (classification) ``E = 1{u < alpha}``, i.e. the
    held-out label misses its set; with ``inclusive=True`` (outlier detection)
    ``E = 1{u <= alpha}``, i.e. the held-out inlier is flagged.
    """
    bp = batch_rank_pvalues(calib_scores, [test_score])
    p = np.concatenate([bp.calib[0], bp.probe])
    return (p <= alpha if inclusive else p < alpha).astype(np.int64)


def worst_group_rates(E, attrs, level_counts: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Worst per-level indicator rate of each attribute, and the level attaining it."""
    E = np.asarray(E, dtype=float)
    attrs = np.asarray(attrs, dtype=np.int64).reshape(E.size, len(level_counts))
    delta = np.zeros(len(level_counts))
    arg = np.zeros(len(level_counts), dtype=np.int64)
    for k, mk in enumerate(level_counts):
        sums = np.bincount(attrs[:, k], weights=E, minlength=mk)
        counts = np.bincount(attrs[:, k], minlength=mk)
        with np.errstate(divide="ignore", invalid="ignore"):
            rates = np.where(counts > 0, sums / counts, -np.inf)
        arg[k] = int(np.argmax(rates))
        delta[k] = rates[arg[k]]
    return delta, arg


@dataclass(frozen=True)
class SelectionBatch:
    """Selections for ``m`` probes under one placeholder configuration."""

    subsets: list[tuple[int, ...]]
    delta: np.ndarray  # (m, K) worst-level rate per attribute, first pass
    qhat: np.ndarray  # (m,)
    worst: np.ndarray  # (m, 2) attribute and level of the first-pass argmax
    tstat: np.ndarray  # (m,) first pass
    df: np.ndarray
    rejected: np.ndarray
    E_calib: np.ndarray | None = None
    E_probe: np.ndarray | None = None


class LooSelector:
    """Selection engine over one calibration pool.

    ``calib_scores`` are the pool's conformity scores (own labels for
    classification), ``calib_attrs`` its (n, K) attribute codes.
    """

    def __init__(self, calib_scores, calib_attrs, level_counts: Sequence[int], counter: OpCounter | None = None):
        self.scores = np.asarray(calib_scores, dtype=float).ravel()
        self.n = self.scores.size
        self.level_counts = tuple(int(m) for m in level_counts)
        self.K = len(self.level_counts)
        self.M = max(self.level_counts, default=1)
        self.attrs = np.asarray(calib_attrs, dtype=np.int64).reshape(self.n, self.K)
        self.counter = counter
        self.membership = self._onehot(self.attrs)
        self.group_sizes = self.membership.sum(axis=0)
        if counter is not None:
            counter.add(self.n * self.K)

    def _onehot(self, attrs: np.ndarray) -> np.ndarray:
        rows = attrs.shape[0]
        out = np.zeros((rows, self.K * self.M))
        if self.K:
            cols = attrs + (np.arange(self.K) * self.M)[None, :]
            out[np.repeat(np.arange(rows), self.K), cols.ravel()] = 1.0
        return out

    def indicators(self, probe_scores, alpha: float, inclusive: bool = False):
        bp = batch_rank_pvalues(self.scores, probe_scores, self.counter)
        if inclusive:
            return bp.calib <= alpha, bp.probe <= alpha
        return bp.calib < alpha, bp.probe < alpha

    def group_rates(self, E_calib: np.ndarray, E_probe: np.ndarray, probe_attrs: np.ndarray):
        """Per-probe (sums, counts) over every (attribute, level) cell, shape (m, K, M)."""
        m = E_probe.shape[0]
        probe_hot = self._onehot(np.asarray(probe_attrs, dtype=np.int64).reshape(m, self.K))
        sums = E_calib.astype(float) @ self.membership + probe_hot * E_probe[:, None]
        counts = self.group_sizes[None, :] + probe_hot
        if self.counter is not None:
            self.counter.add(self.K * self.n * m + m * self.K * self.M)
        shape = (m, self.K, self.M)
        return sums.reshape(shape), counts.reshape(shape)

    def select(
        self,
        probe_scores,
        probe_attrs,
        alpha: float,
        candidates: Iterable[int] | None = None,
        picks: int = 1,
        always_select: bool = False,
        test_level: float = DEFAULT_TEST_LEVEL,
        inclusive: bool = False,
        keep_indicators: bool = False,
    ) -> SelectionBatch:
        probe_scores = np.asarray(probe_scores, dtype=float).ravel()
        m = probe_scores.size
        E_calib, E_probe = self.indicators(probe_scores, alpha, inclusive)
        sums, counts = self.group_rates(E_calib, E_probe, probe_attrs)
        with np.errstate(divide="ignore", invalid="ignore"):
            rates = np.where(counts > 0, sums / counts, -np.inf)
        level_arg = np.argmax(rates, axis=2) if self.K else np.zeros((m, 0), dtype=np.int64)
        delta = np.take_along_axis(rates, level_arg[:, :, None], axis=2)[:, :, 0] if self.K else np.zeros((m, 0))

        available = np.zeros((m, self.K), dtype=bool)
        cand = list(range(self.K)) if candidates is None else sorted(set(int(k) for k in candidates))
        available[:, cand] = True
        chosen = [[] for _ in range(m)]
        active = np.ones(m, dtype=bool)
        first = None
        rows = np.arange(m)
        for _ in range(picks):
            masked = np.where(available, delta, -np.inf)
            has_cand = available.any(axis=1)
            k_star = np.argmax(masked, axis=1) if self.K else np.zeros(m, dtype=np.int64)
            if self.K:
                lvl = level_arg[rows, k_star]
                s = sums[rows, k_star, lvl]
                c = counts[rows, k_star, lvl]
                qhat = masked[rows, k_star]
            else:
                lvl = np.zeros(m, dtype=np.int64)
                s = c = np.zeros(m)
                qhat = np.full(m, -np.inf)
            tstat, df, rejected, _ = _t_decision(s, c, alpha, test_level)
            take = active & has_cand & (True if always_select else rejected)
            if first is None:
                first = (qhat, np.column_stack([k_star, lvl]), tstat, df, rejected & has_cand)
            for t in np.flatnonzero(take):
                chosen[t].append(int(k_star[t]))
                available[t, k_star[t]] = False
            active &= take
            if not active.any():
                break
        qhat, worst, tstat, df, rejected = first
        return SelectionBatch(
            subsets=[tuple(sorted(c)) for c in chosen],
            delta=delta,
            qhat=np.where(np.isfinite(qhat), qhat, 0.0),
            worst=worst,
            tstat=tstat,
            df=df,
            rejected=rejected,
            E_calib=E_calib if keep_indicators else None,
            E_probe=E_probe if keep_indicators else None,
        )


def select_final(per_placeholder: Mapping[int, Sequence[int]] | Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Intersection of the per-placeholder selections."""
    items = list(per_placeholder.values()) if isinstance(per_placeholder, Mapping) else list(per_placeholder)
    if not items:
        return ()
    out = set(items[0])
    for s in items[1:]:
        out &= set(s)
    return tuple(sorted(out))


def select_attribute(
    calib_scores,
    calib_attrs,
    level_counts: Sequence[int],
    test_score: float,
    test_attrs,
    alpha: float,
    always_select: bool = False,
    test_level: float = DEFAULT_TEST_LEVEL,
) -> tuple[tuple[int, ...], SelectionBatch]:
    """At most one attribute for a single test point and placeholder label.

    ``calib_scores`` are own-label scores; ``test_score`` is the test point's
    score at the placeholder label.
    """
    sel = LooSelector(calib_scores, calib_attrs, level_counts)
    out = sel.select([test_score], np.asarray(test_attrs).reshape(1, -1), alpha,
                     always_select=always_select, test_level=test_level)
    return out.subsets[0], out


def select_two_attributes(calib_scores, calib_attrs, level_counts, test_score, test_attrs, alpha,
                          test_level: float = DEFAULT_TEST_LEVEL) -> tuple[int, ...]:
    sel = LooSelector(calib_scores, calib_attrs, level_counts)
    out = sel.select([test_score], np.asarray(test_attrs).reshape(1, -1), alpha, picks=2, test_level=test_level)
    return out.subsets[0]


def select_attribute_od(calib_scores, calib_attrs, level_counts, test_score, test_attrs, alpha, J: int = 1,
                        test_level: float = DEFAULT_TEST_LEVEL) -> tuple[int, ...]:
    sel = LooSelector(calib_scores, calib_attrs, level_counts)
    out = sel.select([test_score], np.asarray(test_attrs).reshape(1, -1), alpha, picks=J,
                     test_level=test_level, inclusive=True)
    return out.subsets[0]
