"""Prediction sets and outlier p-values: benchmarks and adaptive variants.

Everything is evaluated for a batch of ``m`` test rows at once against one
calibration pool.  Classification results are boolean masks of shape (m, L);
outlier results are p-value vectors of shape (m,) and a row is flagged as
an outlier when its p-value is ``<= alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .conformal import GroupCalibrator, OpCounter, PredictionSet, conformal_pvalues
from .data import AttributeSpec, Dataset, InputError
from .scores import ScoreTensor
from .selection import DEFAULT_TEST_LEVEL, LooSelector, select_final


@dataclass(frozen=True, eq=False)
class CalibrationPool:
    """Calibration scores with their attributes.

    For classification ``scores`` holds each record's conformity at its own
    label; for outlier detection it holds the inlier conformity scores.
    """

    scores: np.ndarray
    attributes: np.ndarray
    level_counts: tuple[int, ...]
    labels: np.ndarray | None = None
    n_labels: int = 0

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float).ravel()
        K = len(self.level_counts)
        attrs = np.asarray(self.attributes, dtype=np.int64).reshape(scores.size, K)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "level_counts", tuple(int(m) for m in self.level_counts))
        if self.labels is not None:
            object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64).ravel())

    @property
    def n(self) -> int:
        return self.scores.size

    @property
    def K(self) -> int:
        return len(self.level_counts)

    def take(self, index) -> "CalibrationPool":
        labels = None if self.labels is None else self.labels[index]
        return CalibrationPool(self.scores[index], self.attributes[index], self.level_counts, labels, self.n_labels)

    @classmethod
    def from_tensor(cls, tensor: ScoreTensor, data: Dataset) -> "CalibrationPool":
        if data.labels is None:
            raise InputError("calibration data needs labels")
        own = tensor.values[np.arange(data.n), data.labels] if data.n else np.zeros(0)
        return cls(own, data.attributes, data.spec.level_counts, data.labels, tensor.values.shape[1])

    @classmethod
    def from_inlier_scores(cls, scores, data: Dataset) -> "CalibrationPool":
        return cls(np.asarray(scores, dtype=float), data.attributes, data.spec.level_counts)


@dataclass(frozen=True)
class AfcpOutput:
    set: PredictionSet | None
    pvalue: float | None
    selected: tuple[int, ...]
    per_placeholder: dict = field(default_factory=dict)
    components: tuple = ()


@dataclass(frozen=True, eq=False)
class SetBatch:
    """Batch classification result.

    ``components[t]`` lists ``(provenance, label set)`` pairs whose union is
    row ``t``'s set.
    """

    mask: np.ndarray  # (m, L) bool
    selected: list[tuple[int, ...]]
    per_placeholder: list[dict[int, tuple[int, ...]]]
    components: list[list[tuple[tuple, frozenset]]]

    def output(self, t: int) -> AfcpOutput:
        comps = tuple(self.components[t])
        prov = tuple(p for p, _ in comps)
        return AfcpOutput(PredictionSet.from_mask(self.mask[t], prov), None, self.selected[t],
                          dict(self.per_placeholder[t]), comps)


@dataclass(frozen=True, eq=False)
class PValueBatch:
    pvalues: np.ndarray  # (m,)
    selected: list[tuple[int, ...]]

    def output(self, t: int) -> AfcpOutput:
        return AfcpOutput(None, float(self.pvalues[t]), self.selected[t])

    def flagged(self, alpha: float) -> np.ndarray:
        return self.pvalues <= alpha


def _prepare(pool: CalibrationPool, test_scores, test_attrs, classification: bool = True):
    scores = np.asarray(test_scores, dtype=float)
    if classification:
        scores = scores.reshape(-1, scores.shape[-1]) if scores.ndim else scores.reshape(1, 1)
    else:
        scores = scores.ravel()
    attrs = np.asarray(test_attrs, dtype=np.int64).reshape(scores.shape[0], pool.K)
    return scores, attrs


def _mask_set(row: np.ndarray) -> frozenset:
    return frozenset(int(y) for y in np.flatnonzero(row))


def _subset_masks(cal: GroupCalibrator, subsets: Sequence[tuple[int, ...]], scores: np.ndarray,
                  attrs: np.ndarray, alpha: float) -> np.ndarray:
    """Set mask of every row, each calibrated on its own group under its own subset."""
    out = np.zeros(scores.shape, dtype=bool)
    by_subset: dict[tuple[int, ...], list[int]] = {}
    for t, s in enumerate(subsets):
        by_subset.setdefault(tuple(s), []).append(t)
    for s, rows in by_subset.items():
        rows = np.asarray(rows)
        out[rows] = cal.batch(s, scores[rows], attrs[rows]) >= alpha
    return out


# ---------------------------------------------------------------- classification


def marginal_sets(pool: CalibrationPool, test_scores, alpha: float) -> np.ndarray:
    scores = np.asarray(test_scores, dtype=float)
    return conformal_pvalues(pool.scores, scores) >= alpha


def marginal_lc_sets(pool: CalibrationPool, test_scores, alpha: float) -> np.ndarray:
    """Label ``y`` is kept when its p-value against the class-``y`` calibration rows clears ``alpha``."""
    if pool.labels is None:
        raise InputError("label-conditional sets need calibration labels")
    scores = np.asarray(test_scores, dtype=float)
    mask = np.zeros(scores.shape, dtype=bool)
    for y in range(scores.shape[1]):
        mask[:, y] = conformal_pvalues(pool.scores[pool.labels == y], scores[:, y]) >= alpha
    return mask


def fixed_sets(pool: CalibrationPool, test_scores, test_attrs, subset: Sequence[int], alpha: float,
               cal: GroupCalibrator | None = None) -> np.ndarray:
    scores, attrs = _prepare(pool, test_scores, test_attrs)
    cal = cal or GroupCalibrator(pool.scores, pool.attributes)
    return cal.batch(tuple(subset), scores, attrs) >= alpha


def exhaustive_sets(pool: CalibrationPool, test_scores, test_attrs, alpha: float) -> np.ndarray:
    return fixed_sets(pool, test_scores, test_attrs, range(pool.K), alpha)


def partial_sets(pool: CalibrationPool, test_scores, test_attrs, alpha: float) -> np.ndarray:
    scores, attrs = _prepare(pool, test_scores, test_attrs)
    if pool.K == 0:
        return marginal_sets(pool, scores, alpha)
    cal = GroupCalibrator(pool.scores, pool.attributes)
    out = np.zeros(scores.shape, dtype=bool)
    for k in range(pool.K):
        out |= cal.batch((k,), scores, attrs) >= alpha
    return out


def _placeholder_selection(pool: CalibrationPool, scores: np.ndarray, attrs: np.ndarray, alpha: float,
                           picks: int, always_select: bool, test_level: float,
                           counter: OpCounter | None) -> list[list[tuple[int, ...]]]:
    """``sel[y][t]`` is the subset selected for row ``t`` under placeholder ``y``."""
    selector = LooSelector(pool.scores, pool.attributes, pool.level_counts, counter)
    return [
        selector.select(scores[:, y], attrs, alpha, picks=picks, always_select=always_select,
                        test_level=test_level).subsets
        for y in range(scores.shape[1])
    ]


def afcp_sets(pool: CalibrationPool, test_scores, test_attrs, alpha: float, always_select: bool = False,
              test_level: float = DEFAULT_TEST_LEVEL, counter: OpCounter | None = None) -> SetBatch:
    """Adaptive sets with at most one selected attribute per placeholder.

    ``always_select=True`` skips the significance test and keeps the argmax
    attribute (the AFCP1 variant).
    """
    return _adaptive(pool, test_scores, test_attrs, alpha, 1, always_select, test_level, counter)


def afcp_plus_sets(pool: CalibrationPool, test_scores, test_attrs, alpha: float,
                   test_level: float = DEFAULT_TEST_LEVEL, counter: OpCounter | None = None) -> SetBatch:
    """Up to two attributes per placeholder, plus single-attribute sets of every pick."""
    return _adaptive(pool, test_scores, test_attrs, alpha, 2, False, test_level, counter)


def _adaptive(pool, test_scores, test_attrs, alpha, picks, always_select, test_level, counter) -> SetBatch:
    scores, attrs = _prepare(pool, test_scores, test_attrs)
    m, L = scores.shape
    cal = GroupCalibrator(pool.scores, pool.attributes)
    marginal = cal.batch((), scores, attrs) >= alpha
    mask = marginal.copy()
    components = [[(("marginal",), _mask_set(marginal[t]))] for t in range(m)]
    sel = _placeholder_selection(pool, scores, attrs, alpha, picks, always_select, test_level, counter)
    for y in range(L):
        group = _subset_masks(cal, sel[y], scores, attrs, alpha)
        mask |= group
        for t in range(m):
            if sel[y][t]:
                components[t].append((("group", y, sel[y][t]), _mask_set(group[t])))
    if picks > 1:
        singles = sorted({k for y in range(L) for t in range(m) for k in sel[y][t]})
        for k in singles:
            rows = np.asarray([t for t in range(m) if any(k in sel[y][t] for y in range(L))])
            single = cal.batch((k,), scores[rows], attrs[rows]) >= alpha
            mask[rows] |= single
            for r, t in enumerate(rows):
                components[t].append((("single", k), _mask_set(single[r])))
    per_placeholder = [{y: sel[y][t] for y in range(L)} for t in range(m)]
    selected = [select_final([sel[y][t] for y in range(L)]) for t in range(m)]
    return SetBatch(mask, selected, per_placeholder, components)


def afcp_label_conditional_sets(pool: CalibrationPool, test_scores, test_attrs, alpha: float,
                                test_level: float = DEFAULT_TEST_LEVEL) -> SetBatch:
    """Label-conditional adaptive sets.

    Label ``y`` enters row ``t``'s set if its p-value on the class-``y``
    calibration rows clears ``alpha``, or if its p-value on the class-``y``
    rows sharing the test row's group under ``A(x, y)`` does.  Selection for
    placeholder ``y`` runs on the class-``y`` rows only.
    """
    if pool.labels is None:
        raise InputError("label-conditional sets need calibration labels")
    scores, attrs = _prepare(pool, test_scores, test_attrs)
    m, L = scores.shape
    mask = np.zeros((m, L), dtype=bool)
    components = [[] for _ in range(m)]
    sel_by_label = []
    for y in range(L):
        sub = pool.take(np.flatnonzero(pool.labels == y))
        cal = GroupCalibrator(sub.scores, sub.attributes)
        base = cal.batch((), scores[:, y], attrs) >= alpha
        picks = LooSelector(sub.scores, sub.attributes, sub.level_counts).select(
            scores[:, y], attrs, alpha, test_level=test_level).subsets
        group = _subset_masks(cal, picks, scores[:, y : y + 1], attrs, alpha)[:, 0]
        mask[:, y] = base | group
        for t in range(m):
            components[t].append((("label", y), frozenset({y}) if base[t] else frozenset()))
            if picks[t]:
                components[t].append((("group", y, picks[t]), frozenset({y}) if group[t] else frozenset()))
        sel_by_label.append(picks)
    per_placeholder = [{y: sel_by_label[y][t] for y in range(L)} for t in range(m)]
    selected = [select_final([sel_by_label[y][t] for y in range(L)]) for t in range(m)]
    return SetBatch(mask, selected, per_placeholder, components)


# ------------------------------------------------------------ single test point


def _single(batch: SetBatch) -> AfcpOutput:
    return batch.output(0)


def _one(pool: CalibrationPool, test_scores, test_attrs):
    scores = np.asarray(test_scores, dtype=float).reshape(1, -1)
    return scores, np.asarray(test_attrs, dtype=np.int64).reshape(1, pool.K)


def marginal_set(pool: CalibrationPool, test_scores, alpha: float) -> PredictionSet:
    return PredictionSet.from_mask(marginal_sets(pool, np.asarray(test_scores, dtype=float).ravel(), alpha))


def exhaustive_set(pool: CalibrationPool, test_scores, test_attrs, alpha: float) -> PredictionSet:
    s, a = _one(pool, test_scores, test_attrs)
    return PredictionSet.from_mask(exhaustive_sets(pool, s, a, alpha)[0], ("exhaustive",))


def partial_set(pool: CalibrationPool, test_scores, test_attrs, alpha: float) -> PredictionSet:
    s, a = _one(pool, test_scores, test_attrs)
    return PredictionSet.from_mask(partial_sets(pool, s, a, alpha)[0], ("partial",))


def afcp_classify(pool: CalibrationPool, test_scores, test_attrs, alpha: float, always_select: bool = False,
                  test_level: float = DEFAULT_TEST_LEVEL) -> AfcpOutput:
    s, a = _one(pool, test_scores, test_attrs)
    return _single(afcp_sets(pool, s, a, alpha, always_select, test_level))


def afcp_plus_classify(pool: CalibrationPool, test_scores, test_attrs, alpha: float,
                       test_level: float = DEFAULT_TEST_LEVEL) -> AfcpOutput:
    s, a = _one(pool, test_scores, test_attrs)
    return _single(afcp_plus_sets(pool, s, a, alpha, test_level))


def afcp_label_conditional(pool: CalibrationPool, test_scores, test_attrs, alpha: float,
                           test_level: float = DEFAULT_TEST_LEVEL) -> AfcpOutput:
    s, a = _one(pool, test_scores, test_attrs)
    return _single(afcp_label_conditional_sets(pool, s, a, alpha, test_level))


# ------------------------------------------------------------- outlier detection


def marginal_outlier_pvalues(pool: CalibrationPool, test_scores) -> np.ndarray:
    return conformal_pvalues(pool.scores, np.asarray(test_scores, dtype=float).ravel())


def exhaustive_outlier_pvalues(pool: CalibrationPool, test_scores, test_attrs) -> np.ndarray:
    scores, attrs = _prepare(pool, test_scores, test_attrs, classification=False)
    return GroupCalibrator(pool.scores, pool.attributes).batch(tuple(range(pool.K)), scores, attrs)


def partial_outlier_pvalues(pool: CalibrationPool, test_scores, test_attrs) -> np.ndarray:
    scores, attrs = _prepare(pool, test_scores, test_attrs, classification=False)
    if pool.K == 0:
        return marginal_outlier_pvalues(pool, scores)
    cal = GroupCalibrator(pool.scores, pool.attributes)
    return np.max([cal.batch((k,), scores, attrs) for k in range(pool.K)], axis=0)


def afcp_outlier_pvalues(pool: CalibrationPool, test_scores, test_attrs, alpha: float, J: int = 1,
                         always_select: bool = False, test_level: float = DEFAULT_TEST_LEVEL,
                         counter: OpCounter | None = None) -> PValueBatch:
    scores, attrs = _prepare(pool, test_scores, test_attrs, classification=False)
    selector = LooSelector(pool.scores, pool.attributes, pool.level_counts, counter)
    picks = selector.select(scores, attrs, alpha, picks=J, always_select=always_select,
                            test_level=test_level, inclusive=True).subsets
    cal = GroupCalibrator(pool.scores, pool.attributes)
    p = np.empty(scores.size)
    by_subset: dict[tuple[int, ...], list[int]] = {}
    for t, s in enumerate(picks):
        by_subset.setdefault(s, []).append(t)
    for s, rows in by_subset.items():
        rows = np.asarray(rows)
        p[rows] = cal.batch(s, scores[rows], attrs[rows])
    return PValueBatch(p, picks)


def partial_outlier_pvalue(pool: CalibrationPool, test_score: float, test_attrs) -> float:
    return float(partial_outlier_pvalues(pool, [test_score], np.asarray(test_attrs).reshape(1, -1))[0])


def afcp_outlier(pool: CalibrationPool, test_score: float, test_attrs, alpha: float, J: int = 1,
                 test_level: float = DEFAULT_TEST_LEVEL) -> AfcpOutput:
    out = afcp_outlier_pvalues(pool, [test_score], np.asarray(test_attrs).reshape(1, -1), alpha, J,
                               test_level=test_level)
    return out.output(0)


def attribute_names(spec: AttributeSpec, subset: Sequence[int]) -> list[str]:
    return [spec.attributes[k].name for k in subset]
