"""Monte Carlo experiment runner.

Each repetition draws a fresh pool of ``n + n_test`` records, applies the
configured preprocessing, holds out ``n_test`` test rows, splits the rest into
training and calibration halves, fits the model and evaluates every requested
method.  Repetitions use independent RNG substreams derived from the master
seed and the (sample size, repetition) index, so results do not depend on the
number of worker processes.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import AttributeSpec, Dataset, GroupKey, InputError, split_train_calib
from .models import MlpConfig, fit_oneclass, fit_softmax_mlp
from .scores import score_tensor
from .selection import DEFAULT_TEST_LEVEL
from .sets import (
    CalibrationPool,
    afcp_label_conditional_sets,
    afcp_outlier_pvalues,
    afcp_plus_sets,
    afcp_sets,
    exhaustive_outlier_pvalues,
    exhaustive_sets,
    marginal_lc_sets,
    marginal_outlier_pvalues,
    marginal_sets,
    partial_outlier_pvalues,
    partial_sets,
)
from .synth import (
    MEDICAL_SPEC,
    MedicalSynthConfig,
    OutlierSynthConfig,
    downsample_group,
    gen_medical,
    gen_outlier,
    inject_label_noise,
)

CLASSIFY_METHODS = ("marginal", "exhaustive", "partial", "afcp", "afcp1", "afcp_plus", "marginal_lc", "afcp_lc")
OUTLIER_METHODS = ("marginal", "exhaustive", "partial", "afcp", "afcp1")
ADAPTIVE = ("afcp", "afcp1", "afcp_plus", "afcp_lc")

# Widths and step size that train the built-in network to a useful accuracy
# within the default 100 full-batch epochs on the synthetic tasks.
EXPERIMENT_MLP = MlpConfig(hidden_layers=(32, 32, 32, 32), learning_rate=1e-2, epochs=100)
EXPERIMENT_ONECLASS = MlpConfig(hidden_layers=(32, 32), learning_rate=1e-2, epochs=100)

OVERALL = "overall"
CSV_HEADER = ("method", "sample_size", "attribute", "level", "metric", "value", "se")


@dataclass(frozen=True)
class Preprocess:
    """One perturbation applied to each repetition's pool.

    ``op`` is ``"label_noise"`` (uses ``width``) or ``"downsample"`` (uses
    ``keep_fraction``); the affected group is ``attribute == level``.
    """

    op: str
    attribute: int
    level: int
    width: float = 2.0
    keep_fraction: float = 1.0

    def apply(self, data: Dataset, seed: int) -> Dataset:
        key = GroupKey((self.attribute,), (self.level,))
        if self.op == "label_noise":
            return inject_label_noise(data, key, self.width, seed)
        if self.op == "downsample":
            return downsample_group(data, key, self.keep_fraction, seed)
        raise InputError(f"unknown preprocessing step {self.op!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "classify"
    methods: tuple[str, ...] = ("marginal", "exhaustive", "partial", "afcp")
    sample_sizes: tuple[int, ...] = (200, 2000)
    n_test: int = 500
    n_reps: int | None = None  # 100 for classification, 30 for outlier detection
    alpha: float = 0.1
    blue_prob: float = 0.1
    train_fraction: float = 0.5
    model: MlpConfig | None = None
    test_level: float = DEFAULT_TEST_LEVEL
    max_picks: int = 1
    seed: int = 0
    preprocessing: tuple[Preprocess, ...] = ()
    pool: Dataset | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("classify", "outlier"):
            raise InputError(f"unknown experiment kind {self.kind!r}")
        allowed = CLASSIFY_METHODS if self.kind == "classify" else OUTLIER_METHODS
        bad = [m for m in self.methods if m not in allowed]
        if bad or not self.methods:
            raise InputError(f"unsupported methods for {self.kind}: {bad or 'none given'}")
        if self.n_reps is None:
            object.__setattr__(self, "n_reps", 100 if self.kind == "classify" else 30)
        if self.model is None:
            object.__setattr__(self, "model", EXPERIMENT_MLP if self.kind == "classify" else EXPERIMENT_ONECLASS)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "preprocessing", tuple(self.preprocessing))
        if self.n_reps < 1 or self.n_test < 1:
            raise InputError("n_reps and n_test must be positive")
        if not 0 < self.alpha < 1:
            raise InputError("alpha must lie in (0, 1)")
        if any(n < 4 for n in self.sample_sizes) or not self.sample_sizes:
            raise InputError("sample sizes must be at least 4")
        if self.pool is not None:
            need = max(self.sample_sizes) + self.n_test
            if self.pool.n < need:
                raise InputError(f"dataset has {self.pool.n} rows, experiment needs {need}")
            if self.pool.labels is None:
                raise InputError("dataset needs labels")

    @property
    def spec(self) -> AttributeSpec:
        return self.pool.spec if self.pool is not None else MEDICAL_SPEC


@dataclass
class MetricTable:
    rows: list[tuple] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_HEADER) + "\n")
        for r in self.rows:
            buf.write(",".join(_csv_cell(v) for v in r) + "\n")
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = ["| " + " | ".join(CSV_HEADER) + " |", "|" + "---|" * len(CSV_HEADER)]
        for r in self.rows:
            lines.append("| " + " | ".join(_md_cell(v) for v in r) + " |")
        return "\n".join(lines) + "\n"

    def value(self, method: str, sample_size: int, attribute: str, level: str, metric: str) -> float | None:
        for r in self.rows:
            if r[:5] == (method, sample_size, attribute, level, metric):
                return r[5]
        raise KeyError((method, sample_size, attribute, level, metric))

    def se(self, method: str, sample_size: int, attribute: str, level: str, metric: str) -> float:
        for r in self.rows:
            if r[:5] == (method, sample_size, attribute, level, metric):
                return r[6]
        raise KeyError((method, sample_size, attribute, level, metric))

    def frequencies(self, method: str, sample_size: int) -> dict[str, float]:
        return {
            r[3]: r[5]
            for r in self.rows
            if r[0] == method and r[1] == sample_size and r[2] == "selected" and r[4] == "frequency"
        }


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else _fmt(v)
    return str(v)


def _md_cell(v) -> str:
    if v is None:
        return "null"
    return _csv_cell(v)


# ---------------------------------------------------------------- one repetition


def rep_seeds(seed: int, size_index: int, rep: int) -> dict[str, int]:
    state = np.random.SeedSequence(seed, spawn_key=(size_index, rep)).generate_state(5)
    return dict(zip(("data", "split", "model", "score", "prep"), (int(s) for s in state)))


def _draw_pool(cfg: ExperimentConfig, n: int, seeds: dict[str, int]) -> Dataset:
    total = n + cfg.n_test
    if cfg.pool is not None:
        rng = np.random.default_rng(seeds["data"])
        data = cfg.pool.take(np.sort(rng.choice(cfg.pool.n, size=total, replace=False)))
    elif cfg.kind == "classify":
        data = gen_medical(MedicalSynthConfig(total, cfg.blue_prob, seed=seeds["data"]))
    else:
        data = gen_outlier(OutlierSynthConfig(total, cfg.blue_prob, seed=seeds["data"]))
    for j, step in enumerate(cfg.preprocessing):
        data = step.apply(data, seeds["prep"] + j)
    return data


def _hold_out(data: Dataset, n_test: int, seed: int) -> tuple[Dataset, Dataset]:
    perm = np.random.default_rng(seed).permutation(data.n)
    return data.take(np.sort(perm[n_test:])), data.take(np.sort(perm[:n_test]))


def _group_metrics(spec: AttributeSpec, attrs: np.ndarray, values: dict[str, np.ndarray],
                   rows: np.ndarray | None = None) -> dict[tuple[str, str, str], float | None]:
    """Means of each per-row metric overall and inside every attribute level."""
    rows = np.ones(attrs.shape[0], dtype=bool) if rows is None else rows
    out = {}
    for metric, v in values.items():
        out[(OVERALL, OVERALL, metric)] = float(v[rows].mean()) if rows.any() else None
    for k, a in enumerate(spec.attributes):
        for lvl in range(a.levels):
            sel = rows & (attrs[:, k] == lvl)
            for metric, v in values.items():
                out[(a.name, a.level_name(lvl), metric)] = float(v[sel].mean()) if sel.any() else None
    return out


def _selection_counts(spec: AttributeSpec, selected: Sequence[tuple[int, ...]]) -> dict[str, float]:
    names = [spec.subset_name(s) for s in selected]
    uniq = sorted(set(names))
    return {u: names.count(u) / len(names) for u in uniq}


def _classify_rep(cfg: ExperimentConfig, n: int, seeds: dict[str, int]):
    data = _draw_pool(cfg, n, seeds)
    rest, test = _hold_out(data, cfg.n_test, seeds["split"])
    train, calib = split_train_calib(rest, cfg.train_fraction, seeds["split"] + 1)
    model = fit_softmax_mlp(train, replace(cfg.model, seed=seeds["model"]))
    cal_tensor = score_tensor(model, calib, seeds["score"])
    test_tensor = score_tensor(model, test, seeds["score"])
    pool = CalibrationPool.from_tensor(cal_tensor, calib)
    scores, attrs = test_tensor.values, test.attributes
    a = cfg.alpha
    results, freqs = {}, {}
    for method in cfg.methods:
        selected = None
        if method == "marginal":
            mask = marginal_sets(pool, scores, a)
        elif method == "exhaustive":
            mask = exhaustive_sets(pool, scores, attrs, a)
        elif method == "partial":
            mask = partial_sets(pool, scores, attrs, a)
        elif method in ("afcp", "afcp1"):
            out = afcp_sets(pool, scores, attrs, a, always_select=method == "afcp1", test_level=cfg.test_level)
            mask, selected = out.mask, out.selected
        elif method == "afcp_plus":
            out = afcp_plus_sets(pool, scores, attrs, a, test_level=cfg.test_level)
            mask, selected = out.mask, out.selected
        elif method == "marginal_lc":
            mask = marginal_lc_sets(pool, scores, a)
        else:
            out = afcp_label_conditional_sets(pool, scores, attrs, a, test_level=cfg.test_level)
            mask, selected = out.mask, out.selected
        covered = mask[np.arange(test.n), test.labels].astype(float)
        size = mask.sum(axis=1).astype(float)
        results[method] = _group_metrics(test.spec, attrs, {"coverage": covered, "size": size})
        if selected is not None:
            freqs[method] = _selection_counts(test.spec, selected)
    return results, freqs


def _outlier_rep(cfg: ExperimentConfig, n: int, seeds: dict[str, int]):
    data = _draw_pool(cfg, n, seeds)
    rest, test = _hold_out(data, cfg.n_test, seeds["split"])
    train, calib = split_train_calib(rest, cfg.train_fraction, seeds["split"] + 1)
    calib = calib.take(np.flatnonzero(calib.labels == 0))
    model = fit_oneclass(train, replace(cfg.model, seed=seeds["model"]))
    pool = CalibrationPool.from_inlier_scores(model.score(calib), calib)
    scores, attrs = model.score(test), test.attributes
    a = cfg.alpha
    inlier = test.labels == 0
    results, freqs = {}, {}
    for method in cfg.methods:
        selected = None
        if method == "marginal":
            p = marginal_outlier_pvalues(pool, scores)
        elif method == "exhaustive":
            p = exhaustive_outlier_pvalues(pool, scores, attrs)
        elif method == "partial":
            p = partial_outlier_pvalues(pool, scores, attrs)
        else:
            out = afcp_outlier_pvalues(pool, scores, attrs, a, J=cfg.max_picks, always_select=method == "afcp1",
                                       test_level=cfg.test_level)
            p, selected = out.pvalues, out.selected
        flag = (p <= a).astype(float)
        fpr = _group_metrics(test.spec, attrs, {"fpr": flag}, inlier)
        tpr = _group_metrics(test.spec, attrs, {"tpr": flag}, ~inlier)
        results[method] = {**fpr, **tpr}
        if selected is not None:
            freqs[method] = _selection_counts(test.spec, selected)
    return results, freqs


def run_rep(cfg: ExperimentConfig, size_index: int, rep: int):
    seeds = rep_seeds(cfg.seed, size_index, rep)
    n = cfg.sample_sizes[size_index]
    if cfg.kind == "classify":
        return _classify_rep(cfg, n, seeds)
    return _outlier_rep(cfg, n, seeds)


def _run_task(args):
    return run_rep(*args)


# ------------------------------------------------------------------ aggregation


def _mean_se(values: Sequence[float]) -> tuple[float | None, float]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, float("nan")
    mean = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return mean, float("nan")
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var / len(vals))


def aggregate(cfg: ExperimentConfig, per_size: Sequence[Sequence[tuple[dict, dict]]]) -> MetricTable:
    """Combine per-repetition results; the result does not depend on repetition order."""
    table = MetricTable()
    for method in cfg.methods:
        for size_index, n in enumerate(cfg.sample_sizes):
            reps = per_size[size_index]
            keys = list(reps[0][0][method].keys())
            for key in keys:
                mean, se = _mean_se([r[0][method][key] for r in reps])
                table.rows.append((method, n, *key, mean, se))
            if method in ADAPTIVE:
                table.rows.extend(selection_frequency(method, n, [r[1].get(method, {}) for r in reps]))
    return table


def selection_frequency(method: str, n: int, per_rep: Sequence[dict[str, float]]) -> list[tuple]:
    """Average over repetitions of the fraction of test points selecting each subset."""
    names = sorted(set().union(*per_rep) | {"none"}, key=lambda s: (s != "none", s.count("+"), s))
    rows = []
    for name in names:
        mean, se = _mean_se([f.get(name, 0.0) for f in per_rep])
        rows.append((method, n, "selected", name, "frequency", mean, se))
    return rows


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> MetricTable:
    tasks = [(cfg, i, r) for i in range(len(cfg.sample_sizes)) for r in range(cfg.n_reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    per_size = [results[i * cfg.n_reps:(i + 1) * cfg.n_reps] for i in range(len(cfg.sample_sizes))]
    return aggregate(cfg, per_size)


def run_classification(cfg: ExperimentConfig, jobs: int = 1) -> MetricTable:
    if cfg.kind != "classify":
        raise InputError("configuration is not a classification experiment")
    return run_experiment(cfg, jobs)


def run_outlier(cfg: ExperimentConfig, jobs: int = 1) -> MetricTable:
    if cfg.kind != "outlier":
        raise InputError("configuration is not an outlier-detection experiment")
    return run_experiment(cfg, jobs)
