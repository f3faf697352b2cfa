import math
import random

import numpy as np
import pytest

from afcp.data import InputError
from afcp.harness import (
    CSV_HEADER,
    ExperimentConfig,
    MetricTable,
    Preprocess,
    aggregate,
    rep_seeds,
    run_classification,
    run_experiment,
    run_outlier,
    run_rep,
    selection_frequency,
)
from afcp.models import MlpConfig
from afcp.synth import MedicalSynthConfig, gen_medical

FAST = MlpConfig(hidden_layers=(16, 16), learning_rate=1e-2, epochs=30)


def small(**kw):
    base = dict(methods=("marginal", "partial", "afcp"), sample_sizes=(200,), n_test=100, n_reps=3, model=FAST, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_defaults_follow_kind():
    assert ExperimentConfig().n_reps == 100
    assert ExperimentConfig(kind="outlier", methods=("marginal",)).n_reps == 30
    with pytest.raises(InputError):
        ExperimentConfig(methods=("afcp_lc", "nope"))
    with pytest.raises(InputError):
        ExperimentConfig(kind="outlier", methods=("afcp_plus",))
    with pytest.raises(InputError):
        ExperimentConfig(n_reps=0)


def test_single_rep_has_nan_se():
    table = run_classification(small(n_reps=1))
    assert all(math.isnan(r[6]) for r in table.rows)
    assert "nan" in table.to_csv()


def test_csv_and_markdown_layout():
    table = run_classification(small(n_test=3, n_reps=2))
    lines = table.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    # some Region or AgeGroup level has no test occurrence with only 3 points
    nulls = [r for r in table.rows if r[5] is None]
    assert nulls
    assert any(line.split(",")[5] == "" for line in lines[1:])
    assert "null" in table.to_markdown()


def test_rerun_is_identical():
    a = run_classification(small()).to_csv()
    b = run_classification(small()).to_csv()
    assert a == b
    assert run_classification(small(seed=4)).to_csv() != a


def test_worker_count_does_not_matter():
    cfg = small(n_reps=2)
    assert run_experiment(cfg, jobs=1).to_csv() == run_experiment(cfg, jobs=2).to_csv()


def test_aggregation_order_independent():
    cfg = small(n_reps=4)
    reps = [run_rep(cfg, 0, r) for r in range(4)]
    shuffled = reps[:]
    random.Random(0).shuffle(shuffled)
    assert aggregate(cfg, [reps]).to_csv() == aggregate(cfg, [shuffled]).to_csv()
    assert aggregate(cfg, [reps]).rows == aggregate(cfg, [reps[::-1]]).rows


def test_selection_frequencies_sum_to_one():
    table = run_classification(small(methods=("afcp", "afcp1", "afcp_plus", "afcp_lc")))
    for m in ("afcp", "afcp1", "afcp_plus", "afcp_lc"):
        freqs = table.frequencies(m, 200)
        assert "none" in freqs
        assert sum(freqs.values()) == pytest.approx(1.0)
    rows = selection_frequency("afcp", 10, [{"none": 0.5, "Color": 0.5}, {"Color": 1.0}])
    assert [r[3] for r in rows] == ["none", "Color"]
    assert rows[1][5] == 0.75


def test_marginal_coverage_valid():
    table = run_classification(small(n_reps=8, n_test=300, sample_sizes=(400,)))
    cov = table.value("marginal", 400, "overall", "overall", "coverage")
    se = table.se("marginal", 400, "overall", "overall", "coverage")
    assert cov >= 0.9 - 3 * se


def test_outlier_run_reports_both_rates():
    cfg = ExperimentConfig(kind="outlier", methods=("marginal", "afcp"), sample_sizes=(200,), n_test=100, n_reps=2,
                           model=FAST, seed=1)
    table = run_outlier(cfg)
    assert table.value("marginal", 200, "overall", "overall", "fpr") is not None
    assert table.value("afcp", 200, "Color", "Grey", "tpr") is not None
    assert table.to_csv() == run_outlier(cfg).to_csv()
    with pytest.raises(InputError):
        run_classification(cfg)


def test_seed_streams_are_distinct():
    a, b = rep_seeds(0, 0, 0), rep_seeds(0, 0, 1)
    assert a != b and rep_seeds(0, 1, 0) != a
    assert rep_seeds(0, 0, 0) == a


def test_dataset_pool_and_preprocessing():
    pool = gen_medical(MedicalSynthConfig(800, blue_prob=0.3, seed=9))
    steps = (Preprocess("label_noise", 0, 0, width=2.0), Preprocess("downsample", 0, 0, keep_fraction=0.5))
    cfg = small(pool=pool, preprocessing=steps, sample_sizes=(300,), n_test=100, n_reps=2)
    table = run_classification(cfg)
    assert table.value("afcp", 300, "overall", "overall", "size") > 0
    with pytest.raises(InputError):
        small(pool=pool, sample_sizes=(2000,))
    with pytest.raises(InputError):
        Preprocess("shuffle", 0, 0).apply(pool, 0)


def test_metric_table_lookup_errors():
    with pytest.raises(KeyError):
        MetricTable().value("x", 1, "a", "b", "c")
