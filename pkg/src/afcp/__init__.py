"""Adaptively fair conformal prediction for classification and outlier detection."""

from .conformal import PredictionSet, batch_rank_pvalues, classify_pvalues, outlier_pvalue, set_from_pvalues
from .data import Attribute, AttributeSpec, Dataset, GroupKey, InputError, phi, restrict_by_group, split_train_calib
from .harness import ExperimentConfig, MetricTable, run_classification, run_outlier
from .models import MlpConfig, external_scores, fit_oneclass, fit_softmax_mlp
from .scores import ScoreTensor, aps_conformity, score_tensor
from .sets import (
    AfcpOutput,
    CalibrationPool,
    afcp_classify,
    afcp_label_conditional,
    afcp_outlier,
    afcp_plus_classify,
    exhaustive_set,
    marginal_set,
    partial_outlier_pvalue,
    partial_set,
)
from .synth import MedicalSynthConfig, OutlierSynthConfig, gen_medical, gen_outlier

__version__ = "0.1.0"
