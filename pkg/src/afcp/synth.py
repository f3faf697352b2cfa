"""Synthetic generators and dataset perturbations used in the experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Attribute, AttributeSpec, Dataset, GroupKey, InputError, group_mask

COLOR_LEVELS = ("Blue", "Grey")
AGE_LEVELS = ("<18", "18-24", "25-40", "41-65", ">65")
REGION_LEVELS = ("West", "East", "North", "South")
DIAGNOSES = ("Skin cancer", "Diabetes", "Asthma", "Stroke", "Flu", "Epilepsy")

BLUE, GREY = 0, 1

MEDICAL_SPEC = AttributeSpec(
    (
        Attribute("Color", 2, 0, COLOR_LEVELS),
        Attribute("AgeGroup", 5, 1, AGE_LEVELS),
        Attribute("Region", 4, 2, REGION_LEVELS),
    )
)


@dataclass(frozen=True)
class MedicalSynthConfig:
    n: int
    blue_prob: float = 0.1
    num_noise_features: int = 6
    seed: int = 0
    n_labels: int = 6

    def __post_init__(self):
        if not 0 <= self.blue_prob <= 1:
            raise InputError("blue_prob must lie in [0, 1]")
        if self.num_noise_features < 1:
            raise InputError("at least one noise feature is required")


@dataclass(frozen=True)
class OutlierSynthConfig:
    n: int
    blue_prob: float = 0.1
    num_noise_features: int = 6
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.blue_prob <= 1:
            raise InputError("blue_prob must lie in [0, 1]")


def _covariates(n: int, blue_prob: float, d: int, rng: np.random.Generator):
    color = np.where(rng.random(n) < blue_prob, BLUE, GREY)
    age = np.arange(n) % len(AGE_LEVELS)
    region = rng.integers(0, len(REGION_LEVELS), size=n)
    features = rng.random((n, d))
    return np.column_stack([color, age, region]).astype(np.int64), features


def medical_label_probs(color: np.ndarray, x1: np.ndarray) -> np.ndarray:
    """Row-wise P(Y | X) of the decision-tree model, shape (n, 6)."""
    color = np.asarray(color)
    x1 = np.asarray(x1, dtype=float)
    probs = np.zeros((color.size, 6))
    blue = color == BLUE
    low = x1 < 0.5
    probs[blue & low, 0:3] = 1 / 3
    probs[blue & ~low, 3:6] = 1 / 3
    grey_bin = np.minimum(np.floor(x1 * 6).astype(np.int64), 5)
    grey = np.flatnonzero(~blue)
    probs[grey, grey_bin[grey]] = 1.0
    return probs


def gen_medical(cfg: MedicalSynthConfig) -> Dataset:
    if cfg.n < 1:
        raise InputError("n must be positive")
    rng = np.random.default_rng(cfg.seed)
    attrs, features = _covariates(cfg.n, cfg.blue_prob, cfg.num_noise_features, rng)
    x1 = features[:, 0]
    blue = attrs[:, 0] == BLUE
    # Blue rows: uniform within the half selected by x1; Grey rows: the x1 sixth.
    within = rng.integers(0, 3, size=cfg.n)
    blue_label = np.where(x1 < 0.5, 0, 3) + within
    grey_label = np.minimum(np.floor(x1 * 6).astype(np.int64), 5)
    labels = np.where(blue, blue_label, grey_label)
    return Dataset(features, attrs, MEDICAL_SPEC, labels, 6)


def gen_outlier(cfg: OutlierSynthConfig) -> Dataset:
    """Binary data where label 1 marks an outlier.

    Blue rows are outliers with probability 1/2 regardless of the features.
    Grey rows are deterministic given the features: the outlier flag is
    ``x1 >= 0.5``, so each Grey row lands on either side with equal chance.
    """
    if cfg.n < 1:
        raise InputError("n must be positive")
    rng = np.random.default_rng(cfg.seed)
    attrs, features = _covariates(cfg.n, cfg.blue_prob, cfg.num_noise_features, rng)
    coin = rng.random(cfg.n) < 0.5
    grey_flag = features[:, 0] >= 0.5
    labels = np.where(attrs[:, 0] == BLUE, coin, grey_flag).astype(np.int64)
    return Dataset(features, attrs, MEDICAL_SPEC, labels, 2)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def inject_label_noise(data: Dataset, group: GroupKey, noise_width: float, seed: int = 0) -> Dataset:
    """Perturb labels inside ``group`` with centred uniform noise, then round and clamp."""
    if data.labels is None:
        raise InputError("dataset has no labels")
    if noise_width < 0:
        raise InputError("noise_width must be non-negative")
    data.spec.check_subset(group.subset)
    if noise_width == 0:
        return data
    mask = group_mask(data.attributes, group)
    rng = np.random.default_rng(seed)
    draws = rng.uniform(-noise_width / 2, noise_width / 2, size=data.n)
    noisy = _round_half_away(data.labels + draws)
    noisy = np.clip(noisy, 0, data.n_labels - 1).astype(np.int64)
    return data.with_labels(np.where(mask, noisy, data.labels))


def downsample_group(data: Dataset, group: GroupKey, keep_fraction: float, seed: int = 0) -> Dataset:
    """Keep ``ceil(keep_fraction * m)`` random rows of the group and every other row."""
    if not 0 <= keep_fraction <= 1:
        raise InputError("keep_fraction must lie in [0, 1]")
    data.spec.check_subset(group.subset)
    mask = group_mask(data.attributes, group)
    members = np.flatnonzero(mask)
    # tolerance guards products like 0.1 * 30 = 3.0000000000000004
    n_keep = min(members.size, math.ceil(keep_fraction * members.size - 1e-9))
    kept = np.random.default_rng(seed).choice(members, size=n_keep, replace=False)
    keep = ~mask
    keep[kept] = True
    return data.take(np.flatnonzero(keep))
