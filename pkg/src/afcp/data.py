"""Encoded tabular records and sensitive-attribute bookkeeping.

Attribute levels are always dense integer codes; raw strings live only in the
``level_names`` carried by :class:`Attribute` for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class InputError(ValueError):
    """Raised for malformed user input (bad indices, shapes, files)."""


@dataclass(frozen=True)
class Attribute:
    name: str
    levels: int
    column: int = -1
    level_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.levels < 1:
            raise InputError(f"attribute {self.name!r} needs at least one level")
        if self.level_names and len(self.level_names) != self.levels:
            raise InputError(
                f"attribute {self.name!r}: {len(self.level_names)} names for {self.levels} levels"
            )

    def level_name(self, code: int) -> str:
        if self.level_names:
            return self.level_names[code]
        return str(code)


@dataclass(frozen=True)
class AttributeSpec:
    attributes: tuple[Attribute, ...] = ()

    @property
    def K(self) -> int:
        return len(self.attributes)

    @property
    def level_counts(self) -> tuple[int, ...]:
        return tuple(a.levels for a in self.attributes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError(f"unknown attribute {name!r}") from None

    def check_subset(self, subset: Iterable[int]) -> tuple[int, ...]:
        out = tuple(sorted(set(int(k) for k in subset)))
        for k in out:
            if not 0 <= k < self.K:
                raise InputError(f"attribute index {k} out of range for K={self.K}")
        return out

    def subset_name(self, subset: Sequence[int]) -> str:
        if not subset:
            return "none"
        return "+".join(self.attributes[k].name for k in subset)


@dataclass(frozen=True)
class GroupKey:
    """Projected attribute values ``phi(x, A)`` for a subset ``A``.

    The empty subset maps every record to the same constant key (code 0 in the
    usual convention), so all empty keys compare equal.
    """

    subset: tuple[int, ...] = ()
    values: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.subset) != len(self.values):
            raise InputError("GroupKey subset and values differ in length")

    @property
    def is_marginal(self) -> bool:
        return not self.subset


def phi(record_attributes, subset: Iterable[int], spec: AttributeSpec | None = None) -> GroupKey:
    """Project one record's attribute vector onto ``subset``."""
    row = np.asarray(record_attributes, dtype=np.int64).ravel()
    idx = tuple(sorted(set(int(k) for k in subset)))
    for k in idx:
        if not 0 <= k < row.size:
            raise InputError(f"attribute index {k} out of range for {row.size} attributes")
    if spec is not None:
        if spec.K != row.size:
            raise InputError(f"record has {row.size} attributes, spec has {spec.K}")
        for k in idx:
            if not 0 <= row[k] < spec.attributes[k].levels:
                raise InputError(f"level {row[k]} out of range for attribute {spec.attributes[k].name!r}")
    return GroupKey(idx, tuple(int(row[k]) for k in idx))


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    attributes: np.ndarray
    spec: AttributeSpec
    labels: np.ndarray | None = None
    n_labels: int = 0
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim == 1:
            feats = feats.reshape(-1, 1)
        if feats.ndim != 2:
            raise InputError(f"features must be a matrix, got shape {feats.shape}")
        attrs = np.asarray(self.attributes, dtype=np.int64)
        n = feats.shape[0]
        if attrs.ndim == 1 and self.spec.K == 0:
            attrs = attrs.reshape(n, 0)
        if attrs.ndim != 2 or attrs.shape != (n, self.spec.K):
            raise InputError(f"attributes shape {attrs.shape} does not match ({n}, {self.spec.K})")
        for k, a in enumerate(self.spec.attributes):
            col = attrs[:, k]
            if col.size and (col.min() < 0 or col.max() >= a.levels):
                raise InputError(f"attribute {a.name!r} has codes outside [0, {a.levels})")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64).ravel()
            if labels.shape[0] != n:
                raise InputError(f"{labels.shape[0]} labels for {n} rows")
            if labels.size and (labels.min() < 0 or labels.max() >= self.n_labels):
                raise InputError(f"labels outside [0, {self.n_labels})")
        ids = np.arange(n, dtype=np.int64) if self.ids is None else np.asarray(self.ids, dtype=np.int64).ravel()
        if ids.shape[0] != n:
            raise InputError(f"{ids.shape[0]} ids for {n} rows")
        for name, arr in (("features", feats), ("attributes", attrs), ("labels", labels), ("ids", ids)):
            if arr is not None:
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def __len__(self) -> int:
        return self.n

    def take(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(
            features=self.features[index],
            attributes=self.attributes[index],
            spec=self.spec,
            labels=None if self.labels is None else self.labels[index],
            n_labels=self.n_labels,
            ids=self.ids[index],
        )

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.features, self.attributes, self.spec, labels, self.n_labels, self.ids)

    def equals(self, other: "Dataset") -> bool:
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None and other.labels is not None and np.array_equal(self.labels, other.labels)
        )
        return (
            self.spec == other.spec
            and self.n_labels == other.n_labels
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.attributes, other.attributes)
            and np.array_equal(self.ids, other.ids)
            and same_labels
        )


def group_mask(attributes: np.ndarray, key: GroupKey) -> np.ndarray:
    attributes = np.asarray(attributes)
    mask = np.ones(attributes.shape[0], dtype=bool)
    for k, v in zip(key.subset, key.values):
        mask &= attributes[:, k] == v
    return mask


def restrict_by_group(data: Dataset, key: GroupKey) -> np.ndarray:
    """Indices ``i`` with ``phi(attrs_i, key.subset) == key``."""
    data.spec.check_subset(key.subset)
    return np.flatnonzero(group_mask(data.attributes, key))


def split_train_calib(data: Dataset, train_fraction: float = 0.5, seed: int = 0) -> tuple[Dataset, Dataset]:
    if data.n < 2:
        raise InputError("need at least two rows to split")
    if not 0 < train_fraction < 1:
        raise InputError("train_fraction must lie strictly between 0 and 1")
    n_train = int(np.floor(data.n * train_fraction))
    perm = np.random.default_rng(seed).permutation(data.n)
    return data.take(np.sort(perm[:n_train])), data.take(np.sort(perm[n_train:]))
