"""Adaptive (APS-style) conformity scores with explicit randomization.

Scores are oriented as *conformity*: larger means the label is more plausible.
Each record gets one uniform draw ``u`` shared by all of its candidate labels.
The draw is a counter-based hash of ``(seed, record id)``, so it follows the
record through splits and permutations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, InputError

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
    z = x
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
    return z ^ (z >> np.uint64(31))


def record_uniforms(ids, seed: int) -> np.ndarray:
    """Uniform [0, 1) draw per record id, a pure function of ``(seed, id)``."""
    ids = np.asarray(ids, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        key = _splitmix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
        bits = _splitmix64(ids ^ key)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _check_simplex(pi: np.ndarray, tol: float = 1e-6) -> None:
    if np.any(pi < -tol) or np.any(np.abs(pi.sum(axis=-1) - 1) > tol):
        raise InputError("probabilities must form a simplex")


def aps_conformity(pi, y: int, u: float) -> float:
    """``1 - (mass strictly above pi_y + u * mass tied with pi_y)``."""
    pi = np.asarray(pi, dtype=float)
    _check_simplex(pi)
    if not 0 <= y < pi.size:
        raise InputError(f"label {y} out of range for {pi.size} classes")
    above = pi[pi > pi[y]].sum()
    tied = pi[pi == pi[y]].sum()
    return float(min(1.0, max(0.0, 1.0 - (above + u * tied))))


def aps_scores(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized :func:`aps_conformity` for every (row, label) pair."""
    probs = np.asarray(probs, dtype=float)
    u = np.asarray(u, dtype=float).reshape(-1, 1)
    _check_simplex(probs)
    # cmp[j, y, y'] compares pi_{y'} against pi_y for row j
    other = probs[:, None, :]
    own = probs[:, :, None]
    above = np.where(other > own, other, 0.0).sum(axis=2)
    tied = np.where(other == own, other, 0.0).sum(axis=2)
    return np.clip(1.0 - (above + u * tied), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class ScoreTensor:
    values: np.ndarray  # (m, L) conformity of each candidate label
    u: np.ndarray  # (m,) per-record randomization

    @property
    def rand_draws(self) -> np.ndarray:
        return np.broadcast_to(self.u[:, None], self.values.shape)


def score_tensor(model, data: Dataset, seed: int = 0, randomize: bool = True) -> ScoreTensor:
    probs = model.predict_proba(data)
    u = record_uniforms(data.ids, seed) if randomize else np.ones(data.n)
    return ScoreTensor(aps_scores(probs, u), u)
