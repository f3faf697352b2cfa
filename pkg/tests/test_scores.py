import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from afcp.data import AttributeSpec, Dataset, InputError
from afcp.models import external_scores
from afcp.scores import aps_conformity, aps_scores, record_uniforms, score_tensor
from oracles import naive_aps


def test_formula_examples():
    pi = (0.6, 0.3, 0.1)
    assert aps_conformity(pi, 1, 0.0) == pytest.approx(0.4)
    assert aps_conformity(pi, 0, 1.0) == pytest.approx(0.4)
    for y in range(4):
        assert aps_conformity((0.25,) * 4, y, 0.5) == pytest.approx(0.5)


def test_invalid_simplex():
    with pytest.raises(InputError):
        aps_conformity((0.5, 0.6), 0, 0.1)
    with pytest.raises(InputError):
        aps_conformity((0.5, 0.5), 2, 0.1)


def test_tensor_from_replayed_probabilities():
    data = Dataset(np.zeros((1, 1)), np.zeros((1, 0)), AttributeSpec())
    t = score_tensor(external_scores([[1, 0, 0]]), data, seed=3)
    u = t.u[0]
    assert 0 <= u < 1
    np.testing.assert_allclose(t.values[0], [1 - u, 0, 0])
    assert t.rand_draws.shape == (1, 3)
    again = score_tensor(external_scores([[1, 0, 0]]), data, seed=3)
    np.testing.assert_array_equal(t.values, again.values)


def test_deterministic_mode():
    data = Dataset(np.zeros((2, 1)), np.zeros((2, 0)), AttributeSpec())
    t = score_tensor(external_scores([[0.7, 0.3], [0.5, 0.5]]), data, randomize=False)
    np.testing.assert_allclose(t.values, [[0.3, 0.0], [0.0, 0.0]], atol=1e-12)


def test_row_permutation(rng):
    P = rng.dirichlet(np.ones(4), size=30)
    data = Dataset(np.zeros((30, 1)), np.zeros((30, 0)), AttributeSpec())
    perm = rng.permutation(30)
    base = score_tensor(external_scores(P), data, seed=1)
    shuffled = score_tensor(external_scores(P), data.take(perm), seed=1)
    np.testing.assert_array_equal(shuffled.values, base.values[perm])


def test_uniform_draws_keyed_by_id():
    ids = np.arange(1000)
    u = record_uniforms(ids, 5)
    np.testing.assert_array_equal(record_uniforms(ids[::-1], 5), u[::-1])
    assert np.all((u >= 0) & (u < 1))
    assert not np.array_equal(u, record_uniforms(ids, 6))


def test_score_uniformity_ks():
    pi = np.array([0.5, 0.2, 0.15, 0.1, 0.05])
    n = 100_000
    y = np.random.default_rng(0).choice(5, size=n, p=pi)
    u = record_uniforms(np.arange(n), 17)
    s = aps_scores(np.tile(pi, (n, 1)), u)[np.arange(n), y]
    assert stats.kstest(s, "uniform").pvalue > 0.01


simplex = st.lists(st.integers(0, 5), min_size=2, max_size=6).filter(lambda v: sum(v) > 0).map(
    lambda v: np.array(v, dtype=float) / sum(v))


@given(simplex, st.floats(0, 0.999))
def test_vectorized_matches_formula(pi, u):
    vec = aps_scores(pi[None, :], np.array([u]))[0]
    for y in range(pi.size):
        assert vec[y] == pytest.approx(max(0.0, naive_aps(pi, y, u)), abs=1e-12)
        assert vec[y] == pytest.approx(aps_conformity(pi, y, u), abs=1e-12)


@given(simplex, st.floats(0, 0.999))
def test_monotone_in_probability_rank(pi, u):
    s = aps_scores(pi[None, :], np.array([u]))[0]
    for a in range(pi.size):
        for b in range(pi.size):
            if pi[a] > pi[b]:
                assert s[a] >= s[b]
    assert np.all((s >= 0) & (s <= 1))
