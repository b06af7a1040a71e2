import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from prefloop.core import ConfigError, ItemCatalog, RngStream
from prefloop.recommend import (PolicyConfig, momentum_mask, persistent_probabilities, score_items,
                                select_constant, select_greedy, select_persistent_softmax, select_softmax,
                                select_uniform, softmax_probabilities)

scores_st = st.lists(st.floats(-20, 20), min_size=2, max_size=12).map(np.array)


def _freqs(draw, n, k=10000):
    return np.bincount([draw() for _ in range(k)], minlength=n) / k


def _within_3sigma(freq, p, k=10000):
    sd = np.sqrt(p * (1 - p) / k)
    return np.all(np.abs(freq - p) <= 3 * sd + 1e-12)


def test_scores():
    cat = ItemCatalog([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(score_items([2.0, 3.0], cat), [2.0, 3.0])
    assert not score_items([0.0, 0.0], cat).any()


def test_uniform():
    assert all(select_uniform(1, RngStream(0, "policy")) == 0 for _ in range(10))
    rng = RngStream(0, "policy")
    assert _within_3sigma(_freqs(lambda: select_uniform(4, rng), 4, 100000), np.full(4, 0.25), 100000)
    a, b = RngStream(9, "policy"), RngStream(9, "policy")
    assert [select_uniform(50, a) for _ in range(100)] == [select_uniform(50, b) for _ in range(100)]


def test_constant():
    assert select_constant(PolicyConfig(kind="constant", constant_index=17)) == 17
    assert PolicyConfig(kind="constant").constant_index == 0
    with pytest.raises(ConfigError):
        PolicyConfig(kind="constant", constant_index=5).validate_for(5)


class TestGreedy:
    def test_unique(self):
        assert select_greedy(np.array([0.1, 0.9, 0.3]), RngStream(0, "policy")) == 1

    def test_tie_is_fair(self):
        rng = RngStream(1, "policy")
        counts = np.bincount([select_greedy(np.array([0.9, 0.9, 0.1]), rng) for _ in range(10000)], minlength=3)
        assert counts[2] == 0
        chi2 = sum((c - 5000) ** 2 / 5000 for c in counts[:2])
        assert chi2 < 6.63  # 1 dof, 1%

    def test_full_tie(self):
        rng = RngStream(2, "policy")
        assert _within_3sigma(_freqs(lambda: select_greedy(np.zeros(4), rng), 4), np.full(4, 0.25))

    @given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=12), st.integers(0, 2 ** 32 - 1))
    def test_monotone_transform_invariance(self, ints, seed):
        # integer-valued scores keep the cubic exact, hence strictly increasing
        s = np.array(ints, dtype=float)
        f = lambda x: x ** 3 + 5 * x - 7
        assert select_greedy(s, RngStream(seed, "p")) == select_greedy(f(s), RngStream(seed, "p"))


class TestSoftmax:
    def test_equal_scores_uniform(self):
        np.testing.assert_allclose(softmax_probabilities(np.full(5, 2.0), 7.0), np.full(5, 0.2))

    def test_zero_beta(self):
        rng = RngStream(3, "policy")
        f = _freqs(lambda: select_softmax(np.array([0.0, 5.0, -1.0]), 0.0, 1.0, rng), 3)
        assert _within_3sigma(f, np.full(3, 1 / 3))

    def test_ln3_example(self):
        s = np.array([0.0, math.log(3)])
        np.testing.assert_allclose(softmax_probabilities(s, 1.0), [0.25, 0.75], atol=1e-15)
        rng = RngStream(4, "policy")
        assert _within_3sigma(_freqs(lambda: select_softmax(s, 1.0, 1.0, rng), 2), np.array([0.25, 0.75]))

    def test_zero_estimate_falls_back_to_uniform(self):
        rng = RngStream(5, "policy")
        f = _freqs(lambda: select_softmax(np.zeros(3), 2.0, 0.0, rng), 3)
        assert _within_3sigma(f, np.full(3, 1 / 3))

    @given(scores_st, st.floats(0, 50))
    def test_positive_and_normalized(self, s, beta):
        p = softmax_probabilities(s, beta)
        assert abs(p.sum() - 1) < 1e-12
        assume(beta * (s.max() - s.min()) < 600)
        assert np.all(p > 0)

    @given(scores_st, st.floats(0.01, 10), st.floats(0.01, 5))
    def test_monotone_in_own_score(self, s, beta, bump):
        p0 = softmax_probabilities(s, beta)
        s2 = s.copy()
        s2[0] += bump
        assert softmax_probabilities(s2, beta)[0] >= p0[0]

    @given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(0.01, 100), st.floats(0.1, 5))
    @settings(max_examples=200)
    def test_norm_scaling_invariance(self, u, c, beta):
        u = np.array(u)
        assume(np.linalg.norm(u) > 1e-3)
        cat = ItemCatalog(np.array([[1.0, 0.2], [-0.5, 0.7], [0.3, -1.1], [0.0, 0.4]]))
        p1 = softmax_probabilities(score_items(u, cat), beta / np.linalg.norm(u))
        p2 = softmax_probabilities(score_items(c * u, cat), beta / np.linalg.norm(c * u))
        assert np.max(np.abs(p1 - p2)) < 1e-12

    @given(scores_st)
    def test_large_beta_concentrates(self, s):
        gap = np.sort(np.unique(s))
        assume(gap.size >= 2)
        with np.errstate(over="ignore"):
            beta = 50 / (gap[-1] - gap[-2])
        assume(math.isfinite(beta))
        p = softmax_probabilities(s, beta)
        assert p[s == s.max()].sum() >= 0.999


class TestPersistent:
    cat = ItemCatalog(np.array([[1.0, 0.0], [-1.0, 0.0]]))

    def test_no_movement_is_plain_softmax(self):
        s = np.array([0.3, -0.3])
        a, b = RngStream(6, "policy"), RngStream(6, "policy")
        u = np.array([0.3, 0.1])
        picks_p = [select_persistent_softmax(s, 2.0, u, u, self.cat, a) for _ in range(500)]
        picks_s = [select_softmax(s, 2.0, 1.0, b) for _ in range(500)]
        assert picks_p == picks_s

    def test_half_space_filter(self):
        rng = RngStream(7, "policy")
        s = np.array([0.0, 5.0])
        prev, now = np.array([0.0, 1.0]), np.array([0.5, 1.0])
        assert all(select_persistent_softmax(s, 1.0, now, prev, self.cat, rng) == 0 for _ in range(1000))
        p = persistent_probabilities(s, 1.0, momentum_mask(now, prev, self.cat))
        np.testing.assert_array_equal(p, [1.0, 0.0])

    def test_empty_half_space_falls_back(self):
        cat = ItemCatalog(np.array([[0.0, -1.0], [0.5, -2.0], [-0.3, -0.4]]))
        now, prev = np.array([0.0, 2.0]), np.array([0.0, 1.0])
        assert momentum_mask(now, prev, cat, normalize=False) is None
        s = score_items(now, cat)
        rng = RngStream(8, "policy")
        f = _freqs(lambda: select_persistent_softmax(s, 1.0, now, prev, cat, rng, momentum="raw"), 3)
        assert _within_3sigma(f, softmax_probabilities(s, 1.0))

    @given(scores_st, st.floats(0, 5), st.integers(0, 2 ** 16))
    def test_restricted_renormalized(self, s, beta, bits):
        mask = np.array([(bits >> i) & 1 for i in range(s.size)], dtype=bool)
        assume(mask.any())
        p = persistent_probabilities(s, beta, mask)
        ref = np.exp(beta * (s[mask] - s[mask].max()))
        assert np.max(np.abs(p[mask] - ref / ref.sum())) < 1e-12
        assert not p[~mask].any()

    def test_norm_scaling_flag(self):
        cat = ItemCatalog(np.array([[1.0, 0.0], [0.9, 0.1], [0.8, 0.3]]))
        now, prev = np.array([10.0, 2.0]), np.array([10.0, 1.0])
        s = score_items(now, cat)
        a, b = RngStream(9, "policy"), RngStream(9, "policy")
        scaled = [select_persistent_softmax(s, 3.0, now, prev, cat, a, norm_scaling=True) for _ in range(2000)]
        manual = [select_persistent_softmax(s, 3.0 / np.linalg.norm(now), now, prev, cat, b) for _ in range(2000)]
        assert scaled == manual


@pytest.mark.parametrize("kw", [dict(kind="boltzmann"), dict(beta=-1.0), dict(beta=math.inf),
                                dict(constant_index=-2), dict(momentum="sideways")])
def test_policy_config_rejects(kw):
    with pytest.raises(ConfigError):
        PolicyConfig(**kw)
