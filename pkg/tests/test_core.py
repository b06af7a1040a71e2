import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefloop.core import (ConfigError, ContractError, InteractionHistory, InteractionRecord, ItemCatalog,
                           PreferenceState, RngStream, rate, sample_catalog, sample_initial_preference)

finite = st.floats(-50, 50, allow_nan=False)


def test_rng_streams_are_reproducible_and_label_separated():
    a = RngStream(7, "catalog")
    b = RngStream(7, "catalog")
    c = RngStream(7, "policy")
    xa = [a.uniform() for _ in range(5000)]
    assert xa == [b.uniform() for _ in range(5000)]
    assert xa[:10] != [c.uniform() for _ in range(10)]
    assert np.array_equal(RngStream(3, "x").normal(5000), RngStream(3, "x").normal(5000))


def test_rng_normal_matches_sequential_gauss():
    bulk = RngStream(1, "z").normal(3000)
    s = RngStream(1, "z")
    assert np.array_equal(bulk, [s.gauss() for _ in range(3000)])


def test_catalog_determinism():
    c1 = sample_catalog(3, 2, 1.0, RngStream(7, "catalog"))
    c2 = sample_catalog(3, 2, 1.0, RngStream(7, "catalog"))
    assert c1.items.tobytes() == c2.items.tobytes()
    assert (c1.n, c1.d) == (3, 2)


@pytest.mark.parametrize("n,d,sigma", [(3, 2, 0.0), (0, 2, 1.0), (3, 0, 1.0), (3, 2, -1.0), (3, 2, float("nan"))])
def test_catalog_rejects_bad_config(n, d, sigma):
    with pytest.raises(ConfigError):
        sample_catalog(n, d, sigma, RngStream(0, "catalog"))


def test_catalog_empirical_std():
    cat = sample_catalog(5000, 8, 1.0, RngStream(11, "catalog"))
    std = cat.items.std(axis=0)
    assert np.all(np.abs(std - 1.0) < 0.05)


def test_catalog_is_read_only():
    cat = ItemCatalog(np.ones((2, 2)))
    with pytest.raises(ValueError):
        cat.items[0, 0] = 3.0
    with pytest.raises(ConfigError):
        ItemCatalog(np.array([[1.0, np.inf]]))


def test_initial_preference_defaults_baseline_to_pi0():
    p = sample_initial_preference(3, 1.0, RngStream(5, "preference"))
    assert np.array_equal(p.pi, p.baseline)
    q = sample_initial_preference(3, 1.0, RngStream(5, "preference"))
    assert np.array_equal(p.pi, q.pi)
    r = sample_initial_preference(3, 1.0, RngStream(5, "preference"), baseline=[0, 0, 0])
    assert np.array_equal(r.baseline, np.zeros(3))


def test_initial_preference_second_moment():
    sq = [float(np.sum(sample_initial_preference(2, 1.0, RngStream(s, "preference")).pi ** 2))
          for s in range(10000)]
    # E|pi_0|^2 = d sigma^2 = 2
    assert abs(np.mean(sq) - 2.0) < 0.1


def test_rate_examples():
    assert rate(np.array([1.0, 2.0]), [3.0, 1.0], 0.0) == (5.0, 5.0)
    obs, clean = rate(PreferenceState([1.0, 2.0], [0.0, 0.0]), [0.0, 0.0], 0.05, RngStream(0, "rating-noise"))
    assert clean == 0.0 and obs != 0.0
    with pytest.raises(ContractError):
        rate(np.zeros(2), np.zeros(3), 0.0)


def test_rate_noise_std():
    rng = RngStream(4, "rating-noise")
    pi, v = np.array([0.3, -1.2]), np.array([2.0, 0.5])
    diffs = [o - c for o, c in (rate(pi, v, 0.05, rng) for _ in range(10000))]
    assert abs(np.std(diffs) / 0.05 - 1) < 0.05


@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3),
       st.lists(finite, min_size=3, max_size=3), finite)
@settings(max_examples=200)
def test_rate_is_bilinear(pi, v, w, a):
    pi, v, w = map(np.array, (pi, v, w))
    r = lambda p, x: rate(p, x, 0.0)[0]
    scale = 1 + np.abs(pi).sum() * (np.abs(v).sum() + np.abs(w).sum()) * (1 + abs(a))
    assert abs(r(a * pi, v) - a * r(pi, v)) <= 1e-12 * scale
    assert abs(r(pi, v + w) - (r(pi, v) + r(pi, w))) <= 1e-12 * scale


def test_history_steps_contiguous():
    h = InteractionHistory()
    h.append(3, 1.0, 0.9)
    h.append(1, 2.0, 2.1)
    assert [r.step for r in h.records] == [1, 2]
    assert h.ratings() == [1.0, 2.0]
    with pytest.raises(ContractError):
        InteractionHistory([InteractionRecord(2, 0, 1.0, 1.0)])
