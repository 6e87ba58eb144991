import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtdg.errors import DomainError
from mtdg.model import (BivariateSet, EventSequence, MtdgModel, StateSpace, random_weak_model,
                        simulate)
from mtdg.moments import (FLAG_PAIRS, bootstrap_correlations, bootstrap_weights,
                          centrosymmetrize, day_counts, estimate_bivariate, estimate_stationary,
                          model_correlations, project_marginals, signed_event_correlations)

SS = StateSpace.signed_events()


def seq_of(*days, space=SS):
    return EventSequence.from_days([np.asarray(d) - 1 for d in days], space)


def test_stationary_uniform_cycle():
    np.testing.assert_allclose(estimate_stationary(seq_of([1, 2, 3, 4] * 5)), [0.25] * 4)


def test_stationary_symmetrized_hand_count():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        eta = estimate_stationary(seq_of([1, 1, 2, 4]), symmetrize=True)
    np.testing.assert_allclose(eta, [0.375, 0.125, 0.125, 0.375], atol=1e-15)


def test_unseen_state_warns():
    with pytest.warns(UserWarning, match="never observed"):
        estimate_stationary(seq_of([1, 1, 2, 4]))


def test_pair_frequencies_single_day():
    biv = estimate_bivariate(seq_of([1, 2, 1, 2], space=StateSpace.generic(2)), 1)
    np.testing.assert_allclose(biv.b[1], [[0, 2 / 3], [1 / 3, 0]], atol=1e-15)


def test_pair_frequencies_respect_days():
    biv = estimate_bivariate(seq_of([1, 2], [1, 2], space=StateSpace.generic(2)), 1)
    np.testing.assert_allclose(biv.b[1], [[0, 1], [0, 0]], atol=1e-15)


def test_missing_lag_names_the_lag():
    with pytest.raises(DomainError, match="lag 3"):
        estimate_bivariate(seq_of([1, 2, 3], [4, 1], space=SS), 3)


def test_iid_pairs_near_product(rng):
    eta = np.array([0.2, 0.3, 0.3, 0.2])
    seq = simulate(MtdgModel.iid(eta, 1, SS), 400_000, 3)
    biv = estimate_bivariate(seq, 5)
    se = np.sqrt(np.outer(eta, eta) / 400_000)
    for k in range(1, 6):
        assert np.all(np.abs(biv.b[k] - np.outer(biv.eta, biv.eta)) <= 5 * se)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(30, 400), k=st.integers(1, 6))
def test_symmetrized_estimates_are_centrosymmetric_and_consistent(seed, n, k):
    r = np.random.default_rng(seed)
    x = r.integers(0, 4, size=n)
    x[:4] = [0, 1, 2, 3]
    seq = EventSequence(x, np.array([0, n // 2]), SS)
    biv = estimate_bivariate(seq, k, symmetrize=True)
    for lag in range(k + 1):
        b = biv.b[lag]
        np.testing.assert_array_equal(b, b[::-1, ::-1])
        np.testing.assert_allclose(b.sum(axis=1), biv.eta, atol=1e-14)
        np.testing.assert_allclose(b.sum(axis=0), biv.eta, atol=1e-14)
    np.testing.assert_array_equal(biv.eta, biv.eta[::-1])


def test_raw_marginals_within_one_over_pair_count(rng):
    x = rng.integers(0, 4, size=997)
    seq = EventSequence(x, np.array([0, 400]), SS)
    biv = estimate_bivariate(seq, 4)
    pairs = day_counts(seq, 4).pairs.sum(axis=0)
    for k in range(1, 5):
        tol = 1.0 / pairs[k].sum() * 2
        assert np.abs(biv.b[k].sum(axis=1) - biv.eta).max() <= tol
        assert np.abs(biv.b[k].sum(axis=0) - biv.eta).max() <= tol


def test_projection_is_minimal_and_exact(rng):
    eta = np.array([0.1, 0.4, 0.4, 0.1])
    b = rng.uniform(size=(4, 4)) / 16
    out = project_marginals(b, eta)
    np.testing.assert_allclose(out.sum(axis=0), eta, atol=1e-15)
    np.testing.assert_allclose(out.sum(axis=1), eta, atol=1e-15)
    # a feasible perturbation never gets closer
    for _ in range(20):
        d = rng.normal(size=(4, 4))
        d -= d.mean(axis=0, keepdims=True)
        d -= d.mean(axis=1, keepdims=True)
        assert np.linalg.norm(out + 0.01 * d - b) >= np.linalg.norm(out - b) - 1e-15
    sym = centrosymmetrize(b)
    proj = project_marginals(sym, eta)
    np.testing.assert_allclose(proj, proj[::-1, ::-1], atol=1e-16)


def _biv_with_lag1(eta, b1):
    return BivariateSet(np.asarray(eta), np.stack([np.diag(eta), b1]))


def test_independent_pairs_give_zero_correlation():
    eta = np.array([0.2, 0.3, 0.3, 0.2])
    c = signed_event_correlations(_biv_with_lag1(eta, np.outer(eta, eta)), SS)
    for key in FLAG_PAIRS:
        assert c[key][0] == pytest.approx(0.0, abs=1e-15)
    assert c.p_c + c.p_nc == pytest.approx(1.0, abs=1e-12)


def test_nc_nc_hand_value():
    eta = np.full(4, 0.25)
    b1 = np.full((4, 4), 0.0625)
    b1[1, 1] = b1[2, 2] = 0.2
    b1[1, 2] = b1[2, 1] = 0.05
    c = signed_event_correlations(_biv_with_lag1(eta, b1), SS)
    assert c[("NC", "NC")][0] == pytest.approx(1.2, abs=1e-14)


def test_correlations_need_event_map():
    eta = np.full(4, 0.25)
    with pytest.raises(DomainError):
        signed_event_correlations(_biv_with_lag1(eta, np.outer(eta, eta)), StateSpace.generic(4))


def test_correlations_scale_linearly(rng):
    model = random_weak_model(4, 3, rng, centrosymmetric=True, state_space=SS)
    biv = model_correlations(model, 5)
    from mtdg.model import theoretical_bivariate

    tb = theoretical_bivariate(model, 5)
    outer = np.outer(tb.eta, tb.eta)
    scaled = BivariateSet(tb.eta, np.concatenate([tb.b[:1], outer + 0.5 * (tb.b[1:] - outer)]))
    half = signed_event_correlations(scaled, SS)
    for key in FLAG_PAIRS:
        np.testing.assert_allclose(half[key], 0.5 * biv[key], atol=1e-15)


def test_simulated_correlations_match_theory(rng):
    model = random_weak_model(4, 3, rng, scale=0.7, centrosymmetric=True, state_space=SS)
    seq = simulate(model, 500_000, 8, day_length=5000)
    emp = bootstrap_correlations(seq, 10, n_boot=100, seed=2)
    theory = model_correlations(model, 10)
    for key in FLAG_PAIRS:
        z = (emp[key] - theory[key]) / emp.stderr[key]
        assert np.all(np.abs(z) <= 4), (key, z)


def test_bootstrap_weights_preserve_day_count(rng):
    w = bootstrap_weights(17, 50, rng, block_days=3)
    assert w.shape == (50, 17)
    np.testing.assert_array_equal(w.sum(axis=1), 17)


def test_correlation_rows_order():
    eta = np.full(4, 0.25)
    c = signed_event_correlations(_biv_with_lag1(eta, np.outer(eta, eta)), SS)
    rows = list(c.rows())
    assert [r[:3] for r in rows] == [("C", "C", 1), ("C", "NC", 1), ("NC", "C", 1), ("NC", "NC", 1)]
