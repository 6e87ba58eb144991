import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_pairs, dense_stationary, dense_transition
from mtdg.errors import DomainError, NumericError, ResourceError
from mtdg.model import (EventSequence, MtdgModel, StateSpace, collapse_full_chain,
                        collapsed_stationary, conditional_distribution, deviation_roundtrip,
                        random_mixture_model, random_weak_model, sequence_log_likelihood,
                        sequence_probabilities, simulate, stationary_distribution,
                        theoretical_bivariate, to_deviation, validate_model)


def dar_model(p=2, rho=0.4):
    q = np.array([[0.5 + rho / 2, 0.5 - rho / 2], [0.5 - rho / 2, 0.5 + rho / 2]])
    return MtdgModel.from_mixture(np.full(p, 1.0 / p), np.repeat(q[None], p, axis=0), [0.5, 0.5])


# --- state space -------------------------------------------------------------


def test_signed_event_table():
    ss = StateSpace.signed_events()
    assert ss.state_of(-1, "C") == 0
    assert ss.state_of(-1, "NC") == 1
    assert ss.state_of(1, "NC") == 2
    assert ss.state_of(1, "C") == 3
    assert ss.signs.tolist() == [-1, -1, 1, 1]
    assert ss.flag_mask("C").tolist() == [1, 0, 0, 1]
    assert StateSpace.from_dict(ss.to_dict()) == ss


@pytest.mark.parametrize("kwargs", [dict(m=1, labels=("a",)), dict(m=2, labels=("a", "a")),
                                    dict(m=3, labels=("a", "b", "c"), event_map=((1, "C"),))])
def test_state_space_rejects_bad_input(kwargs):
    with pytest.raises(DomainError):
        StateSpace(**kwargs)


# --- conditional distribution --------------------------------------------------


def test_order_one_history_gives_matrix_row(rng):
    model = random_weak_model(3, 1, rng)
    np.testing.assert_allclose(conditional_distribution(model, [1]), model.q_stack[0, 1], atol=1e-15)


def test_zero_deviation_gives_eta():
    eta = np.array([0.1, 0.2, 0.3, 0.4])
    model = MtdgModel.iid(eta, p=3)
    np.testing.assert_allclose(conditional_distribution(model, [3, 0, 2]), eta, atol=1e-15)


def test_hand_evaluated_mixture():
    q = np.array([[0.7, 0.3], [0.3, 0.7]])
    model = MtdgModel.from_mixture([0.6, 0.4], [q, q])
    # history (1, 2) in 1-based labels, most recent first
    out = conditional_distribution(model, [0, 1])
    assert out[0] == pytest.approx(0.6 * 0.7 + 0.4 * 0.3, abs=1e-15)
    assert out[0] == pytest.approx(0.54, abs=1e-15)


def test_invalid_history_rejected():
    model = dar_model()
    with pytest.raises(DomainError):
        conditional_distribution(model, [0, 2])
    with pytest.raises(DomainError):
        conditional_distribution(model, [0])


@settings(max_examples=60, deadline=None)
@given(m=st.integers(2, 5), p=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_conditional_is_a_probability_vector(m, p, seed):
    r = np.random.default_rng(seed)
    model = random_weak_model(m, p, r, scale=r.uniform(0.05, 0.99))
    h = r.integers(0, m, size=p)
    out = conditional_distribution(model, h)
    assert abs(out.sum() - 1) <= 1e-12
    assert np.all(out > 0) and np.all(out < 1)
    mix = MtdgModel.from_mixture(model.lam, model.q_stack)
    np.testing.assert_allclose(conditional_distribution(mix, h), out, atol=1e-14)


def test_vectorized_probabilities_match_scalar(rng):
    model = random_weak_model(4, 3, rng)
    x = rng.integers(0, 4, size=200)
    pos = np.arange(3, 200)
    probs = sequence_probabilities(model, x, pos)
    ref = [conditional_distribution(model, x[t - 3:t][::-1])[x[t]] for t in pos]
    np.testing.assert_allclose(probs, ref, atol=1e-15)
    assert sequence_log_likelihood(model, x, pos) == pytest.approx(np.log(ref).sum(), rel=1e-13)


# --- validation ----------------------------------------------------------------


def test_dar_model_is_valid():
    assert validate_model(dar_model()).violations == []


def test_row_sum_defect_flagged():
    q = np.array([[[0.6, 0.3], [0.5, 0.5]]])
    rep = validate_model(MtdgModel.from_mixture([1.0], q))
    assert not rep.ok
    assert any("row 0 of Q[0]" in v for v in rep.violations)


def test_boundary_equality_flagged():
    eta = np.array([0.5, 0.5])
    a = np.array([[[0.25, -0.25], [-0.25, 0.25]], [[0.25, -0.25], [-0.25, 0.25]]])
    # sum_g max a = 0.5 = 1 - eta: the bound is met with equality
    rep = validate_model(MtdgModel.from_deviation(eta, a))
    assert any("upper bound violated" in v for v in rep.violations)
    assert validate_model(MtdgModel.from_deviation(eta, a * (1 - 1e-3))).ok


# --- collapsed chain -------------------------------------------------------------


def test_collapsed_order_one_is_q(rng):
    model = random_mixture_model(2, 1, rng)
    np.testing.assert_allclose(collapse_full_chain(model).transition.toarray(), model.q_stack[0],
                               atol=1e-15)


def test_collapsed_sparsity_and_rows(rng):
    model = random_mixture_model(2, 2, rng)
    T = collapse_full_chain(model).transition.toarray()
    assert T.shape == (4, 4)
    assert np.all((T > 0).sum(axis=1) == 2)
    np.testing.assert_allclose(T.sum(axis=1), 1, atol=1e-12)
    ref, _ = dense_transition(model.lam, model.q_stack)
    np.testing.assert_allclose(T, ref, atol=1e-15)


def test_collapsed_matches_dense_oracle(rng):
    for m, p in [(3, 2), (2, 4), (4, 2)]:
        model = random_mixture_model(m, p, rng)
        ref, _ = dense_transition(model.lam, model.q_stack)
        np.testing.assert_allclose(collapse_full_chain(model).transition.toarray(), ref, atol=1e-15)


def test_collapsed_cap():
    model = MtdgModel.iid([0.5, 0.5], p=21)
    with pytest.raises(ResourceError):
        collapse_full_chain(model)


def test_power_iteration_failure_reported():
    model = random_mixture_model(3, 2, np.random.default_rng(1))
    with pytest.raises(NumericError):
        collapsed_stationary(collapse_full_chain(model), max_iter=2)


def test_dar_stationary_is_uniform():
    np.testing.assert_allclose(stationary_distribution(dar_model(3), "collapsed"), [0.5, 0.5],
                               atol=1e-12)


def test_iid_stationary_is_eta():
    eta = [0.2, 0.5, 0.3]
    model = MtdgModel.from_mixture([0.5, 0.5], np.tile(eta, (2, 3, 1)))
    np.testing.assert_allclose(stationary_distribution(model, "collapsed"), eta, atol=1e-12)


def test_non_shared_stationary_against_simulation(rng):
    model = random_mixture_model(2, 2, rng)
    assert model.eta is None
    xi = dense_stationary(dense_transition(model.lam, model.q_stack)[0])
    omega = np.array([xi[0] + xi[1], xi[2] + xi[3]])
    got = stationary_distribution(model, "collapsed")
    np.testing.assert_allclose(got, omega, atol=1e-10)
    seq = simulate(model, 10**6, 5)
    freq = np.bincount(seq.states, minlength=2) / len(seq)
    # loose CLT band; correlation inflates the variance a little
    assert np.all(np.abs(freq - got) < 4 * np.sqrt(got * (1 - got) / 1e6) * 3)


def test_shared_eigenvector_requires_eta(rng):
    with pytest.raises(DomainError):
        stationary_distribution(random_mixture_model(2, 2, rng))


# --- bivariate laws --------------------------------------------------------------


def test_bivariate_lag_zero_is_diag(rng):
    model = random_weak_model(3, 2, rng)
    np.testing.assert_allclose(theoretical_bivariate(model, 3).b[0], np.diag(model.eta))


def test_iid_bivariate_is_outer_product():
    eta = np.array([0.1, 0.6, 0.3])
    b = theoretical_bivariate(MtdgModel.iid(eta, 3), 6).b
    for k in range(1, 7):
        np.testing.assert_allclose(b[k], np.outer(eta, eta), atol=1e-15)


@pytest.mark.parametrize("m,p", [(2, 2), (3, 2), (2, 5), (4, 3)])
def test_bivariate_matches_enumeration(m, p, rng):
    model = random_weak_model(m, p, rng, scale=0.8)
    ref, omega = dense_pairs(model.lam, model.q_stack, p + 3)
    got = theoretical_bivariate(model, p + 3)
    np.testing.assert_allclose(got.b, ref, atol=1e-12)
    np.testing.assert_allclose(got.eta, omega, atol=1e-12)
    for k in range(p + 4):
        np.testing.assert_allclose(got.b[k].sum(axis=1), model.eta, atol=1e-12)
        np.testing.assert_allclose(got.b[k].sum(axis=0), model.eta, atol=1e-12)


def test_order_one_bivariate_is_matrix_power(rng):
    model = random_weak_model(3, 1, rng)
    b = theoretical_bivariate(model, 5).b
    q = model.q_stack[0]
    for k in range(6):
        np.testing.assert_allclose(b[k], np.diag(model.eta) @ np.linalg.matrix_power(q, k), atol=1e-14)


def test_non_shared_bivariate_matches_enumeration(rng):
    model = random_mixture_model(3, 2, rng)
    ref, _ = dense_pairs(model.lam, model.q_stack, 4)
    np.testing.assert_allclose(theoretical_bivariate(model, 4).b, ref, atol=1e-11)


# --- representations ---------------------------------------------------------------


def test_iid_deviation_is_zero():
    model = MtdgModel.from_mixture([0.3, 0.7], np.tile([0.2, 0.8], (2, 2, 1)), [0.2, 0.8])
    assert np.all(to_deviation(model).a_stack == 0)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(2, 5), p=st.integers(1, 5), seed=st.integers(0, 2**31))
def test_deviation_roundtrip(m, p, seed):
    r = np.random.default_rng(seed)
    model = random_weak_model(m, p, r)
    mix = MtdgModel.from_mixture(model.lam, model.q_stack, model.eta)
    np.testing.assert_allclose(deviation_roundtrip(mix).q_stack, mix.q_stack, atol=1e-12)
    assert np.abs(model.a_stack.sum(axis=2)).max() <= 1e-12
    assert np.abs(model.eta @ model.a_stack).max() <= 1e-10


# --- simulation ----------------------------------------------------------------------


def test_simulation_is_deterministic(rng):
    model = random_weak_model(4, 3, rng)
    a = simulate(model, 5000, 42, day_length=1000)
    b = simulate(model, 5000, 42, day_length=1000)
    assert np.array_equal(a.states, b.states)
    assert a.n_days == 5
    assert not np.array_equal(a.states, simulate(model, 5000, 43).states)


def test_iid_simulation_frequencies():
    eta = np.array([0.1, 0.2, 0.3, 0.4])
    seq = simulate(MtdgModel.iid(eta, 2), 10**6, 9)
    freq = np.bincount(seq.states, minlength=4) / 1e6
    assert np.all(np.abs(freq - eta) <= 4 * np.sqrt(eta * (1 - eta) / 1e6))


def test_dar_lag_one_sign_correlation():
    model = dar_model(p=2, rho=0.6)
    b1 = theoretical_bivariate(model, 1).b[1]
    s = np.array([-1.0, 1.0])
    rho1 = s @ b1 @ s
    seq = simulate(model, 10**6, 17)
    x = s[seq.states]
    emp = np.mean(x[:-1] * x[1:])
    # variance of the product mean is inflated by autocorrelation; 4 sd with a generous inflation
    assert abs(emp - rho1) <= 4 * 3 / np.sqrt(1e6)


def test_simulate_explicit_init():
    model = dar_model(p=2)
    seq = simulate(model, 10, 0, burn_in=0, init=[1, 0])
    assert len(seq) == 10
    with pytest.raises(DomainError):
        simulate(model, 10, 0, init=[1])
    with pytest.raises(DomainError):
        simulate(model, 0, 0)


# --- event sequences -------------------------------------------------------------------


def test_event_sequence_validation():
    ss = StateSpace.generic(3)
    with pytest.raises(DomainError):
        EventSequence(np.array([0, 3]), np.array([0]), ss)
    with pytest.raises(DomainError):
        EventSequence(np.array([0, 1, 2]), np.array([0, 0]), ss)
    with pytest.raises(DomainError):
        EventSequence(np.array([0, 1, 2]), np.array([1]), ss)


def test_day_helpers():
    seq = EventSequence.from_days([[0, 1, 0], [1, 1], [0, 0, 0, 1]])
    assert seq.n_days == 3
    assert seq.day_ids().tolist() == [0, 0, 0, 1, 1, 2, 2, 2, 2]
    assert seq.within_day_positions(2).tolist() == [2, 7, 8]
    sub = seq.select_days(1, 3)
    assert sub.states.tolist() == [1, 1, 0, 0, 0, 1]
    assert sub.day_offsets.tolist() == [0, 2]
