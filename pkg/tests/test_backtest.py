import logging

import numpy as np
import pytest

from mtdg.backtest import (FixedModelPredictor, GmmPredictor, Predictor, UnconditionalPredictor,
                           UniformPredictor, epe_loss, predict_distribution, rolling_backtest)
from mtdg.errors import DomainError
from mtdg.gmm import fit_gmm
from mtdg.model import (EventSequence, MtdgModel, StateSpace, conditional_distribution,
                        random_weak_model, simulate)

SS = StateSpace.signed_events()


def days_of(model, n_days, day_len, seed):
    return simulate(model, n_days * day_len, seed, day_length=day_len)


def test_prediction_is_the_conditional_law(rng):
    eta = np.array([0.1, 0.2, 0.3, 0.4])
    np.testing.assert_array_equal(predict_distribution(MtdgModel.iid(eta, 2), [0, 3]), eta)
    m1 = random_weak_model(4, 1, rng)
    np.testing.assert_array_equal(predict_distribution(m1, [2]), m1.q_stack[0, 2])
    model = random_weak_model(4, 3, rng, centrosymmetric=True, state_space=SS)
    fitted = fit_gmm(simulate(model, 20_000, 1), 3).model
    for h in rng.integers(0, 4, size=(10, 3)):
        np.testing.assert_array_equal(predict_distribution(fitted, h), conditional_distribution(fitted, h))


def test_loss_values():
    assert epe_loss([0.0, 1.0, 0.0], 1) == 0.0
    assert epe_loss(np.full(4, 0.25), 2) == pytest.approx(2 * np.log(4), abs=1e-15)
    assert epe_loss([0.5, 0.5, 0.0], 2) == float("inf")
    with pytest.raises(DomainError):
        epe_loss([0.5, 0.5], 2)
    with pytest.raises(DomainError):
        epe_loss([0.5, 0.4], 0)


def test_certain_event_adds_nothing():
    losses = [epe_loss([0.2, 0.8], 0), epe_loss([0.6, 0.4], 1)]
    assert sum(losses) + epe_loss([1.0, 0.0], 0) == sum(losses)


def test_uniform_and_unconditional_by_hand(rng):
    model = random_weak_model(4, 2, rng, state_space=SS)
    seq = days_of(model, 14, 500, 3)
    rep = rolling_backtest(seq, [UniformPredictor(), UnconditionalPredictor()], 10, 1, 1)
    assert rep.n_windows == 4
    assert rep["uniform"].epe == pytest.approx(2 * np.log(4), abs=1e-12)
    losses = []
    for s in range(4):
        train = seq.select_days(s, s + 10)
        eta = np.bincount(train.states, minlength=4) / len(train)
        test = seq.select_days(s + 10, s + 11).states
        losses.append(-2 * np.log(eta[test]))
    losses = np.concatenate(losses)
    assert rep["unconditional"].epe == pytest.approx(losses.mean(), rel=1e-13)
    assert rep["unconditional"].stderr == pytest.approx(losses.std(ddof=1) / np.sqrt(losses.size), rel=1e-10)
    assert rep["unconditional"].n_events == 2000


def test_true_model_beats_unconditional(rng):
    model = random_weak_model(4, 4, rng, scale=0.8, centrosymmetric=True, state_space=SS)
    seq = days_of(model, 15, 2000, 8)
    rep = rolling_backtest(seq, [UnconditionalPredictor(), FixedModelPredictor(model, "true"),
                                 GmmPredictor(4)])
    assert rep["true"].epe < rep["unconditional"].epe - 2 * rep["unconditional"].stderr
    assert rep["gmm_p4"].epe < rep["unconditional"].epe
    assert rep["true"].n_events == rep["unconditional"].n_events


def test_window_arithmetic(rng):
    seq = days_of(MtdgModel.iid(np.full(4, 0.25), 1, SS), 30, 50, 1)
    rep = rolling_backtest(seq, [UniformPredictor()], 10, 1, 1)
    assert rep.n_windows == 20
    assert len(rep["uniform"].per_day) == 20
    rep3 = rolling_backtest(seq, [UniformPredictor()], 10, 2, 3)
    assert rep3.n_windows == 7


def test_too_few_days():
    seq = EventSequence(np.zeros(100, dtype=int), np.array([0]), SS)
    with pytest.raises(DomainError):
        rolling_backtest(seq, [UniformPredictor()], 10, 1, 1)


def test_histories_reach_into_training_span(rng):
    model = random_weak_model(4, 30, rng, state_space=SS)
    seq = days_of(model, 12, 40, 2)
    rep = rolling_backtest(seq, [FixedModelPredictor(model, "m")], 10, 1, 1)
    # days shorter than p are still fully scored
    assert rep["m"].n_events == 80


class Failing(Predictor):
    name = "failing"

    def fit(self, train):
        raise DomainError("cannot fit")


def test_failed_fit_skipped_and_logged(caplog):
    seq = days_of(MtdgModel.iid(np.full(4, 0.25), 1, SS), 12, 30, 1)
    with caplog.at_level(logging.WARNING, logger="mtdg.backtest"):
        rep = rolling_backtest(seq, [UniformPredictor(), Failing()])
    assert len(rep.skipped) == 2
    assert rep["failing"].n_events == 0
    assert rep["uniform"].n_events == 60
    assert "failing failed to fit" in caplog.text


def test_impossible_events_counted_not_averaged():
    seq = EventSequence(np.array([0, 1, 2, 3] * 30), np.arange(0, 120, 10), SS)
    blind = MtdgModel.iid(np.array([0.5, 0.5, 0.0, 0.0]), 1, SS)
    rep = rolling_backtest(seq, [FixedModelPredictor(blind, "blind")], 10, 1, 1)
    s = rep["blind"]
    assert s.n_infinite == 10
    assert np.isfinite(s.epe)
    assert s.epe == pytest.approx(2 * np.log(2))


def test_relabeling_invariance(rng):
    model = random_weak_model(3, 2, rng)
    seq = days_of(model, 12, 300, 5)
    perm = np.array([2, 0, 1])  # old state k becomes perm[k]
    inv = np.argsort(perm)
    relabeled = MtdgModel.from_deviation(model.eta[inv], model.a_stack[:, inv][:, :, inv])
    seq2 = EventSequence(perm[seq.states], seq.day_offsets, seq.state_space)
    r1 = rolling_backtest(seq, [FixedModelPredictor(model, "m"), UnconditionalPredictor()])
    r2 = rolling_backtest(seq2, [FixedModelPredictor(relabeled, "m"), UnconditionalPredictor()])
    for name in ("m", "unconditional"):
        assert r1[name].epe == pytest.approx(r2[name].epe, rel=1e-13)
