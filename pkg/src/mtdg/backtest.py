"""Rolling out-of-sample evaluation with the cross-entropy loss."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, MtdgError
from .model import EventSequence, MtdgModel, conditional_distribution, sequence_probabilities
from .moments import estimate_stationary

__all__ = [
    "predict_distribution", "epe_loss", "event_losses", "Predictor", "UniformPredictor",
    "UnconditionalPredictor", "FixedModelPredictor", "GmmPredictor", "MlePredictor",
    "PredictorScore", "EpeReport", "rolling_backtest",
]

log = logging.getLogger(__name__)


def predict_distribution(model: MtdgModel, history) -> np.ndarray:
    """Forecast law of the next state; ``history`` is most recent first."""
    return conditional_distribution(model, history)


def epe_loss(chi_hat, realized: int) -> float:
    """``-2 ln chi_hat[realized]``, ``+inf`` for an event predicted impossible."""
    chi_hat = np.asarray(chi_hat, dtype=float)
    if not 0 <= realized < chi_hat.size:
        raise DomainError(f"realized state {realized} outside 0..{chi_hat.size - 1}")
    if abs(chi_hat.sum() - 1.0) > 1e-9:
        raise DomainError("predicted distribution does not sum to 1")
    prob = chi_hat[realized]
    return float("inf") if prob <= 0 else float(-2.0 * np.log(prob))


def event_losses(model: MtdgModel, states, positions) -> np.ndarray:
    """Vectorized :func:`epe_loss` for the events at ``positions``."""
    prob = sequence_probabilities(model, states, positions)
    out = np.full(prob.shape, np.inf)
    ok = prob > 0
    out[ok] = -2.0 * np.log(prob[ok])
    return out


class Predictor:
    """Turns a training span into a forecasting model."""

    name = "predictor"

    def fit(self, train: EventSequence) -> MtdgModel:
        raise NotImplementedError


class UniformPredictor(Predictor):
    name = "uniform"

    def fit(self, train):
        m = train.state_space.m
        return MtdgModel.iid(np.full(m, 1.0 / m), 1, train.state_space)


class UnconditionalPredictor(Predictor):
    """Training-span state frequencies, ignoring the history."""

    name = "unconditional"

    def __init__(self, symmetrize: bool = False):
        self.symmetrize = symmetrize

    def fit(self, train):
        return MtdgModel.iid(estimate_stationary(train, self.symmetrize), 1, train.state_space)


class FixedModelPredictor(Predictor):
    def __init__(self, model: MtdgModel, name: str = "fixed"):
        self.model = model
        self.name = name

    def fit(self, train):
        return self.model


class GmmPredictor(Predictor):
    def __init__(self, p: int, symmetry: bool = True, **options):
        self.p, self.symmetry, self.options = p, symmetry, options
        self.name = f"gmm_p{p}"

    def fit(self, train):
        from .gmm import fit_gmm

        return fit_gmm(train, self.p, symmetry=self.symmetry, **self.options).model


class MlePredictor(Predictor):
    def __init__(self, p: int, **options):
        self.p, self.options = p, options
        self.name = f"mle_p{p}"

    def fit(self, train):
        from .strong import build_strong_model, fit_mle

        theta, _ = fit_mle(train, self.p, **self.options)
        return build_strong_model(theta, self.p)


@dataclass
class PredictorScore:
    name: str
    epe: float
    stderr: float
    n_events: int
    n_infinite: int
    per_day: list = field(default_factory=list)  # (day index, label, n scored, mean loss, n infinite)

    def to_dict(self) -> dict:
        return {"name": self.name, "epe": self.epe, "stderr": self.stderr,
                "n_events": self.n_events, "n_infinite": self.n_infinite,
                "per_day": [list(r) for r in self.per_day]}


@dataclass
class EpeReport:
    scores: dict
    train_days: int
    test_days: int
    step_days: int
    n_windows: int
    skipped: list = field(default_factory=list)  # (window start day, predictor, reason)

    def __getitem__(self, name) -> PredictorScore:
        return self.scores[name]

    def to_dict(self) -> dict:
        return {"train_days": self.train_days, "test_days": self.test_days,
                "step_days": self.step_days, "n_windows": self.n_windows,
                "skipped": [list(s) for s in self.skipped],
                "scores": {k: v.to_dict() for k, v in self.scores.items()}}


def rolling_backtest(seq: EventSequence, predictors, train_days: int = 10, test_days: int = 1,
                     step_days: int = 1) -> EpeReport:
    """Fit on ``train_days`` days, score the next ``test_days``, slide by ``step_days``.

    A test event is scored when its ``p`` predecessors lie inside the window
    (they may belong to the training span). Events predicted with zero
    probability are counted in ``n_infinite`` and left out of the mean.
    """
    if min(train_days, test_days, step_days) < 1:
        raise DomainError("window sizes must be positive")
    if seq.n_days < train_days + test_days:
        raise DomainError(f"need at least {train_days + test_days} days, got {seq.n_days}")
    names = [p.name for p in predictors]
    if len(set(names)) != len(names):
        raise DomainError(f"predictor names must be unique: {names}")
    starts = list(range(0, seq.n_days - train_days - test_days + 1, step_days))
    losses = {n: [] for n in names}
    per_day = {n: [] for n in names}
    skipped = []
    x = seq.states
    offsets, ends = seq.day_offsets, seq.day_ends
    labels = seq.day_labels
    for s in starts:
        train = seq.select_days(s, s + train_days)
        lo = offsets[s]
        for pred in predictors:
            try:
                model = pred.fit(train)
            except (MtdgError, ArithmeticError, ValueError) as exc:
                log.warning("window at day %d: %s failed to fit: %s", s, pred.name, exc)
                skipped.append((s, pred.name, f"{type(exc).__name__}: {exc}"))
                continue
            for d in range(s + train_days, s + train_days + test_days):
                pos = np.arange(max(offsets[d], lo + model.p), ends[d])
                ev = event_losses(model, x, pos)
                fin = np.isfinite(ev)
                losses[pred.name].append(ev[fin])
                label = str(labels[d]) if labels is not None else str(d)
                per_day[pred.name].append((d, label, int(pos.size),
                                           float(ev[fin].mean()) if fin.any() else float("nan"),
                                           int((~fin).sum())))
    scores = {}
    for n in names:
        allv = np.concatenate(losses[n]) if losses[n] else np.zeros(0)
        n_inf = sum(r[4] for r in per_day[n])
        if allv.size == 0:
            scores[n] = PredictorScore(n, float("nan"), float("nan"), 0, n_inf, per_day[n])
            continue
        se = float(allv.std(ddof=1) / np.sqrt(allv.size)) if allv.size > 1 else float("nan")
        scores[n] = PredictorScore(n, float(allv.mean()), se, int(allv.size), n_inf, per_day[n])
    return EpeReport(scores, train_days, test_days, step_days, len(starts), skipped)
