"""Empirical stationary and bivariate laws, and signed-event correlations."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import BivariateSet, EventSequence, MtdgModel, StateSpace, theoretical_bivariate

__all__ = [
    "BivariateSet", "CorrelationSet", "DayCounts", "day_counts", "estimate_stationary",
    "estimate_bivariate", "bivariate_from_counts", "project_marginals",
    "centrosymmetrize", "signed_event_correlations", "model_correlations",
    "bootstrap_weights", "bootstrap_correlations", "FLAG_PAIRS",
]

FLAG_PAIRS = (("C", "C"), ("C", "NC"), ("NC", "C"), ("NC", "NC"))


@dataclass(frozen=True, eq=False)
class DayCounts:
    """Per-day state counts ``(n_days, m)`` and same-day pair counts
    ``(n_days, K+1, m, m)``; index 0 of the lag axis is unused."""

    states: np.ndarray
    pairs: np.ndarray

    @property
    def n_days(self) -> int:
        return self.states.shape[0]

    def bivariate(self, symmetrize=False, project=None, day_weights=None) -> BivariateSet:
        if day_weights is None:
            s, pr = self.states.sum(axis=0), self.pairs.sum(axis=0)
        else:
            w = np.asarray(day_weights, dtype=float)
            s = w @ self.states
            pr = np.tensordot(w, self.pairs, axes=1)
        return bivariate_from_counts(s, pr, symmetrize, project)


def day_counts(seq: EventSequence, max_lag: int) -> DayCounts:
    m, nd = seq.state_space.m, seq.n_days
    x, ids = seq.states, seq.day_ids()
    states = np.bincount(ids * m + x, minlength=nd * m).reshape(nd, m).astype(float)
    pairs = np.zeros((nd, max_lag + 1, m, m))
    for k in range(1, max_lag + 1):
        if k >= x.size:
            break
        same = ids[:-k] == ids[k:]
        idx = (ids[:-k] * m + x[:-k]) * m + x[k:]
        pairs[:, k] = np.bincount(idx[same], minlength=nd * m * m).reshape(nd, m, m)
    return DayCounts(states, pairs)


def centrosymmetrize(a: np.ndarray) -> np.ndarray:
    """Average with the buy/sell mirror image (reverses the last axes)."""
    if a.ndim == 1:
        return 0.5 * (a + a[::-1])
    return 0.5 * (a + a[..., ::-1, ::-1])


def project_marginals(b: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Closest matrix in Frobenius norm whose row and column sums equal ``eta``.

    Preserves centrosymmetry when ``b`` and ``eta`` have it.
    """
    m = eta.size
    r = eta - b.sum(axis=1)
    c = eta - b.sum(axis=0)
    return b + r[:, None] / m + c[None, :] / m - r.sum() / m**2


def bivariate_from_counts(state_counts, pair_counts, symmetrize=False, project=None) -> BivariateSet:
    if project is None:
        project = symmetrize
    state_counts = np.asarray(state_counts, dtype=float)
    eta = state_counts / state_counts.sum()
    if symmetrize:
        eta = centrosymmetrize(eta)
    K = pair_counts.shape[0] - 1
    m = eta.size
    b = np.empty((K + 1, m, m))
    b[0] = np.diag(eta)
    for k in range(1, K + 1):
        n_k = pair_counts[k].sum()
        if n_k <= 0:
            raise DomainError(f"no same-day pairs at lag {k}")
        bk = pair_counts[k] / n_k
        if symmetrize:
            bk = centrosymmetrize(bk)
        if project:
            bk = project_marginals(bk, eta)
            if symmetrize:
                bk = centrosymmetrize(bk)  # undo rounding asymmetry of the shift
        b[k] = bk
    return BivariateSet(eta, b)


def estimate_stationary(seq: EventSequence, symmetrize: bool = False) -> np.ndarray:
    counts = np.bincount(seq.states, minlength=seq.state_space.m).astype(float)
    if np.any(counts == 0):
        missing = [int(i) for i in np.nonzero(counts == 0)[0]]
        warnings.warn(f"states never observed: {missing}", stacklevel=2)
    eta = counts / counts.sum()
    return centrosymmetrize(eta) if symmetrize else eta


def estimate_bivariate(seq: EventSequence, max_lag: int, symmetrize: bool = False,
                       project: bool | None = None) -> BivariateSet:
    """Same-day pair frequencies, one denominator per lag.

    With ``symmetrize`` the stationary vector and every matrix are averaged
    with their buy/sell mirror image, then (``project``, on by default in that
    case) shifted minimally so rows and columns sum exactly to the
    symmetrized ``eta``.
    """
    return bivariate_from_counts(
        np.bincount(seq.states, minlength=seq.state_space.m),
        day_counts(seq, max_lag).pairs.sum(axis=0),
        symmetrize, project,
    )


@dataclass(frozen=True, eq=False)
class CorrelationSet:
    lags: np.ndarray
    values: dict
    p_c: float
    p_nc: float
    stderr: dict | None = None

    def __getitem__(self, key) -> np.ndarray:
        return self.values[key]

    @property
    def max_lag(self) -> int:
        return int(self.lags[-1])

    def rows(self):
        """``(pi1, pi2, lag, value, stderr)`` tuples in a fixed order."""
        for key in FLAG_PAIRS:
            se = self.stderr[key] if self.stderr is not None else None
            for n, lag in enumerate(self.lags):
                yield (key[0], key[1], int(lag), float(self.values[key][n]),
                       float(se[n]) if se is not None else float("nan"))


def signed_event_correlations(biv: BivariateSet, space: StateSpace) -> CorrelationSet:
    """``C_{pi1,pi2}(l) = E[eps I(pi=pi1) eps' I(pi'=pi2)] / (P(pi1) P(pi2))``."""
    if space.event_map is None:
        raise DomainError("signed-event correlations need the 4-state event map")
    eps = space.signs
    ind = {f: space.flag_mask(f) for f in ("C", "NC")}
    prob = {f: float(biv.eta @ ind[f]) for f in ind}
    lags = np.arange(1, biv.max_lag + 1)
    values = {}
    for f1, f2 in FLAG_PAIRS:
        w1, w2 = eps * ind[f1], eps * ind[f2]
        raw = np.einsum("i,kij,j->k", w1, biv.b[1:], w2)
        values[(f1, f2)] = raw / (prob[f1] * prob[f2])
    return CorrelationSet(lags, values, prob["C"], prob["NC"])


def model_correlations(model: MtdgModel, max_lag: int) -> CorrelationSet:
    return signed_event_correlations(theoretical_bivariate(model, max_lag), model.state_space)


def bootstrap_weights(n_days: int, n_boot: int, rng, block_days: int = 1) -> np.ndarray:
    """Moving-block resampling of days; row ``r`` counts how often each day is drawn."""
    block_days = max(1, min(block_days, n_days))
    n_blocks = -(-n_days // block_days)
    out = np.zeros((n_boot, n_days))
    for r in range(n_boot):
        starts = rng.integers(0, n_days - block_days + 1, size=n_blocks)
        days = (starts[:, None] + np.arange(block_days)[None, :]).ravel()[:n_days]
        out[r] = np.bincount(days, minlength=n_days)
    return out


def bootstrap_correlations(seq: EventSequence, max_lag: int, n_boot: int = 200, seed: int = 0,
                           symmetrize: bool = True, block_days: int = 1) -> CorrelationSet:
    """Empirical correlations with day-block bootstrap standard errors."""
    counts = day_counts(seq, max_lag)
    point = signed_event_correlations(counts.bivariate(symmetrize), seq.state_space)
    if n_boot < 2 or seq.n_days < 2:
        return point
    rng = np.random.default_rng(seed)
    reps = {k: [] for k in FLAG_PAIRS}
    for w in bootstrap_weights(seq.n_days, n_boot, rng, block_days):
        c = signed_event_correlations(counts.bivariate(symmetrize, day_weights=w), seq.state_space)
        for k in FLAG_PAIRS:
            reps[k].append(c[k])
    se = {k: np.std(np.array(v), axis=0, ddof=1) for k, v in reps.items()}
    return CorrelationSet(point.lags, point.values, point.p_c, point.p_nc, se)
