"""Signature plot of the large-tick price process and correlation comparisons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import MtdgModel, simulate
from .moments import FLAG_PAIRS, CorrelationSet, estimate_bivariate, signed_event_correlations
from .seeding import sub_seed

__all__ = [
    "SignatureConfig", "signature_plot", "diffusivity_increments", "increment_closed_form",
    "fit_dlf", "ComparisonTable", "correlation_report", "replica_correlations",
]


@dataclass(frozen=True)
class SignatureConfig:
    """``g_c1``: impact of a price-changing event; ``d_lf``: low-frequency offset."""

    g_c1: float
    d_lf: float = 0.0
    max_lag: int = 100

    def __post_init__(self):
        if not np.isfinite(self.g_c1):
            raise DomainError("g_c1 must be finite")
        if not np.isfinite(self.d_lf):
            raise DomainError("d_lf must be finite")
        if self.max_lag < 1:
            raise DomainError("max_lag must be at least 1")


def _cc_values(corr: CorrelationSet, n: int) -> np.ndarray:
    """``C_{C,C}(1..n)``; raises when the set stops short."""
    if n == 0:
        return np.zeros(0)
    lags = np.asarray(corr.lags)
    if lags.size < n or not np.array_equal(lags[:n], np.arange(1, n + 1)):
        raise DomainError(f"correlation set must hold C_CC at lags 1..{n}")
    return np.asarray(corr[("C", "C")][:n], dtype=float)


def signature_plot(corr: CorrelationSet, cfg: SignatureConfig) -> np.ndarray:
    """``D(l)`` for ``l = 1..max_lag``.

    ``D(l) = D_LF + G^2 P + (2 G^2 / l) P^2 sum_{d=1}^{l-1} (l - d) C_CC(d)``,
    which is the double sum over ordered event pairs inside a window of ``l``
    events collapsed by lag.
    """
    L = cfg.max_lag
    c = _cc_values(corr, L - 1)
    g2, pc = cfg.g_c1 ** 2, float(corr.p_c)
    ell = np.arange(1, L + 1, dtype=float)
    # sum_{d<l} (l-d) C(d) = l * S1(l-1) - S2(l-1), S1 = cumsum C, S2 = cumsum d C
    s1 = np.concatenate([[0.0], np.cumsum(c)])
    s2 = np.concatenate([[0.0], np.cumsum(np.arange(1, L) * c)])
    pair_sum = ell * s1 - s2
    return cfg.d_lf + g2 * pc + 2.0 * g2 * pc**2 * pair_sum / ell


def diffusivity_increments(d) -> np.ndarray:
    """``D(l+1)(l+1) - D(l) l`` for ``l = 1..len(D)-1``."""
    d = np.asarray(d, dtype=float)
    if d.size < 2:
        raise DomainError("need at least two points")
    ell = np.arange(1, d.size + 1, dtype=float)
    return np.diff(d * ell)


def increment_closed_form(corr: CorrelationSet, cfg: SignatureConfig) -> np.ndarray:
    """``D_LF + G^2 P + 2 G^2 P^2 sum_{n<=l} C_CC(n)`` for ``l = 1..max_lag-1``."""
    c = _cc_values(corr, cfg.max_lag - 1)
    g2, pc = cfg.g_c1 ** 2, float(corr.p_c)
    return cfg.d_lf + g2 * pc + 2.0 * g2 * pc**2 * np.cumsum(c)


def fit_dlf(d_empirical, corr_model: CorrelationSet, cfg: SignatureConfig, lags=None) -> float:
    """Least-squares offset between an empirical signature plot and the model's.

    ``d_empirical[k]`` belongs to lag ``lags[k]`` (default ``1..len``). The
    offset enters additively, so the fit is the mean residual; ``cfg.d_lf`` is
    ignored.
    """
    d_emp = np.asarray(d_empirical, dtype=float)
    lags = np.arange(1, d_emp.size + 1) if lags is None else np.asarray(lags, dtype=int)
    if lags.shape != d_emp.shape:
        raise DomainError("lags and empirical values differ in length")
    keep = (lags >= 1) & (lags <= cfg.max_lag)
    if not np.any(keep):
        raise DomainError("no common lags between empirical and model series")
    model = signature_plot(corr_model, SignatureConfig(cfg.g_c1, 0.0, cfg.max_lag))
    return float(np.mean(d_emp[keep] - model[lags[keep] - 1]))


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    lags: np.ndarray
    empirical: dict
    model: dict
    stderr: dict
    z: dict

    def rows(self):
        """``(pi1, pi2, lag, empirical, model, stderr, z)``."""
        for key in FLAG_PAIRS:
            for n, lag in enumerate(self.lags):
                yield (key[0], key[1], int(lag), float(self.empirical[key][n]),
                       float(self.model[key][n]), float(self.stderr[key][n]), float(self.z[key][n]))

    def z_values(self) -> np.ndarray:
        return np.concatenate([self.z[k] for k in FLAG_PAIRS])


def replica_correlations(model: MtdgModel, n_events: int, max_lag: int, n_mc: int, seed: int,
                         day_length: int | None = None, symmetrize: bool = True) -> list:
    """Empirical correlation sets of ``n_mc`` independent simulations of ``model``."""
    out = []
    for r in range(n_mc):
        seq = simulate(model, n_events, sub_seed(seed, r), day_length=day_length)
        biv = estimate_bivariate(seq, max_lag, symmetrize=symmetrize)
        out.append(signed_event_correlations(biv, model.state_space))
    return out


def correlation_report(empirical: CorrelationSet, model: CorrelationSet,
                       replicas: list | None = None) -> ComparisonTable:
    """Cell-wise comparison with z-scores.

    The standard error is the spread of ``replicas`` (correlation sets of
    simulated data the size of the empirical sample). Without replicas the
    empirical set's own standard errors are used, and failing that the
    z-scores are NaN. A zero difference always scores 0.
    """
    if not np.array_equal(empirical.lags, model.lags):
        raise DomainError("empirical and model correlations are on different lag grids")
    se = {}
    if replicas:
        for rep in replicas:
            if not np.array_equal(rep.lags, empirical.lags):
                raise DomainError("replica correlations are on a different lag grid")
        for key in FLAG_PAIRS:
            vals = np.array([rep[key] for rep in replicas])
            se[key] = vals.std(axis=0, ddof=1) if len(replicas) > 1 else np.full(vals.shape[1], np.nan)
    elif empirical.stderr is not None:
        se = {k: np.asarray(empirical.stderr[k], dtype=float) for k in FLAG_PAIRS}
    else:
        se = {k: np.full(empirical.lags.size, np.nan) for k in FLAG_PAIRS}
    z = {}
    for key in FLAG_PAIRS:
        diff = np.asarray(empirical[key]) - np.asarray(model[key])
        with np.errstate(divide="ignore", invalid="ignore"):
            zk = diff / se[key]
        zk[diff == 0] = 0.0
        z[key] = zk
    return ComparisonTable(np.asarray(empirical.lags), {k: np.asarray(empirical[k]) for k in FLAG_PAIRS},
                           {k: np.asarray(model[k]) for k in FLAG_PAIRS}, se, z)
