"""Strongly constrained 11-parameter MTDg and its maximum-likelihood fit.

Lag weights follow a normalized power law ``lam_g ~ g**-beta``. Each lag
matrix is ``Q^g = Q + Q~^g`` where ``Q`` is built from two base levels
``B1, B2`` (with ``A_r = 1/2 - B_r``) and ``Q~^g`` carries four amplitudes
``mu1, nu1, mu2, nu2`` damped at rates ``alpha_11, alpha_12, alpha_21,
alpha_22``. The box

    0 <= B_r <= 1/2,  |mu_r| <= B_r,  |nu_r| <= 1/2 - B_r,  alpha >= 0

keeps every row stochastic; here it is enforced with margin ``eps_feas``.
States follow the signed-event order (sell C, sell NC, buy NC, buy C).
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, NumericError, OptimizationError
from .model import (EPS_FEAS, EventSequence, MtdgModel, StateSpace, _loglik_grad_kernel,
                    _loglik_kernel, sequence_log_likelihood)

BETA_MAX = 10.0
PARAM_NAMES = ("beta", "B1", "B2", "mu1", "mu2", "nu1", "nu2",
               "alpha11", "alpha12", "alpha21", "alpha22")


@dataclass(frozen=True)
class StrongParams:
    beta: float
    B1: float
    B2: float
    mu1: float
    mu2: float
    nu1: float
    nu2: float
    alpha11: float = 0.0
    alpha12: float = 0.0
    alpha21: float = 0.0
    alpha22: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES])

    @classmethod
    def from_array(cls, v) -> "StrongParams":
        return cls(*(float(x) for x in v))

    def to_dict(self) -> dict:
        return asdict(self)

    def violations(self, eps_feas: float = EPS_FEAS) -> list:
        out = []
        if not 0.0 <= self.beta <= BETA_MAX:
            out.append(f"beta={self.beta} outside [0, {BETA_MAX}]")
        for r, (b, mu, nu) in enumerate(((self.B1, self.mu1, self.nu1),
                                         (self.B2, self.mu2, self.nu2)), start=1):
            if not eps_feas <= b <= 0.5 - eps_feas:
                out.append(f"B{r}={b} outside [eps, 1/2 - eps]")
            if abs(mu) > b - eps_feas:
                out.append(f"|mu{r}|={abs(mu)} exceeds B{r} - eps = {b - eps_feas}")
            if abs(nu) > 0.5 - b - eps_feas:
                out.append(f"|nu{r}|={abs(nu)} exceeds 1/2 - B{r} - eps = {0.5 - b - eps_feas}")
        for n in PARAM_NAMES[7:]:
            if getattr(self, n) < 0:
                out.append(f"{n}={getattr(self, n)} is negative")
        return out

    def check(self, eps_feas: float = EPS_FEAS) -> None:
        v = self.violations(eps_feas)
        if v:
            raise DomainError("strong parameters violate bounds: " + "; ".join(v))


def power_law_weights(beta: float, p: int) -> np.ndarray:
    w = np.arange(1, p + 1, dtype=float) ** -beta
    return w / w.sum()


def strong_eta(B1: float, B2: float) -> np.ndarray:
    den = 1 - 2 * B1 + 2 * B2
    e1 = B2 / den
    e2 = (1 - 2 * B1) / (2 * den)
    return np.array([e1, e2, e2, e1])


def strong_matrices(theta: StrongParams, p: int):
    """``(Q, Q~ stack)`` of the parametrization."""
    A1, A2 = 0.5 - theta.B1, 0.5 - theta.B2
    base = np.array([
        [theta.B1, A1, A1, theta.B1],
        [theta.B2, A2, A2, theta.B2],
        [theta.B2, A2, A2, theta.B2],
        [theta.B1, A1, A1, theta.B1],
    ])
    g = np.arange(1, p + 1, dtype=float)
    m1 = theta.mu1 * np.exp(-theta.alpha11 * g)
    n1 = theta.nu1 * np.exp(-theta.alpha12 * g)
    m2 = theta.mu2 * np.exp(-theta.alpha21 * g)
    n2 = theta.nu2 * np.exp(-theta.alpha22 * g)
    dev = np.stack([
        np.stack([-m1, -n1, n1, m1], axis=-1),
        np.stack([m2, n2, -n2, -m2], axis=-1),
        np.stack([-m2, -n2, n2, m2], axis=-1),
        np.stack([m1, n1, -n1, -m1], axis=-1),
    ], axis=1)
    return base, dev


def build_strong_model(theta: StrongParams, p: int, eps_feas: float = EPS_FEAS) -> MtdgModel:
    theta.check(eps_feas)
    base, dev = strong_matrices(theta, p)
    return MtdgModel.from_mixture(power_law_weights(theta.beta, p), base[None] + dev,
                                  strong_eta(theta.B1, theta.B2), StateSpace.signed_events())


def extract_strong(model: MtdgModel) -> StrongParams:
    """Recover the 11 parameters from a model built by :func:`build_strong_model`."""
    lam, q = model.lam, model.q_stack
    p = model.p
    beta = 0.0 if p == 1 else float(np.log(lam[0] / lam[1]) / np.log(2.0))
    B1 = 0.5 * (q[0, 0, 0] + q[0, 0, 3])
    B2 = 0.5 * (q[0, 1, 0] + q[0, 1, 3])
    amp = {
        "mu1": 0.5 * (q[:, 0, 3] - q[:, 0, 0]),
        "nu1": 0.5 * (q[:, 0, 2] - q[:, 0, 1]),
        "mu2": 0.5 * (q[:, 1, 0] - q[:, 1, 3]),
        "nu2": 0.5 * (q[:, 1, 1] - q[:, 1, 2]),
    }
    vals, rates = {}, {}
    for name, rate in zip(("mu1", "nu1", "mu2", "nu2"), ("alpha11", "alpha12", "alpha21", "alpha22")):
        a = amp[name]
        if p >= 2 and a[0] != 0 and a[1] != 0:
            r = float(np.log(a[0] / a[1]))
        else:
            r = 0.0
        rates[rate] = r
        vals[name] = float(a[0] * np.exp(r))
    return StrongParams(beta, float(B1), float(B2), vals["mu1"], vals["mu2"], vals["nu1"],
                        vals["nu2"], rates["alpha11"], rates["alpha12"], rates["alpha21"],
                        rates["alpha22"])


def log_likelihood(theta: StrongParams, p: int, seq: EventSequence,
                   eps_feas: float = EPS_FEAS) -> float:
    """Conditional log-likelihood; windows of ``p + 1`` events never cross days."""
    model = build_strong_model(theta, p, eps_feas)
    pos = seq.within_day_positions(p)
    if pos.size == 0:
        raise DomainError(f"no day has more than p={p} events")
    ll = sequence_log_likelihood(model, seq.states, pos)
    if not np.isfinite(ll):
        raise NumericError("non-positive conditional probability")
    return ll


def _weights_from_z(z, p, eps):
    """``lam_g * Q^g`` as a plain array expression of the box coordinates.

    Written without validation or float coercion so that it accepts complex
    input; the complex-step derivative of this map is exact.
    """
    beta, B1, B2, s1, s2, t1, t2, a11, a12, a21, a22 = z
    mu1, mu2 = s1 * (B1 - eps), s2 * (B2 - eps)
    nu1, nu2 = t1 * (0.5 - B1 - eps), t2 * (0.5 - B2 - eps)
    g = np.arange(1, p + 1, dtype=float)
    lam = g ** -beta
    lam = lam / lam.sum()
    m1, n1 = mu1 * np.exp(-a11 * g), nu1 * np.exp(-a12 * g)
    m2, n2 = mu2 * np.exp(-a21 * g), nu2 * np.exp(-a22 * g)
    A1, A2 = 0.5 - B1, 0.5 - B2
    one = np.ones(p)
    r1 = np.stack([B1 - m1, A1 - n1, A1 + n1, B1 + m1], axis=-1)
    r2 = np.stack([B2 + m2, A2 + n2, A2 - n2, B2 - m2], axis=-1)
    r3 = np.stack([B2 - m2, A2 - n2, A2 + n2, B2 + m2], axis=-1)
    r4 = np.stack([B1 + m1, A1 + n1, A1 - n1, B1 - m1], axis=-1)
    q = np.stack([r1, r2, r3, r4], axis=1) * one[:, None, None]
    return lam[:, None, None] * q


def _weights_jacobian(z, p, eps, h=1e-20):
    """``d W / d z`` of shape ``(11, p, 4, 4)`` by complex step."""
    jac = np.empty((z.size, p, 4, 4))
    for k in range(z.size):
        zc = z.astype(complex)
        zc[k] += 1j * h
        jac[k] = _weights_from_z(zc, p, eps).imag / h
    return jac


# --- box reparametrization ---------------------------------------------------
# z = (beta, B1, B2, s1, s2, t1, t2, alpha11..alpha22) with
# mu_r = s_r (B_r - eps), nu_r = t_r (1/2 - B_r - eps), s, t in [-1, 1].


def _box(eps):
    return [(0.0, BETA_MAX), (eps, 0.5 - eps), (eps, 0.5 - eps),
            (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)] + [(0.0, None)] * 4


def _to_theta(z, eps):
    beta, B1, B2, s1, s2, t1, t2 = z[:7]
    return np.array([beta, B1, B2, s1 * (B1 - eps), s2 * (B2 - eps),
                     t1 * (0.5 - B1 - eps), t2 * (0.5 - B2 - eps), *z[7:]])


def _to_z(theta: StrongParams, eps):
    def ratio(x, lim):
        return 0.0 if lim <= 0 else float(np.clip(x / lim, -1, 1))

    return np.array([theta.beta, theta.B1, theta.B2,
                     ratio(theta.mu1, theta.B1 - eps), ratio(theta.mu2, theta.B2 - eps),
                     ratio(theta.nu1, 0.5 - theta.B1 - eps), ratio(theta.nu2, 0.5 - theta.B2 - eps),
                     theta.alpha11, theta.alpha12, theta.alpha21, theta.alpha22])


def _clip_z(z, box):
    lo = np.array([b[0] for b in box])
    hi = np.array([np.inf if b[1] is None else b[1] for b in box])
    return np.clip(z, lo, hi)


@dataclass
class MleReport:
    params: StrongParams
    log_likelihood: float
    p: int
    n_windows: int
    iterations: int
    evaluations: int
    winner: int
    start_values: list
    boundary: list
    converged: bool
    seconds: float
    extra: dict = field(default_factory=dict)

    @property
    def on_boundary(self) -> bool:
        return bool(self.boundary)

    def to_dict(self) -> dict:
        return {
            "schema": "mtdg-mle-fit", "version": 1,
            "p": self.p, "params": self.params.to_dict(),
            "log_likelihood": self.log_likelihood,
            "n_windows": self.n_windows,
            "iterations": self.iterations, "evaluations": self.evaluations,
            "winner_start": self.winner, "start_log_likelihoods": self.start_values,
            "boundary": self.boundary, "converged": self.converged,
            "seconds": self.seconds, **self.extra,
        }


def fit_mle(seq: EventSequence, p: int, starts: int = 8, seed: int = 0,
            eps_feas: float = EPS_FEAS, tol: float = 1e-8, maxiter: int = 5000,
            restarts: int = 2, method: str = "L-BFGS-B") -> tuple[StrongParams, MleReport]:
    """Multi-start maximization of the conditional log-likelihood.

    The search runs in box coordinates (``mu``, ``nu`` as fractions of their
    limits), so every iterate is a valid chain. ``method`` is ``"L-BFGS-B"``
    (exact gradient) or ``"Nelder-Mead"`` (derivative-free, much slower).
    Start 0 is the centre of the box; the others are drawn from ``seed``. A
    start is relaunched from its optimum while that still gains more than
    ``tol`` in log-likelihood, at most ``restarts`` times. The best start
    wins; ties go to the lowest index.
    """
    if len(seq) < 100 * p:
        raise DomainError(f"need at least {100 * p} events for p={p}")
    if seq.state_space.m != 4:
        raise DomainError("the strong parametrization needs the 4-state signed-event chain")
    if method not in ("L-BFGS-B", "Nelder-Mead"):
        raise DomainError(f"unknown method {method!r}")
    t0 = time.perf_counter()
    pos = seq.within_day_positions(p)
    if pos.size == 0:
        raise DomainError(f"no day has more than p={p} events")
    x = np.ascontiguousarray(seq.states)
    zero = np.zeros(4)
    box = _box(eps_feas)
    scale = 1.0 / pos.size  # optimize the mean log-likelihood per event
    rng = np.random.default_rng(seed)

    def objective(z):
        z = _clip_z(z, box)
        ll = _loglik_kernel(zero, _weights_from_z(z, p, eps_feas), x, pos)
        return -ll * scale if np.isfinite(ll) else np.inf

    def objective_grad(z):
        z = _clip_z(z, box)
        ll, gw = _loglik_grad_kernel(_weights_from_z(z, p, eps_feas), x, pos)
        if not np.isfinite(ll):
            return np.inf, np.zeros(z.size)
        grad = np.tensordot(_weights_jacobian(z, p, eps_feas), gw, axes=3)
        return -ll * scale, -grad * scale

    inits = [np.array([1.0, 0.25, 0.25, 0, 0, 0, 0, 0.1, 0.1, 0.1, 0.1])]
    for _ in range(1, starts):
        inits.append(np.concatenate([
            [rng.uniform(0.2, 3.0)], rng.uniform(0.05, 0.45, 2),
            rng.uniform(-0.9, 0.9, 4), rng.uniform(0.0, 1.0, 4)]))

    ftol = tol * scale
    results = []
    total_it = total_ev = 0
    for z0 in inits:
        z, fz, conv = z0, objective(z0), False
        if not np.isfinite(fz):
            results.append((np.inf, z0, False))
            continue
        for _ in range(restarts + 1):
            if method == "L-BFGS-B":
                res = minimize(objective_grad, z, jac=True, method="L-BFGS-B", bounds=box,
                               options=dict(ftol=ftol / max(abs(fz), 1.0), gtol=1e-10,
                                            maxiter=maxiter, maxcor=20))
            else:
                res = minimize(objective, z, method="Nelder-Mead", bounds=box,
                               options=dict(fatol=ftol, xatol=1e-8, maxiter=maxiter,
                                            maxfev=2 * maxiter, adaptive=True))
            total_it += res.nit
            total_ev += res.nfev
            gain = fz - res.fun
            if res.fun <= fz:
                z, fz = _clip_z(res.x, box), float(res.fun)
            conv = bool(res.success) or gain <= ftol
            if gain <= ftol:
                break
        results.append((fz, z, conv))

    if not any(np.isfinite(r[0]) for r in results):
        raise OptimizationError("no feasible start produced a finite likelihood")
    winner = min(range(len(results)), key=lambda k: (results[k][0], k))
    fz, z, conv = results[winner]
    theta = StrongParams.from_array(_to_theta(z, eps_feas))
    boundary = []
    for name, val, (lo, hi) in zip(("beta", "B1", "B2", "mu1/B1", "mu2/B2", "nu1/A1", "nu2/A2",
                                    *PARAM_NAMES[7:]), z, box):
        width = 1.0 if hi is None else hi - lo
        if val - lo <= 1e-6 * width or (hi is not None and hi - val <= 1e-6 * width):
            boundary.append(name)
    report = MleReport(
        theta, -fz / scale, p, int(pos.size), total_it, total_ev,
        winner, [(-r[0] / scale if np.isfinite(r[0]) else None) for r in results], boundary, conv,
        time.perf_counter() - t0, {"method": method},
    )
    return theta, report
