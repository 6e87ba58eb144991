"""Weakly constrained MTDg: moment matching on the bivariate Yule-Walker system.

The unknowns are the free entries of the deviation matrices ``A^g``; the
remaining entries follow from zero row sums and ``eta @ A^g = 0``. For the
4-state signed-event chain with buy/sell symmetry there are 5 free entries
per lag:

    A = [[ a11,  a12, -a12 - c(a22+a23), -a11 + c(a22+a23)],
         [ a21,  a22,  a23,              -a21 - a22 - a23 ],
         [-a21 - a22 - a23,  a23,  a22,   a21              ],
         [-a11 + c(a22+a23), -a12 - c(a22+a23), a12, a11   ]]

with ``c = eta_2 / eta_1``. Equations use the matching free entries of
``B(k) - eta^T eta`` (b11, b12, b21, b22, b32). Without symmetry, the free
entries are the leading ``(m-1) x (m-1)`` block of each matrix.

Slots are 0-based ``(i, j)``; lags ``k`` and ``g`` are 1-based. Both the
equation and the parameter vectors are ordered lag-major, then ``i``, then
``j``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IdentifiabilityError, OptimizationError
from .model import EPS_FEAS, BivariateSet, EventSequence, MtdgModel
from .moments import bootstrap_weights, day_counts

CENTRO_PARAM_SLOTS = ((0, 0), (0, 1), (1, 0), (1, 1), (1, 2))
CENTRO_EQ_SLOTS = ((0, 0), (0, 1), (1, 0), (1, 1), (2, 1))
COND_LIMIT = 1e12


def centro_deviation(v, c2: float) -> np.ndarray:
    """Full 4x4 deviation matrix from its 5 free entries."""
    a11, a12, a21, a22, a23 = v
    s = c2 * (a22 + a23)
    return np.array([
        [a11, a12, -a12 - s, -a11 + s],
        [a21, a22, a23, -a21 - a22 - a23],
        [-a21 - a22 - a23, a23, a22, a21],
        [-a11 + s, -a12 - s, a12, a11],
    ])


def deviation_basis(eta, symmetry: bool):
    """``(param_slots, eq_slots, basis)`` with ``A = sum_s q_s basis[s]``."""
    eta = np.asarray(eta, dtype=float)
    m = eta.size
    if symmetry:
        if m != 4:
            raise DomainError("centrosymmetric parametrization is defined for m = 4 only")
        c2 = eta[1] / eta[0]
        basis = np.array([centro_deviation(e, c2) for e in np.eye(5)])
        return CENTRO_PARAM_SLOTS, CENTRO_EQ_SLOTS, basis
    slots = tuple((i, j) for i in range(m - 1) for j in range(m - 1))
    c = eta / eta[-1]
    basis = np.zeros((len(slots), m, m))
    for s, (i, j) in enumerate(slots):
        basis[s, i, j] = 1.0
        basis[s, i, m - 1] = -1.0
        basis[s, m - 1, j] = -c[i]
        basis[s, m - 1, m - 1] = c[i]
    return slots, slots, basis


@dataclass(frozen=True, eq=False)
class GmmSystem:
    d: np.ndarray
    K: np.ndarray
    eq_index: tuple
    param_index: tuple
    basis: np.ndarray
    eta: np.ndarray
    p: int
    symmetry: bool

    @property
    def m(self) -> int:
        return self.eta.size

    @property
    def shape(self):
        return self.K.shape

    def expand(self, q) -> np.ndarray:
        """Parameter vector -> full deviation stack ``(p, m, m)``."""
        q = np.asarray(q, dtype=float).reshape(self.p, -1)
        return np.einsum("gs,sij->gij", q, self.basis)

    def extract(self, a_stack) -> np.ndarray:
        a = np.asarray(a_stack, dtype=float)
        return np.array([a[g - 1, i, j] for g, i, j in self.param_index])

    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.K))

    def condition(self) -> float:
        return float(np.linalg.cond(self.K))


def _check_margins(biv: BivariateSet, p: int, tol: float):
    eta = biv.eta
    for k in range(1, p + 1):
        b = biv.lag(k)
        err = max(np.abs(b.sum(axis=1) - eta).max(), np.abs(b.sum(axis=0) - eta).max())
        if err > tol:
            raise DomainError(
                f"B({k}) marginals differ from eta by {err:.3g}; "
                "estimate with project=True or symmetrize=True"
            )


def build_gmm_system(biv: BivariateSet, p: int, symmetry: bool = True,
                     marginal_tol: float = 1e-8) -> GmmSystem:
    if biv.max_lag < p:
        raise DomainError(f"need bivariate laws up to lag {p}, have {biv.max_lag}")
    eta = np.asarray(biv.eta, dtype=float)
    _check_margins(biv, p, marginal_tol)
    if symmetry:
        if biv.m != 4:
            raise DomainError("centrosymmetric parametrization is defined for m = 4 only")
        asym = max(np.abs(eta - eta[::-1]).max(),
                   max(np.abs(biv.lag(k) - biv.lag(k)[::-1, ::-1]).max() for k in range(1, p + 1)))
        if asym > marginal_tol:
            raise DomainError(f"bivariate laws are not centrosymmetric (error {asym:.3g})")
    pslots, eslots, basis = deviation_basis(eta, symmetry)
    ns, ne = len(pslots), len(eslots)
    ei = np.array([i for i, _ in eslots])
    ej = np.array([j for _, j in eslots])
    # one product per lag difference r = k - g
    prods = {r: np.einsum("ih,shj->sij", biv.lag(r), basis)[:, ei, ej].T
             for r in range(1 - p, p)}
    K = np.zeros((p * ne, p * ns))
    for k in range(1, p + 1):
        for g in range(1, p + 1):
            K[(k - 1) * ne:k * ne, (g - 1) * ns:g * ns] = prods[k - g]
    d = np.concatenate([biv.centered(k)[ei, ej] for k in range(1, p + 1)])
    eq_index = tuple((k, i, j) for k in range(1, p + 1) for i, j in eslots)
    param_index = tuple((g, i, j) for g in range(1, p + 1) for i, j in pslots)
    return GmmSystem(d, K, eq_index, param_index, basis, eta, p, symmetry)


@dataclass
class Feasibility:
    ok: bool
    upper: np.ndarray
    lower: np.ndarray

    @property
    def min_slack(self) -> float:
        return float(min(self.upper.min(), self.lower.min()))


def feasibility_check(a_stack, eta, eps_feas: float = EPS_FEAS) -> Feasibility:
    """Slacks of ``eta_i + sum_g max_h a^g_{h,i} <= 1 - eps`` and
    ``eta_i + sum_g min_h a^g_{h,i} >= eps``."""
    a = np.asarray(a_stack, dtype=float)
    eta = np.asarray(eta, dtype=float)
    upper = 1.0 - eps_feas - eta - a.max(axis=1).sum(axis=0)
    lower = eta + a.min(axis=1).sum(axis=0) - eps_feas
    return Feasibility(bool(upper.min() >= 0 and lower.min() >= 0), upper, lower)


def max_constraint(a_stack) -> np.ndarray:
    """``sum_g max_h a^g_{h,i}`` for every state ``i`` (convex in ``a``)."""
    return np.asarray(a_stack).max(axis=1).sum(axis=0)


def min_constraint(a_stack) -> np.ndarray:
    """``sum_g min_h a^g_{h,i}`` (concave in ``a``)."""
    return np.asarray(a_stack).min(axis=1).sum(axis=0)


@dataclass
class Factorization:
    lam: np.ndarray
    q_tilde: np.ndarray
    q21: float

    def recompose(self) -> np.ndarray:
        return self.lam[:, None, None] * self.q_tilde


@dataclass
class GmmFit:
    model: MtdgModel
    q: np.ndarray
    system: GmmSystem
    residual: float
    unconstrained_feasible: bool
    constrained: bool
    feasibility: Feasibility
    condition: float
    rank: int
    ridge: float
    status: str
    trace: dict = field(default_factory=dict)
    factorization: Factorization | None = None
    stderr: np.ndarray | None = None

    @property
    def a_stack(self) -> np.ndarray:
        return self.model.a_stack

    def to_trace(self) -> dict:
        return {
            "schema": "mtdg-gmm-trace", "version": 1,
            "p": self.system.p, "m": self.system.m, "symmetry": self.system.symmetry,
            "n_equations": self.system.K.shape[0], "n_parameters": self.system.K.shape[1],
            "rank": self.rank, "condition": self.condition, "ridge": self.ridge,
            "residual": self.residual, "unconstrained_feasible": self.unconstrained_feasible,
            "constrained": self.constrained, "status": self.status,
            "upper_slack": self.feasibility.upper.tolist(),
            "lower_slack": self.feasibility.lower.tolist(),
            **self.trace,
        }


def _pull_inside(system, q, eps_feas):
    """Largest ``t <= 1`` with ``t q`` feasible; the constraint functions are
    positively homogeneous so this is a closed-form scalar."""
    a = system.expand(q)
    eta = system.eta
    hi, lo = max_constraint(a), min_constraint(a)
    t = 1.0
    for i in range(eta.size):
        if hi[i] > 0:
            t = min(t, (1 - eps_feas - eta[i]) / hi[i])
        if lo[i] < 0:
            t = min(t, (eta[i] - eps_feas) / -lo[i])
    return q * max(t, 0.0)


def _solve_qp(system, ridge, eps_feas, solver):
    import cvxpy as cp

    p, m = system.p, system.m
    ns = system.basis.shape[0]
    scale = max(float(system.d @ system.d), 1e-30)
    Ks, ds = system.K / np.sqrt(scale), system.d / np.sqrt(scale)
    q = cp.Variable(p * ns)
    u = cp.Variable((p, m))
    lo = cp.Variable((p, m))
    aflat = cp.reshape(q, (p, ns), order="C") @ system.basis.reshape(ns, m * m)
    cons = []
    for h in range(m):
        cons += [aflat[:, h * m:(h + 1) * m] <= u, aflat[:, h * m:(h + 1) * m] >= lo]
    cons += [cp.sum(u, axis=0) <= 1 - system.eta - eps_feas,
             cp.sum(lo, axis=0) >= eps_feas - system.eta]
    obj = cp.sum_squares(Ks @ q - ds)
    if ridge > 0:
        obj = obj + (ridge / scale) * cp.sum_squares(q)
    prob = cp.Problem(cp.Minimize(obj), cons)
    opts = {}
    if solver == "CLARABEL":
        opts = dict(tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12, max_iter=500)
    t0 = time.perf_counter()
    try:
        prob.solve(solver=solver, **opts)
    except cp.error.SolverError as exc:
        raise OptimizationError(f"QP solver failed: {exc}") from exc
    info = {"solver": solver, "solve_seconds": time.perf_counter() - t0,
            "solver_status": prob.status,
            "iterations": getattr(prob.solver_stats, "num_iters", None)}
    if q.value is None or prob.status not in ("optimal", "optimal_inaccurate"):
        raise OptimizationError(f"QP solver returned status {prob.status!r}")
    return np.asarray(q.value), info


def solve_weakly_constrained(system: GmmSystem, eps_feas: float = EPS_FEAS,
                             solver: str = "CLARABEL", factorize: bool = True) -> GmmFit:
    """Minimize ``||d - K q||^2`` subject to the 2m extreme-history bounds.

    The unconstrained least-squares solution is returned directly when it is
    feasible. Otherwise the max/min bounds are rewritten with epigraph
    variables (``u[g,i] >= a^g_{h,i} >= l[g,i]`` for all ``h``) and the
    resulting convex QP is solved.
    """
    eta = system.eta
    if np.any(eta <= eps_feas) or np.any(eta >= 1 - eps_feas):
        raise DomainError("eta must lie strictly inside (eps_feas, 1 - eps_feas)")
    K, d = system.K, system.d
    n = K.shape[1]
    cond = system.condition()
    rank = system.rank()
    ridge = 0.0
    if rank < n or not np.isfinite(cond) or cond > COND_LIMIT:
        ridge = 1e-10 * float(np.trace(K.T @ K)) / n
        q0 = np.linalg.solve(K.T @ K + ridge * np.eye(n), K.T @ d)
    else:
        q0 = np.linalg.lstsq(K, d, rcond=None)[0]
    feas0 = feasibility_check(system.expand(q0), eta, eps_feas)
    trace = {}
    if feas0.ok:
        q, status, constrained = q0, "unconstrained_optimum_feasible", False
    else:
        q, trace = _solve_qp(system, ridge, eps_feas, solver)
        q = _pull_inside(system, q, eps_feas)
        status, constrained = "constrained_optimum", True
    a = system.expand(q)
    feas = feasibility_check(a, eta, eps_feas)
    if not feas.ok:
        raise OptimizationError(f"solution infeasible (min slack {feas.min_slack:.3g})")
    resid = float(np.sum((d - K @ q) ** 2))
    fac = None
    lam = None
    if factorize:
        try:
            fac = factorize_identifiable(a)
            if np.all(fac.lam != 0):
                lam = fac.lam
        except IdentifiabilityError:
            fac = None
    model = MtdgModel.from_deviation(eta, a, lam=lam, state_space=None)
    return GmmFit(model, q, system, resid, feas0.ok, constrained, feas, cond, rank,
                  ridge, status, trace, fac)


def factorize_identifiable(a_stack, q21: float = 1.0, normalize: bool = True) -> Factorization:
    """Split ``A^g = lam_g Q~^g`` by holding ``Q~^g[1, 0]`` (state 2 -> 1) fixed.

    With ``normalize`` the weights are rescaled to sum to one and ``q21``
    becomes ``sum_g A^g[1, 0]``; otherwise ``q21`` is used as given.
    """
    a = np.asarray(a_stack, dtype=float)
    pivot = a[:, 1, 0]
    zero = np.nonzero(pivot == 0)[0]
    if zero.size:
        raise IdentifiabilityError(f"A[{zero[0] + 1}][2,1] is zero; cannot normalize on that slot")
    if normalize:
        q21 = float(pivot.sum())
        if q21 == 0:
            raise IdentifiabilityError("sum_g A^g[2,1] is zero; weights cannot sum to one")
    elif q21 == 0:
        raise IdentifiabilityError("normalization constant must be nonzero")
    lam = pivot / q21
    return Factorization(lam, a / lam[:, None, None], q21)


def fit_gmm(seq: EventSequence, p: int, symmetry: bool = True, eps_feas: float = EPS_FEAS,
            n_boot: int = 0, seed: int = 0, block_days: int = 1,
            solver: str = "CLARABEL") -> GmmFit:
    """Estimate from data; optional day-block bootstrap standard errors."""
    counts = day_counts(seq, p)
    biv = counts.bivariate(symmetrize=symmetry, project=True)
    fit = solve_weakly_constrained(build_gmm_system(biv, p, symmetry), eps_feas, solver)
    fit.model = MtdgModel.from_deviation(fit.model.eta, fit.model.a_stack, fit.model.lam,
                                         seq.state_space)
    if n_boot >= 2 and seq.n_days >= 2:
        rng = np.random.default_rng(seed)
        reps = []
        for w in bootstrap_weights(seq.n_days, n_boot, rng, block_days):
            b = counts.bivariate(symmetrize=symmetry, project=True, day_weights=w)
            reps.append(solve_weakly_constrained(build_gmm_system(b, p, symmetry), eps_feas,
                                                 solver, factorize=False).a_stack)
        fit.stderr = np.std(np.array(reps), axis=0, ddof=1)
    return fit
