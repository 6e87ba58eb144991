"""Mixture transition distribution (MTDg) chains.

States are 0-based in code: state ``k`` is the ``k+1``-th label of the state
space. Histories are ordered most recent first, ``(x[t-1], ..., x[t-p])``.

A model is stored in one of two equivalent forms:

* mixture: lag weights ``lam[g]`` and row-stochastic matrices ``q_stack[g]``,
  ``P(X_t=i | history) = sum_g lam[g] * q_stack[g][h_g, i]``;
* deviation: stationary vector ``eta`` and zero-row-sum matrices
  ``a_stack[g] = lam[g] * (q_stack[g] - 1^T eta)``,
  ``P(X_t=i | history) = eta[i] + sum_g a_stack[g][h_g, i]``.

Both forms are kept on the object; ``representation`` records which one was
supplied and is authoritative for evaluation and serialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

from .errors import DomainError, NumericError, ResourceError

EPS_FEAS = 1e-6
STATE_CAP = 10**6

SIGNED_EVENTS = ((-1, "C"), (-1, "NC"), (1, "NC"), (1, "C"))


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateSpace:
    m: int
    labels: tuple
    event_map: tuple | None = None

    def __post_init__(self):
        if self.m < 2:
            raise DomainError(f"state space needs m >= 2, got {self.m}")
        if len(self.labels) != self.m or len(set(self.labels)) != self.m:
            raise DomainError("labels must be m distinct names")
        if self.event_map is not None:
            if self.m != 4 or tuple(self.event_map) != SIGNED_EVENTS:
                raise DomainError("event map must be the 4-state signed-event table")

    @classmethod
    def generic(cls, m: int) -> "StateSpace":
        return cls(m, tuple(str(k + 1) for k in range(m)))

    @classmethod
    def signed_events(cls) -> "StateSpace":
        """Sell/buy x price-changing (C) / non-changing (NC) trades.

        State 0 = (-1, C), 1 = (-1, NC), 2 = (+1, NC), 3 = (+1, C).
        """
        return cls(4, ("sell_C", "sell_NC", "buy_NC", "buy_C"), SIGNED_EVENTS)

    def state_of(self, side: int, flag: str) -> int:
        if self.event_map is None:
            raise DomainError("state space has no event map")
        try:
            return self.event_map.index((side, flag))
        except ValueError:
            raise DomainError(f"no state for side={side!r}, flag={flag!r}") from None

    @property
    def signs(self) -> np.ndarray:
        if self.event_map is None:
            raise DomainError("state space has no event map")
        return np.array([s for s, _ in self.event_map], dtype=float)

    def flag_mask(self, flag: str) -> np.ndarray:
        if self.event_map is None:
            raise DomainError("state space has no event map")
        return np.array([f == flag for _, f in self.event_map], dtype=float)

    def to_dict(self) -> dict:
        d = {"m": self.m, "labels": list(self.labels)}
        if self.event_map is not None:
            d["event_map"] = [[s, f] for s, f in self.event_map]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpace":
        em = d.get("event_map")
        if em is not None:
            em = tuple((int(s), str(f)) for s, f in em)
        return cls(int(d["m"]), tuple(d["labels"]), em)


@dataclass(frozen=True, eq=False)
class MtdgModel:
    """An order-``p`` MTDg chain on ``m`` states. Build with the classmethods."""

    lam: np.ndarray
    q_stack: np.ndarray
    eta: np.ndarray | None
    a_stack: np.ndarray | None
    representation: str
    state_space: StateSpace

    @classmethod
    def from_mixture(cls, lam, q_stack, eta=None, state_space=None) -> "MtdgModel":
        lam = _frozen(lam)
        q = _frozen(q_stack)
        if q.ndim != 3 or q.shape[1] != q.shape[2] or q.shape[0] != lam.shape[0]:
            raise DomainError(f"q_stack must be (p, m, m) with p = len(lam); got {q.shape}")
        m = q.shape[1]
        a = None
        if eta is not None:
            eta = _frozen(eta)
            if eta.shape != (m,):
                raise DomainError("eta must have length m")
            a = _frozen(lam[:, None, None] * (q - eta[None, None, :]))
        return cls(lam, q, eta, a, "mixture", state_space or StateSpace.generic(m))

    @classmethod
    def from_deviation(cls, eta, a_stack, lam=None, state_space=None) -> "MtdgModel":
        """Deviation form. Without ``lam`` the mixture view uses uniform weights."""
        eta = _frozen(eta)
        a = _frozen(a_stack)
        if a.ndim != 3 or a.shape[1] != a.shape[2] or a.shape[1] != eta.shape[0]:
            raise DomainError(f"a_stack must be (p, m, m) matching eta; got {a.shape}")
        p, m = a.shape[0], a.shape[1]
        lam = np.full(p, 1.0 / p) if lam is None else np.asarray(lam, dtype=float)
        if lam.shape != (p,):
            raise DomainError("lam must have length p")
        if np.any(lam == 0):
            raise DomainError("deviation form needs nonzero lag weights")
        q = eta[None, None, :] + a / lam[:, None, None]
        return cls(_frozen(lam), _frozen(q), eta, a, "deviation",
                   state_space or StateSpace.generic(m))

    @classmethod
    def iid(cls, eta, p: int = 1, state_space=None) -> "MtdgModel":
        eta = np.asarray(eta, dtype=float)
        return cls.from_deviation(eta, np.zeros((p, eta.size, eta.size)), state_space=state_space)

    @property
    def m(self) -> int:
        return self.q_stack.shape[1]

    @property
    def p(self) -> int:
        return self.q_stack.shape[0]

    def kernel(self):
        """``(base, weights)`` with ``P(i | h) = base[i] + sum_g weights[g, h_g, i]``."""
        if self.representation == "deviation":
            return self.eta, self.a_stack
        return np.zeros(self.m), self.lam[:, None, None] * self.q_stack

    def with_lam(self, lam) -> "MtdgModel":
        """Same chain, refactored with other lag weights (deviation form only)."""
        if self.a_stack is None:
            raise DomainError("refactoring requires a shared stationary vector")
        return MtdgModel.from_deviation(self.eta, self.a_stack, lam, self.state_space)


def to_deviation(model: MtdgModel) -> MtdgModel:
    if model.a_stack is None:
        raise DomainError("model has no shared stationary vector; deviation form undefined")
    return MtdgModel.from_deviation(model.eta, model.a_stack, model.lam, model.state_space)


def to_mixture(model: MtdgModel) -> MtdgModel:
    return MtdgModel.from_mixture(model.lam, model.q_stack, model.eta, model.state_space)


def deviation_roundtrip(model: MtdgModel) -> MtdgModel:
    """Mixture -> deviation -> mixture; reproduces ``q_stack`` up to rounding."""
    return to_mixture(to_deviation(to_mixture(model)))


def conditional_distribution(model: MtdgModel, history) -> np.ndarray:
    h = np.asarray(history, dtype=np.int64)
    if h.shape != (model.p,):
        raise DomainError(f"history must have length p={model.p}, got {h.shape}")
    if h.min() < 0 or h.max() >= model.m:
        raise DomainError(f"history states must lie in 0..{model.m - 1}")
    base, w = model.kernel()
    return base + w[np.arange(model.p), h, :].sum(axis=0)


def sequence_probabilities(model: MtdgModel, states, positions) -> np.ndarray:
    """``P(x[t] | x[t-1..t-p])`` for every ``t`` in ``positions`` (each ``t >= p``)."""
    x = np.asarray(states, dtype=np.int64)
    t = np.asarray(positions, dtype=np.int64)
    if t.size and t.min() < model.p:
        raise DomainError("positions need p preceding states")
    base, w = model.kernel()
    cur = x[t]
    out = base[cur].astype(float)
    for g in range(model.p):
        out += w[g, x[t - g - 1], cur]
    return out


@njit(cache=True, fastmath={"contract", "reassoc", "arcp"})
def _loglik_kernel(base, weights, x, positions):
    p = weights.shape[0]
    total = 0.0
    for n in range(positions.shape[0]):
        t = positions[n]
        cur = x[t]
        prob = base[cur]
        for g in range(p):
            prob += weights[g, x[t - g - 1], cur]
        if prob <= 0.0:
            return -np.inf
        total += np.log(prob)
    return total


@njit(cache=True, fastmath={"contract", "reassoc", "arcp"})
def _loglik_grad_kernel(weights, x, positions):
    """Log-likelihood of ``P(i|h) = sum_g weights[g, h_g, i]`` and its
    gradient with respect to ``weights``."""
    p = weights.shape[0]
    grad = np.zeros_like(weights)
    total = 0.0
    for n in range(positions.shape[0]):
        t = positions[n]
        cur = x[t]
        prob = 0.0
        for g in range(p):
            prob += weights[g, x[t - g - 1], cur]
        if prob <= 0.0:
            return -np.inf, grad
        total += np.log(prob)
        inv = 1.0 / prob
        for g in range(p):
            grad[g, x[t - g - 1], cur] += inv
    return total, grad


def sequence_log_likelihood(model: MtdgModel, states, positions) -> float:
    """``sum_t log P(x[t] | x[t-1..t-p])``; ``-inf`` if any term is impossible."""
    t = np.ascontiguousarray(positions, dtype=np.int64)
    if t.size and t.min() < model.p:
        raise DomainError("positions need p preceding states")
    base, w = model.kernel()
    return float(_loglik_kernel(np.ascontiguousarray(base, dtype=float),
                                np.ascontiguousarray(w, dtype=float),
                                np.ascontiguousarray(states, dtype=np.int64), t))


# --- validation -------------------------------------------------------------


def bound_margins(model: MtdgModel, eps_feas: float = EPS_FEAS):
    """Slacks of the 2m extreme-history conditions.

    ``upper[i] = 1 - eps - max_history P(i|history)`` and
    ``lower[i] = min_history P(i|history) - eps``; all histories are covered
    because each lag contributes independently.
    """
    base, w = model.kernel()
    hi = base + w.max(axis=1).sum(axis=0)
    lo = base + w.min(axis=1).sum(axis=0)
    return 1.0 - eps_feas - hi, lo - eps_feas


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"valid": self.ok, "violations": list(self.violations)}


def validate_model(model: MtdgModel, eps_feas: float = EPS_FEAS) -> ValidationReport:
    rep = ValidationReport()
    v = rep.violations
    if model.p < 1:
        v.append("order p must be >= 1")
    if abs(model.lam.sum() - 1.0) > 1e-12:
        v.append(f"lag weights sum to {model.lam.sum():.17g}, not 1")
    if model.representation == "mixture":
        rows = model.q_stack.sum(axis=2)
        for g, i in zip(*np.nonzero(np.abs(rows - 1.0) > 1e-12)):
            v.append(f"row {i} of Q[{g}] sums to {rows[g, i]:.17g}")
    if model.eta is not None:
        eta = model.eta
        if np.any(eta <= 0):
            v.append("eta has non-positive components")
        if abs(eta.sum() - 1.0) > 1e-12:
            v.append(f"eta sums to {eta.sum():.17g}")
        if model.representation == "deviation":
            rows = model.a_stack.sum(axis=2)
            for g, i in zip(*np.nonzero(np.abs(rows) > 1e-12)):
                v.append(f"row {i} of A[{g}] sums to {rows[g, i]:.3g}, not 0")
            drift = np.abs(np.einsum("i,gij->gj", eta, model.a_stack)).max(axis=1)
        else:
            drift = np.abs(np.einsum("i,gij->gj", eta, model.q_stack) - eta).max(axis=1)
        for g in np.nonzero(drift > 1e-10)[0]:
            v.append(f"eta is not a left fixed vector of lag {g + 1} (error {drift[g]:.3g})")
    upper, lower = bound_margins(model, eps_feas)
    for i in np.nonzero(upper < 0)[0]:
        v.append(f"upper bound violated for state {i} (slack {upper[i]:.3g})")
    for i in np.nonzero(lower < 0)[0]:
        v.append(f"lower bound violated for state {i} (slack {lower[i]:.3g})")
    return rep


def require_valid(model: MtdgModel, eps_feas: float = EPS_FEAS) -> None:
    rep = validate_model(model, eps_feas)
    if not rep.ok:
        raise DomainError("invalid model: " + "; ".join(rep.violations))


# --- collapsed first-order chain --------------------------------------------


@dataclass(frozen=True, eq=False)
class CollapsedChain:
    """First-order chain on p-tuples ``(x[t-1], ..., x[t-p])``.

    Tuple index is ``sum_g j_g * m**(p-g)`` (most recent state varies most
    slowly).
    """

    transition: sp.csr_matrix
    m: int
    p: int

    @property
    def n_states(self) -> int:
        return self.m**self.p

    def tuple_of(self, index: int) -> tuple:
        return tuple(int(d) for d in _digits(np.array([index]), self.m, self.p)[0])

    def index_of(self, tup) -> int:
        idx = 0
        for d in tup:
            idx = idx * self.m + int(d)
        return idx

    def marginal(self, xi: np.ndarray) -> np.ndarray:
        """Distribution of the most recent state under tuple law ``xi``."""
        return xi.reshape(self.m, -1).sum(axis=1)


def _digits(idx, m, p):
    powers = m ** np.arange(p - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % m


def _check_cap(model, cap):
    if float(model.m) ** model.p > cap:
        raise ResourceError(f"m**p = {model.m}**{model.p} exceeds the state cap {cap}")


def collapse_full_chain(model: MtdgModel, cap: int = STATE_CAP) -> CollapsedChain:
    _check_cap(model, cap)
    m, p = model.m, model.p
    n = m**p
    src = np.arange(n, dtype=np.int64)
    digits = _digits(src, m, p)
    base, w = model.kernel()
    probs = np.tile(base, (n, 1))
    for g in range(p):
        probs += w[g][digits[:, g]]
    shift = src // m
    dest = np.arange(m)[None, :] * m ** (p - 1) + shift[:, None]
    t = sp.csr_matrix(
        (probs.ravel(), (np.repeat(src, m), dest.ravel())), shape=(n, n)
    )
    return CollapsedChain(t, m, p)


def collapsed_stationary(chain: CollapsedChain, tol: float = 1e-13,
                         max_iter: int = 200_000) -> np.ndarray:
    """Left fixed vector of the tuple chain by power iteration."""
    tt = chain.transition.T.tocsr()
    xi = np.full(chain.n_states, 1.0 / chain.n_states)
    for _ in range(max_iter):
        nxt = tt @ xi
        nxt /= nxt.sum()
        if np.abs(nxt - xi).sum() < tol:
            return nxt
        xi = nxt
    raise NumericError(f"power iteration did not converge in {max_iter} steps")


def stationary_distribution(model: MtdgModel, method: str = "shared_eigenvector",
                            cap: int = STATE_CAP) -> np.ndarray:
    if method == "shared_eigenvector":
        if model.eta is None:
            raise DomainError("model carries no shared stationary vector; use method='collapsed'")
        return np.array(model.eta)
    if method == "collapsed":
        chain = collapse_full_chain(model, cap)
        return chain.marginal(collapsed_stationary(chain))
    raise DomainError(f"unknown method {method!r}")


def marginal_law(model: MtdgModel, cap: int = STATE_CAP) -> np.ndarray:
    if model.eta is not None:
        return np.array(model.eta)
    return stationary_distribution(model, "collapsed", cap)


# --- bivariate laws ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BivariateSet:
    """Joint laws ``b[k][i, j] = P(X_t = i, X_{t+k} = j)`` for ``k = 0..K``."""

    eta: np.ndarray
    b: np.ndarray

    @property
    def m(self) -> int:
        return self.eta.size

    @property
    def max_lag(self) -> int:
        return self.b.shape[0] - 1

    def lag(self, k: int) -> np.ndarray:
        return self.b[k] if k >= 0 else self.b[-k].T

    def centered(self, k: int) -> np.ndarray:
        return self.lag(k) - np.outer(self.eta, self.eta)

    def truncated(self, max_lag: int) -> "BivariateSet":
        if max_lag > self.max_lag:
            raise DomainError(f"only lags up to {self.max_lag} available")
        return BivariateSet(self.eta, self.b[: max_lag + 1])


def theoretical_bivariate(model: MtdgModel, max_lag: int) -> BivariateSet:
    """Exact ``B(k)`` from ``B(k) = sum_g B(k-g) lam_g Q^g``.

    Lags ``1..p-1`` are coupled through ``B(-k) = B(k)^T`` and are obtained
    from one linear solve; later lags follow by forward recursion.
    """
    eta = marginal_law(model)
    m, p = model.m, model.p
    mats = model.lam[:, None, None] * model.q_stack
    if model.representation == "deviation":
        mats = model.a_stack + model.lam[:, None, None] * eta[None, None, :]
    n_lags = max(max_lag, p - 1)
    b = np.zeros((n_lags + 1, m, m))
    b[0] = np.diag(eta)
    if p >= 2:
        nu = (p - 1) * m * m
        lhs = np.eye(nu)
        rhs = np.zeros(nu)
        eye = np.eye(m)
        perm = np.arange(m * m).reshape(m, m).T.ravel()
        for k in range(1, p):
            rows = slice((k - 1) * m * m, k * m * m)
            for g in range(1, p + 1):
                blk = np.kron(eye, mats[g - 1].T)
                r = k - g
                if r == 0:
                    rhs[rows] += (b[0] @ mats[g - 1]).ravel()
                elif r > 0:
                    cols = slice((r - 1) * m * m, r * m * m)
                    lhs[rows, cols] -= blk
                else:
                    cols = slice((-r - 1) * m * m, -r * m * m)
                    lhs[rows, cols] -= blk[:, perm]
        sol = np.linalg.solve(lhs, rhs)
        b[1:p] = sol.reshape(p - 1, m, m)
    for k in range(p, n_lags + 1):
        acc = np.zeros((m, m))
        for g in range(1, p + 1):
            r = k - g
            acc += (b[r] if r >= 0 else b[-r].T) @ mats[g - 1]
        b[k] = acc
    return BivariateSet(_frozen(eta), _frozen(b[: max_lag + 1]))


# --- event sequences and simulation -----------------------------------------


@dataclass(frozen=True, eq=False)
class EventSequence:
    """Day-partitioned state stream. ``day_offsets`` are start indices."""

    states: np.ndarray
    day_offsets: np.ndarray
    state_space: StateSpace
    day_labels: tuple | None = None
    seq_no: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.states, dtype=np.int64)
        offs = np.asarray(self.day_offsets, dtype=np.int64)
        if x.ndim != 1 or x.size == 0:
            raise DomainError("event sequence must be a nonempty 1-d array")
        if x.min() < 0 or x.max() >= self.state_space.m:
            raise DomainError(f"states must lie in 0..{self.state_space.m - 1}")
        if offs.size == 0 or offs[0] != 0 or offs[-1] >= x.size or np.any(np.diff(offs) <= 0):
            raise DomainError("day offsets must start at 0, increase strictly and stay < length")
        if self.day_labels is not None and len(self.day_labels) != offs.size:
            raise DomainError("one label per day required")
        x.setflags(write=False)
        offs.setflags(write=False)
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "day_offsets", offs)

    @classmethod
    def single_day(cls, states, state_space=None) -> "EventSequence":
        x = np.asarray(states, dtype=np.int64)
        ss = state_space or StateSpace.generic(int(x.max()) + 1 if x.max() >= 1 else 2)
        return cls(x, np.array([0]), ss)

    @classmethod
    def from_days(cls, days, state_space=None) -> "EventSequence":
        days = [np.asarray(d, dtype=np.int64) for d in days]
        x = np.concatenate(days)
        offs = np.cumsum([0] + [len(d) for d in days[:-1]])
        ss = state_space or StateSpace.generic(max(int(x.max()) + 1, 2))
        return cls(x, offs, ss)

    def __len__(self) -> int:
        return self.states.size

    @property
    def n_days(self) -> int:
        return self.day_offsets.size

    @property
    def day_ends(self) -> np.ndarray:
        return np.append(self.day_offsets[1:], self.states.size)

    def day_ids(self) -> np.ndarray:
        ids = np.zeros(self.states.size, dtype=np.int64)
        ids[self.day_offsets[1:]] = 1
        return np.cumsum(ids)

    def days(self):
        for a, b in zip(self.day_offsets, self.day_ends):
            yield self.states[a:b]

    def select_days(self, start: int, stop: int) -> "EventSequence":
        if not 0 <= start < stop <= self.n_days:
            raise DomainError(f"day range [{start}, {stop}) outside 0..{self.n_days}")
        a, b = self.day_offsets[start], self.day_ends[stop - 1]
        labels = None if self.day_labels is None else self.day_labels[start:stop]
        seq = None if self.seq_no is None else self.seq_no[a:b]
        return EventSequence(self.states[a:b], self.day_offsets[start:stop] - a,
                             self.state_space, labels, seq)

    def within_day_positions(self, p: int) -> np.ndarray:
        """Indices ``t`` whose ``p`` predecessors lie in the same day."""
        parts = [np.arange(a + p, b) for a, b in zip(self.day_offsets, self.day_ends)]
        return np.concatenate(parts) if parts else np.array([], dtype=np.int64)


@njit(cache=True)
def _simulate_kernel(base, weights, x, start, uniforms):
    p = weights.shape[0]
    m = weights.shape[2]
    probs = np.empty(m)
    for t in range(start, x.shape[0]):
        for i in range(m):
            probs[i] = base[i]
        for g in range(p):
            h = x[t - g - 1]
            for i in range(m):
                probs[i] += weights[g, h, i]
        u = uniforms[t - start]
        acc = 0.0
        k = m - 1
        for i in range(m - 1):
            acc += probs[i]
            if u < acc:
                k = i
                break
        x[t] = k


def simulate(model: MtdgModel, n_events: int, seed: int, burn_in: int | None = None,
             init=None, day_length: int | None = None) -> EventSequence:
    """Monte Carlo path of ``model``.

    The first ``p`` states are drawn iid from the marginal law (uniform if the
    model has no shared stationary vector) unless ``init`` gives them, most
    recent first. ``burn_in`` (default ``10 p``) draws are discarded. With
    ``day_length`` the output is cut into consecutive days of that size.
    """
    if n_events < 1:
        raise DomainError("n_events must be >= 1")
    p, m = model.p, model.m
    burn_in = 10 * p if burn_in is None else int(burn_in)
    rng = np.random.default_rng(seed)
    total = p + burn_in + n_events
    x = np.empty(total, dtype=np.int64)
    if init is None:
        w = model.eta if model.eta is not None else np.full(m, 1.0 / m)
        x[:p] = rng.choice(m, size=p, p=w / w.sum())
    else:
        init = np.asarray(init, dtype=np.int64)
        if init.shape != (p,):
            raise DomainError(f"init tuple must have length p={p}")
        if init.min() < 0 or init.max() >= m:
            raise DomainError("init states out of range")
        x[:p] = init[::-1]
    uniforms = rng.random(total - p)
    base, weights = model.kernel()
    _simulate_kernel(np.ascontiguousarray(base, dtype=float),
                     np.ascontiguousarray(weights, dtype=float), x, p, uniforms)
    out = x[p + burn_in:]
    if day_length is None:
        offs = np.array([0])
    else:
        offs = np.arange(0, n_events, int(day_length))
    return EventSequence(out, offs, model.state_space)


# --- random models (test and demo utility) ----------------------------------


def random_deviation_stack(eta, p, rng, scale=0.5, decay=0.0, centrosymmetric=False):
    """Random zero-row-sum stack with ``eta @ A = 0``, scaled to ``scale`` of the
    largest feasible multiple."""
    eta = np.asarray(eta, dtype=float)
    m = eta.size
    proj = np.eye(m) - np.outer(np.ones(m), eta)
    raw = rng.normal(size=(p, m, m)) * np.exp(-decay * np.arange(p))[:, None, None]
    if centrosymmetric:
        raw = 0.5 * (raw + raw[:, ::-1, ::-1])
    a = proj @ raw @ proj
    hi = a.max(axis=1).sum(axis=0)
    lo = a.min(axis=1).sum(axis=0)
    with np.errstate(divide="ignore"):
        t = min(np.min(np.where(hi > 0, (1 - eta) / hi, np.inf)),
                np.min(np.where(lo < 0, eta / -lo, np.inf)))
    return a * scale * t


def random_weak_model(m, p, rng, scale=0.5, eta=None, decay=0.0,
                      centrosymmetric=False, state_space=None) -> MtdgModel:
    if eta is None:
        eta = rng.dirichlet(np.full(m, 4.0))
        if centrosymmetric:
            eta = 0.5 * (eta + eta[::-1])
    a = random_deviation_stack(eta, p, rng, scale, decay, centrosymmetric)
    return MtdgModel.from_deviation(eta, a, state_space=state_space)


def random_mixture_model(m, p, rng, concentration=2.0) -> MtdgModel:
    """Probabilistic mixture with independent stochastic matrices (no shared eta)."""
    lam = rng.dirichlet(np.full(p, 2.0))
    q = rng.dirichlet(np.full(m, concentration), size=(p, m))
    return MtdgModel.from_mixture(lam, q)
