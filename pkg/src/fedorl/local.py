"""One agent's local update: conservative evaluation plus dual-anchored improvement."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .data import EmpiricalModel
from .errors import DegenerateRegularization, NotConverged, ShapeMismatch
from .mdp import Mdp, TabularPolicy, as_probs

ROOT_TOL = 1e-12
IMPROVEMENT_MODES = ("closed_form", "exponentiated_gradient")


@dataclass(frozen=True)
class LocalConfig:
    """Coefficients and solver settings of a local round.

    Defaults for beta, lambda1 and lambda2 match the reference benchmark.
    """

    beta: float = 10.0
    lambda1: float = 0.1
    lambda2: float = 0.2
    eval_tolerance: float = 1e-10
    eval_max_iters: int = 1 << 20
    improve_alternations: int = 5
    improvement_mode: str = "closed_form"
    warm_start: bool = False

    def __post_init__(self):
        if min(self.beta, self.lambda1, self.lambda2) < 0:
            raise ValueError("beta, lambda1 and lambda2 must be non-negative")
        if self.eval_tolerance <= 0:
            raise ValueError("eval_tolerance must be positive")
        if self.eval_max_iters < 1:
            raise ValueError("eval_max_iters must be >= 1")
        if self.improve_alternations < 0:
            raise ValueError("improve_alternations must be >= 0")
        if self.improvement_mode not in IMPROVEMENT_MODES:
            raise ValueError(f"improvement_mode must be one of {IMPROVEMENT_MODES}")

    def replace(self, **changes) -> "LocalConfig":
        return LocalConfig(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class PenalizedQ:
    q: np.ndarray
    residual: float
    iterations_used: int
    converged: bool = True


def data_weighted(emp: EmpiricalModel, pi) -> np.ndarray:
    """rho~(s, a) = D(s) pi(a|s) with the un-floored empirical state marginal."""
    return emp.state_marginal[:, None] * as_probs(pi)


def conservatism_penalty(emp: EmpiricalModel, pi) -> np.ndarray:
    """(rho~ - d) / d per state-action pair."""
    return (data_weighted(emp, pi) - emp.d) / emp.d


def conservative_evaluate(emp: EmpiricalModel, template: Mdp, pi, cfg: LocalConfig,
                          q_init=None) -> PenalizedQ:
    """Fixed point of Q <- T~^pi Q - beta (rho~ - d) / d, iterated from ``q_init`` (default 0).

    The iterates are exactly those of plain Bellman iteration, but iterate
    ``2n`` is assembled from iterate ``n`` (affine-map doubling), so reaching
    iterate n costs O(log n) matrix products. ``residual`` is the sup-norm
    one-step change at the returned iterate.
    """
    probs = as_probs(pi)
    if probs.shape != (emp.num_states, emp.num_actions):
        raise ShapeMismatch("policy does not match the empirical model")
    gamma = template.discount
    r_pen = emp.reward_hat - cfg.beta * conservatism_penalty(emp, probs)
    P_hat = emp.transition_hat

    # V_k = sum_a pi Q_k obeys V_{k+1} = r_pi + M V_k with M = gamma P_pi
    M = gamma * np.einsum("sa,sat->st", probs, P_hat)
    r_pi = np.einsum("sa,sa->s", probs, r_pen)
    v0 = np.zeros(emp.num_states) if q_init is None else np.einsum("sa,sa->s", probs, q_init)
    step0 = r_pi + M @ v0 - v0  # V_1 - V_0

    # V_n = Mn @ v0 + c_n ; V_{n+1} - V_n = Mn @ step0
    Mn, c, n = M, r_pi.copy(), 1
    while True:
        step = Mn @ step0
        residual = float(np.max(np.abs(gamma * P_hat @ step)))
        if residual <= cfg.eval_tolerance or 2 * n > cfg.eval_max_iters:
            break
        c = c + Mn @ c
        Mn = Mn @ Mn
        n *= 2
    v = Mn @ v0 + c
    q = r_pen + gamma * P_hat @ v
    converged = residual <= cfg.eval_tolerance
    if not converged:
        warnings.warn(NotConverged(f"residual {residual:.3e} after {n + 1} iterations"))
    return PenalizedQ(q, residual, n + 1, converged)


def _xlogy(w, p):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(w > 0, w * np.log(p), 0.0)
    return out


def per_state_objective(probs, q, pib, pibar, lambda1, lambda2) -> np.ndarray:
    probs, pib, pibar = as_probs(probs), as_probs(pib), as_probs(pibar)
    return (np.sum(probs * q, axis=1)
            + lambda1 * _xlogy(pib, probs).sum(axis=1)
            + lambda2 * _xlogy(pibar, probs).sum(axis=1))


def local_objective(emp: EmpiricalModel, pi, q, pib, pibar, cfg: LocalConfig) -> float:
    """Surrogate of the dual-regularized objective, weighted by the empirical state marginal.

    Returns -inf when pi has no mass where an anchor does.
    """
    per_state = per_state_objective(pi, q, pib, pibar, cfg.lambda1, cfg.lambda2)
    weights = emp.state_marginal
    return float(np.sum(np.where(weights > 0, weights * per_state, 0.0)))


def solve_anchored_rows(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Row-wise argmax over the simplex of sum_a p_a q_a + sum_a w_a log p_a.

    Stationarity gives p_a = w_a / (c - q_a) on the anchor support. The
    multiplier ``c`` is the root of sum_a p_a = 1 above max_a q_a; when no such
    root exists the leftover mass goes to the best-valued action outside the
    support (lowest index on ties).
    """
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    supp = w > 0
    if not np.all(supp.any(axis=1)):
        raise ValueError("every row needs a positive anchor weight")
    qmax = q.max(axis=1, keepdims=True)
    gap = qmax - q  # >= 0
    top_in_supp = supp & (gap <= 0)
    has_top = top_in_supp.any(axis=1)

    # f(t) = sum_supp w / (t + gap) - 1 on t > 0; convex and decreasing
    with np.errstate(divide="ignore", invalid="ignore"):
        f0 = np.where(supp, w / gap, 0.0).sum(axis=1) - 1.0
    needs_root = has_top | (f0 > 0)

    t = np.where(has_top, np.where(top_in_supp, w, 0.0).sum(axis=1), 0.0)
    idx = np.flatnonzero(needs_root)
    if idx.size:
        ws, gs, tt = w[idx], gap[idx], t[idx]
        sp = supp[idx]
        lo, hi = tt.copy(), tt + ws.sum(axis=1)  # f(lo) >= 0 >= f(hi)
        for _ in range(200):
            denom = np.where(sp, tt[:, None] + gs, 1.0)
            terms = np.where(sp, ws / denom, 0.0)
            f = terms.sum(axis=1) - 1.0
            fp = -np.where(sp, terms / denom, 0.0).sum(axis=1)
            lo = np.where(f >= 0, np.maximum(lo, tt), lo)
            hi = np.where(f <= 0, np.minimum(hi, tt), hi)
            newton = tt - f / fp
            bad = ~np.isfinite(newton) | (newton < lo) | (newton > hi)
            nxt = np.where(bad, 0.5 * (lo + hi), newton)
            done = np.abs(nxt - tt) <= ROOT_TOL * np.maximum(tt, 1e-300)
            tt = nxt
            if np.all(done | (np.abs(f) <= ROOT_TOL)):
                break
        t[idx] = tt

    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(supp, w / (t[:, None] + gap), 0.0)
    # rows with t = 0: leftover mass to the best off-support action
    for s in np.flatnonzero(~needs_root):
        left = 1.0 - p[s].sum()
        if left > 0:
            off_best = np.flatnonzero(~supp[s] & (gap[s] <= 0))[0]
            p[s, off_best] += left
    return p / p.sum(axis=1, keepdims=True)


def exponentiated_gradient_rows(q: np.ndarray, w: np.ndarray, max_iters: int = 20000,
                                tol: float = 1e-13) -> np.ndarray:
    """Same per-row maximizer as ``solve_anchored_rows`` via mirror ascent with backtracking."""
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    n, A = q.shape
    p = np.full((n, A), 1.0 / A)
    scale = np.maximum(np.ptp(q, axis=1) + w.sum(axis=1), 1e-12)
    eta = 1.0 / scale

    def value(x):
        return np.sum(x * q, axis=1) + _xlogy(w, x).sum(axis=1)

    cur = value(p)
    for _ in range(max_iters):
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = q + np.where(w > 0, w / p, 0.0)
        logits = np.log(np.maximum(p, 1e-300)) + eta[:, None] * (grad - grad.max(axis=1, keepdims=True))
        cand = np.exp(logits - logits.max(axis=1, keepdims=True))
        cand /= cand.sum(axis=1, keepdims=True)
        new = value(cand)
        ok = new >= cur - 1e-15
        change = np.where(ok, np.abs(cand - p).max(axis=1), 0.0)
        p = np.where(ok[:, None], cand, p)
        cur = np.where(ok, new, cur)
        eta = np.where(ok, np.minimum(eta * 1.1, 1e8), eta * 0.5)
        if np.all(ok & (change <= tol)):
            break
    return p


def _greedy_rows(q: np.ndarray) -> np.ndarray:
    out = np.zeros_like(q)
    out[np.arange(q.shape[0]), np.argmax(q, axis=1)] = 1.0
    return out


def improve_policy(emp: EmpiricalModel, q, pib, pibar, cfg: LocalConfig) -> TabularPolicy:
    """Exact per-state maximizer of the surrogate objective for a fixed Q.

    States absent from the data keep ``pibar``. With both lambdas zero the
    closed form is undefined: a ``DegenerateRegularization`` warning is issued
    and the greedy policy (lowest-index ties) is returned on data states.
    """
    q = np.asarray(q, dtype=float)
    pib, pibar = as_probs(pib), as_probs(pibar)
    out = pibar.copy()
    rows = emp.state_marginal > 0
    if not rows.any():
        return TabularPolicy(out)
    w = cfg.lambda1 * pib + cfg.lambda2 * pibar
    if cfg.lambda1 == 0 and cfg.lambda2 == 0:
        warnings.warn(DegenerateRegularization("lambda1 = lambda2 = 0: greedy fallback"))
        out[rows] = _greedy_rows(q[rows])
    elif cfg.improvement_mode == "closed_form":
        out[rows] = solve_anchored_rows(q[rows], w[rows])
    else:
        out[rows] = exponentiated_gradient_rows(q[rows], w[rows])
    return TabularPolicy(out / out.sum(axis=1, keepdims=True))


def drpo_local_round(emp: EmpiricalModel, template: Mdp, pibar: TabularPolicy,
                     pib: TabularPolicy, cfg: LocalConfig) -> TabularPolicy:
    """Alternate conservative evaluation and improvement, starting from ``pibar``."""
    pi = pibar
    q = None
    for _ in range(cfg.improve_alternations):
        q = conservative_evaluate(emp, template, pi, cfg,
                                  q_init=q if cfg.warm_start else None).q
        pi = improve_policy(emp, q, pib, pibar, cfg)
    return pi
