"""Cox partial likelihood (Breslow ties) and the elastic-net Cox solver."""

from __future__ import annotations

import warnings

import numpy as np

from .base import FittedSurvivalModel, check_targets


class RiskSets:
    """Sorted-time bookkeeping shared by the likelihood, gradient and Hessian.

    Subject ``i`` is at risk at every event time ``t_j <= t_i`` (Breslow: tied
    times share one risk set).
    """

    def __init__(self, time, event):
        time = np.asarray(time, dtype=float)
        self.event = np.asarray(event, dtype=bool)
        self.order = np.argsort(time, kind="stable")
        ts = time[self.order]
        self.first = np.searchsorted(ts, ts, side="left")
        self.last = np.searchsorted(ts, ts, side="right") - 1
        self.event_sorted = self.event[self.order]
        self.n_events = int(self.event.sum())

    def risk_sums(self, eta):
        """``shift``, per-subject risk-set sum of ``exp(eta - shift)`` (sorted order)."""
        shift = float(np.max(eta)) if len(eta) else 0.0
        w = np.exp(eta[self.order] - shift)
        rev = np.cumsum(w[::-1])[::-1]
        return shift, w, rev[self.first]


def cox_partial_loglik(eta, time, event, risk_sets: RiskSets | None = None) -> float:
    """Log partial likelihood of linear predictors ``eta``.

    ``sum_j delta_j [eta_j - log sum_{i: t_i >= t_j} exp(eta_i)]``.
    """
    eta = np.asarray(eta, dtype=float)
    rs = risk_sets or RiskSets(time, event)
    if rs.n_events == 0:
        raise ValueError("no events in fold")
    shift, _, s = rs.risk_sums(eta)
    e = rs.event_sorted
    return float(np.sum(eta[rs.order][e] - shift - np.log(s[e])))


def cox_gradient(eta, time, event, risk_sets: RiskSets | None = None) -> np.ndarray:
    """Gradient of the log partial likelihood with respect to ``eta``.

    ``delta_i - exp(eta_i) * sum_{j: t_j <= t_i} delta_j / S_j``; its negation
    is the boosting pseudo-response.
    """
    eta = np.asarray(eta, dtype=float)
    rs = risk_sets or RiskSets(time, event)
    _, w, s = rs.risk_sums(eta)
    inv = np.where(rs.event_sorted, 1.0 / s, 0.0)
    acc = np.cumsum(inv)[rs.last]
    grad_sorted = rs.event_sorted - w * acc
    out = np.empty_like(grad_sorted)
    out[rs.order] = grad_sorted
    return out


def cox_beta_derivatives(x, beta, rs: RiskSets):
    """Log-likelihood, gradient and negative Hessian in coefficient space."""
    eta = x @ beta
    shift, w, s = rs.risk_sums(eta)
    xs = x[rs.order]
    e = rs.event_sorted
    ll = float(np.sum(eta[rs.order][e] - shift - np.log(s[e])))
    inv = np.where(e, 1.0 / s, 0.0)
    acc = np.cumsum(inv)[rs.last]
    resid = e - w * acc
    grad = xs.T @ resid
    wx_rev = np.cumsum((w[:, None] * xs)[::-1], axis=0)[::-1][rs.first]
    xbar = wx_rev[e] / s[e][:, None]
    neg_hess = (xs.T * (w * acc)) @ xs - xbar.T @ xbar
    return ll, grad, neg_hess


def _soft(z, gamma):
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


def coxnet_objective(ll, beta, n, alpha, r) -> float:
    pen = alpha * (r * np.sum(np.abs(beta)) + 0.5 * (1.0 - r) * np.sum(beta ** 2))
    return ll / n - pen


def coxnet_path_solve(x, time, event, alpha, r=0.5, max_iter=1000, tol=1e-7, beta0=None):
    """Maximise ``LL(beta)/n - alpha * (r |beta|_1 + (1 - r)/2 |beta|^2)``.

    Proximal Newton: coordinate descent on the local quadratic model, then a
    backtracking line search that only accepts ascent steps.
    Returns ``(beta, converged, n_iter, objective_history)``.
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    rs = RiskSets(time, event)
    if rs.n_events == 0:
        raise ValueError("no events in fold")
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    l1 = alpha * r
    l2 = alpha * (1.0 - r)
    ll, grad, hess = cox_beta_derivatives(x, beta, rs)
    obj = coxnet_objective(ll, beta, n, alpha, r)
    history = [obj]
    converged = False
    it = 0
    for it in range(1, int(max_iter) + 1):
        g = grad / n
        h = hess / n
        target = beta.copy()
        d = np.zeros(p)
        hd = np.zeros(p)
        for _ in range(200):
            max_move = 0.0
            for k in range(p):
                hkk = h[k, k]
                # quadratic model of the log-likelihood: g'd - 1/2 d'Hd
                z = hkk * beta[k] + g[k] - (hd[k] - hkk * d[k])
                new = _soft(z, l1) / (hkk + l2) if hkk + l2 > 0 else 0.0
                step = new - target[k]
                if step != 0.0:
                    target[k] = new
                    d[k] += step
                    hd += h[:, k] * step
                    max_move = max(max_move, abs(step))
            if max_move < 1e-12:
                break
        t = 1.0
        accepted = False
        for _ in range(40):
            cand = beta + t * d
            c_ll, c_grad, c_hess = cox_beta_derivatives(x, cand, rs)
            c_obj = coxnet_objective(c_ll, cand, n, alpha, r)
            if c_obj >= obj - 1e-15 * max(1.0, abs(obj)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = float(np.max(np.abs(d))) < tol if p else True
            break
        change = float(np.max(np.abs(cand - beta))) if p else 0.0
        beta, ll, grad, hess, obj = cand, c_ll, c_grad, c_hess, c_obj
        history.append(obj)
        if change < tol:
            converged = True
            break
    return beta, converged, it, np.array(history)


def fit_coxnet(ds, alpha: float = 0.01, r: float = 0.5, max_iter: int = 1000,
               tol: float = 1e-7, standardize: bool = True) -> FittedSurvivalModel:
    """Elastic-net Cox model; features standardised with training statistics."""
    if not 0.0 < alpha:
        raise ValueError("alpha must be > 0")
    if not 0.0 < r <= 1.0:
        raise ValueError("r must be in (0, 1]")
    x, time, event = check_targets(ds)
    mean = x.mean(axis=0) if standardize else np.zeros(x.shape[1])
    scale = x.std(axis=0) if standardize else np.ones(x.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    beta, converged, n_iter, history = coxnet_path_solve((x - mean) / scale, time, event,
                                                         alpha, r, max_iter, tol)
    if not converged:
        warnings.warn(f"CoxNet did not converge in {n_iter} iterations", RuntimeWarning, stacklevel=2)
    return FittedSurvivalModel(
        "CoxNet",
        {"alpha": float(alpha), "r": float(r), "max_iter": int(max_iter), "tol": float(tol),
         "standardize": bool(standardize)},
        {"coef": beta, "mean": mean, "scale": scale},
        n_features=x.shape[1], converged=converged, history=history)


def fit_cox_newton(x, time, event, max_iter=100, tol=1e-10):
    """Unpenalised Cox fit by Newton-Raphson with step halving (reference solver)."""
    x = np.asarray(x, dtype=float)
    rs = RiskSets(time, event)
    beta = np.zeros(x.shape[1])
    ll, grad, hess = cox_beta_derivatives(x, beta, rs)
    for _ in range(max_iter):
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while True:
            cand = beta + t * step
            c_ll, c_grad, c_hess = cox_beta_derivatives(x, cand, rs)
            if c_ll >= ll or t < 1e-8:
                break
            t *= 0.5
        done = np.max(np.abs(cand - beta)) < tol
        beta, ll, grad, hess = cand, c_ll, c_grad, c_hess
        if done:
            break
    return beta
