"""Closed-form tail machinery: transforms, stability, bounds, objective.

Per-node quantities for a shifted-exponential M/G/1 queue under FCFS:

* service MGF               M(t) = alpha/(alpha-t) * exp(beta*t),  t < alpha
* stability margin          t*(t - alpha + Lambda) + Lambda*alpha*(exp(beta*t)-1)
  (negative iff Lambda*(M(t)-1) < t, which also implies rho < 1)
* sojourn-time MGF          (1-rho) * t * M(t) / (t - Lambda*(M(t)-1))

The per-file tail bound is sum_j pi_ij * exp(-t_j x) * sojourn_mgf_j and
the weighted objective is its omega-weighted sum over files, evaluated in
the equivalent per-node form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import (
    NoFeasibleTError,
    PoleError,
    SystemModel,
    UnstableNodeError,
    aggregate_arrival,
    traffic_intensity,
)


def mgf_shifted_exp(alpha, beta, t):
    """Service-time MGF alpha/(alpha-t) * e^(beta t); pole at t = alpha."""
    alpha = np.asarray(alpha, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t >= alpha):
        raise PoleError("MGF evaluated at t >= alpha")
    out = alpha / (alpha - t) * np.exp(np.asarray(beta) * t)
    return out if out.ndim else float(out)


def service_lst_shifted_exp(alpha, beta, s):
    """Laplace-Stieltjes transform alpha/(alpha+s) * e^(-beta s), s >= 0."""
    alpha = np.asarray(alpha, dtype=float)
    s = np.asarray(s, dtype=float)
    out = alpha / (alpha + s) * np.exp(-np.asarray(beta) * s)
    return out if out.ndim else float(out)


def stability_margin(t, lam, alpha, beta):
    """Feasible (pi, t) pairs have margin <= -epsilon at every node."""
    t = np.asarray(t, dtype=float)
    out = t * (t - alpha + lam) + lam * np.asarray(alpha) * np.expm1(np.asarray(beta) * t)
    return out if out.ndim else float(out)


def margin_lambda_cap(t, alpha, beta, eps):
    """Largest Lambda with stability_margin(t, Lambda) <= -eps, at fixed t.

    The margin is linear in Lambda:
        margin = t*(t - alpha) + Lambda * (t + alpha*(e^{beta t} - 1)).
    A negative cap means no arrival rate is admissible at this t.
    """
    t = np.asarray(t, dtype=float)
    out = (t * (alpha - t) - eps) / (t + np.asarray(alpha) * np.expm1(np.asarray(beta) * t))
    return out if out.ndim else float(out)


def t_max(alpha, beta, lam, eps):
    """Supremum feasible t: the upper root of margin(t) = -eps on (0, alpha).

    The margin is convex in t with margin(0) = 0 and margin'(0) < 0 iff
    rho < 1, so the feasible interval is bracketed by the margin's dip.
    """
    alpha, beta, lam = float(alpha), float(beta), float(lam)
    if traffic_intensity(lam, alpha, beta) >= 1:
        raise NoFeasibleTError(
            f"node unstable (rho >= 1) at Lambda={lam:.6g}; no feasible t"
        )
    if lam == 0.0:
        # margin reduces to t*(t - alpha); root of t^2 - alpha t + eps = 0
        disc = alpha * alpha - 4.0 * eps
        if disc <= 0:
            raise NoFeasibleTError("epsilon too large for this node")
        return 0.5 * (alpha + np.sqrt(disc))

    def dmargin(t):
        return 2.0 * t - alpha + lam + lam * alpha * beta * np.exp(beta * t)

    # margin' is increasing, negative at 0 (stability), positive at alpha
    t_dip = brentq(dmargin, 0.0, alpha, xtol=1e-14, rtol=1e-15)
    if stability_margin(t_dip, lam, alpha, beta) > -eps:
        raise NoFeasibleTError("margin never reaches -epsilon; no feasible t")

    def shifted(t):
        return stability_margin(t, lam, alpha, beta) + eps

    # margin(alpha) = alpha*lam + lam*alpha*(e^{beta alpha}-1) >= 0 > -eps
    return brentq(shifted, t_dip, alpha, xtol=1e-13, rtol=1e-15)


def t_min(alpha, beta, lam, eps):
    """Infimum feasible t: the lower root of margin(t) = -eps on (0, t_max).

    margin(0) = 0 > -eps, so t must stay away from 0 for the margin
    constraint to hold; the feasible interval is [t_min, t_max].
    """
    alpha, beta, lam = float(alpha), float(beta), float(lam)
    if traffic_intensity(lam, alpha, beta) >= 1:
        raise NoFeasibleTError(
            f"node unstable (rho >= 1) at Lambda={lam:.6g}; no feasible t"
        )
    if lam == 0.0:
        disc = alpha * alpha - 4.0 * eps
        if disc <= 0:
            raise NoFeasibleTError("epsilon too large for this node")
        return 0.5 * (alpha - np.sqrt(disc))

    def dmargin(t):
        return 2.0 * t - alpha + lam + lam * alpha * beta * np.exp(beta * t)

    t_dip = brentq(dmargin, 0.0, alpha, xtol=1e-14, rtol=1e-15)
    if stability_margin(t_dip, lam, alpha, beta) > -eps:
        raise NoFeasibleTError("margin never reaches -epsilon; no feasible t")

    def shifted(t):
        return stability_margin(t, lam, alpha, beta) + eps

    # margin(0) = 0 > -eps and margin(t_dip) <= -eps bracket the lower root
    return brentq(shifted, 0.0, t_dip, xtol=1e-13, rtol=1e-15)


def sojourn_mgf(t, lam, alpha, beta):
    """E[e^{t Q}] of the M/G/1 sojourn time via the PK transform at s=-t."""
    margin = stability_margin(t, lam, alpha, beta)
    if np.any(np.asarray(margin) >= 0):
        raise NoFeasibleTError(
            f"stability margin {margin} >= 0: sojourn MGF does not exist"
        )
    m = mgf_shifted_exp(alpha, beta, t)
    rho = traffic_intensity(lam, alpha, beta)
    out = (1.0 - rho) * t * m / (t - lam * (m - 1.0))
    return out if np.ndim(out) else float(out)


def sojourn_lst(s, lam, alpha, beta, lst=None):
    """E[e^{-s Q}] via the PK transform; ``lst`` overrides the service LST."""
    rho = traffic_intensity(lam, alpha, beta)
    if np.any(np.asarray(rho) >= 1):
        raise UnstableNodeError(f"rho = {rho} >= 1")
    l = lst(s) if lst is not None else service_lst_shifted_exp(alpha, beta, s)
    out = (1.0 - rho) * s * l / (s - lam * (1.0 - l))
    return out if np.ndim(out) else float(out)


def node_tail_terms(t, lam_vec, model: SystemModel, x) -> np.ndarray:
    """Per-node e^{-t_j x} * sojourn MGF; the building block of all bounds."""
    t = np.asarray(t, dtype=float)
    pk = sojourn_mgf(t, np.asarray(lam_vec, dtype=float), model.alphas, model.betas)
    return np.exp(-t * x) * pk


def file_tail_bounds(pi, t, x, model: SystemModel) -> np.ndarray:
    """Raw (unclipped) per-file tail probability bounds at threshold x."""
    lam_vec = aggregate_arrival(pi, model)
    return pi @ node_tail_terms(t, lam_vec, model, x)


def file_tail_bound(i, pi, t, x, model: SystemModel) -> float:
    """Tail bound for one file; may exceed 1 (clip for human output)."""
    return float(file_tail_bounds(pi, t, x, model)[i])


def weighted_objective(pi, t, x, model: SystemModel) -> float:
    """Weighted tail-probability objective sum_i omega_i * bound_i.

    Computed in the per-node form sum_j (Lambda_j / sum_lambda) * term_j,
    which is algebraically identical when omega_i = lambda_i/sum_lambda.
    """
    lam_vec = aggregate_arrival(pi, model)
    terms = node_tail_terms(t, lam_vec, model, x)
    return float((lam_vec / model.total_lambda) @ terms)


@dataclass(frozen=True)
class BoundReport:
    per_file_bound: np.ndarray
    per_file_clipped: np.ndarray
    objective: float
    per_node_terms: np.ndarray


def bound_report(pi, t, x, model: SystemModel) -> BoundReport:
    lam_vec = aggregate_arrival(pi, model)
    terms = node_tail_terms(t, lam_vec, model, x)
    per_file = pi @ terms
    return BoundReport(
        per_file_bound=per_file,
        per_file_clipped=np.minimum(per_file, 1.0),
        objective=float(model.weights @ per_file),
        per_node_terms=terms,
    )


def objective_gradient_pi(pi, t, x, model: SystemModel) -> np.ndarray:
    """Gradient of weighted_objective with respect to pi (r x m).

    With C1 = 1/alpha + beta and C2 = (M(t)-1)/t the per-node objective
    term is e^{-tx} M(t) * u(Lambda) with u(L) = L(1-L*C1)/(1-L*C2), so
    d obj / d pi_ij = lambda_i/sum_lambda * e^{-t_j x} M_j * u'(Lambda_j).
    """
    t = np.asarray(t, dtype=float)
    lam_vec = aggregate_arrival(pi, model)
    m = mgf_shifted_exp(model.alphas, model.betas, t)
    c1 = 1.0 / model.alphas + model.betas
    c2 = (m - 1.0) / t
    denom = 1.0 - lam_vec * c2
    if np.any(denom <= 0):
        raise NoFeasibleTError("gradient requested at an infeasible (pi, t)")
    du = ((1.0 - 2.0 * lam_vec * c1) * denom + c2 * lam_vec * (1.0 - lam_vec * c1)) / denom**2
    node_part = np.exp(-t * x) * m * du
    return np.outer(model.lambdas / model.total_lambda, node_part)


def lst_tail_bound(i, pi, s, x, model: SystemModel, lst=None) -> float:
    """Tail bound from the Laplace-Stieltjes route (arbitrary service law).

    bound = sum_j pi_ij (1 - E[e^{-s_j Q_j}]) / (1 - e^{-s_j x}).
    ``lst`` may be a sequence of per-node callables for non-shifted-exp
    service distributions; by default the shifted-exponential LST is used.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("s must be elementwise positive")
    lam_vec = aggregate_arrival(pi, model)
    vals = np.empty(model.m)
    for j in range(model.m):
        node_lst = None if lst is None else lst[j]
        q = sojourn_lst(s[j], lam_vec[j], model.alphas[j], model.betas[j], lst=node_lst)
        vals[j] = (1.0 - q) / -np.expm1(-s[j] * x)
    return float(pi[i] @ vals)
