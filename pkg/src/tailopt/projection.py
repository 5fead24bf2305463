"""Euclidean projection onto the feasible scheduling polytope.

The feasible set at fixed t is the intersection of
  * per-file capped simplices {0 <= pi_ij <= 1, sum_j pi_ij = k_i,
    pi_ij = 0 off the placement support}, and
  * per-node stability halfspaces Lambda_j(pi) <= cap_j(t).

Both families admit closed-form projections, so the joint projection is
computed with Dykstra's alternating projections.  When the row
projection alone already satisfies every cap (the common case away from
saturation) it *is* the exact projection and is returned directly.
"""

from __future__ import annotations

import numpy as np

from .bounds import margin_lambda_cap
from .model import InfeasibleRegionError, ModelError, SystemModel, aggregate_arrival

DYKSTRA_TOL = 1e-8
DYKSTRA_MAX_ITER = 10_000

_NEG = -1e30  # sentinel pushing off-support entries to 0 in the clamp


def project_capped_simplex(v: np.ndarray, k: float) -> np.ndarray:
    """Project v onto {0 <= w <= 1, sum w = k} (unique Euclidean projection).

    The projection is clamp(v - mu, 0, 1) with mu found by bisection on
    the monotone map mu -> sum(clamp(v - mu, 0, 1)).
    """
    v = np.asarray(v, dtype=float)
    if not 0 <= k <= v.size:
        raise ModelError(f"need 0 <= k <= {v.size}, got k={k}")
    lo = float(v.max()) - v.size  # sum = size at mu <= min(v) - 1; generous bracket
    lo = min(lo, float(v.min()) - 1.0)
    hi = float(v.max())
    for _ in range(100):
        mu = 0.5 * (lo + hi)
        s = np.clip(v - mu, 0.0, 1.0).sum()
        if s > k:
            lo = mu
        else:
            hi = mu
    return np.clip(v - 0.5 * (lo + hi), 0.0, 1.0)


def project_rows(pi: np.ndarray, model: SystemModel, support: np.ndarray) -> np.ndarray:
    """Projection onto the product of per-file capped simplices, vectorized.

    Off-support entries are projected to 0 by sending them to a large
    negative value before the clamp.
    """
    v = np.where(support, pi, _NEG)
    ks = model.ks.astype(float)
    lo = v.max(axis=1) - model.m
    np.minimum(lo, np.where(support, v, np.inf).min(axis=1) - 1.0, out=lo)
    hi = v.max(axis=1)
    for _ in range(100):
        mu = 0.5 * (lo + hi)
        s = np.clip(v - mu[:, None], 0.0, 1.0).sum(axis=1)
        too_big = s > ks
        lo = np.where(too_big, mu, lo)
        hi = np.where(too_big, hi, mu)
    return np.clip(v - (0.5 * (lo + hi))[:, None], 0.0, 1.0)


def node_caps(t, model: SystemModel) -> np.ndarray:
    """Per-node arrival-rate caps keeping the margin <= -epsilon at this t."""
    return margin_lambda_cap(
        np.asarray(t, dtype=float), model.alphas, model.betas, model.epsilon
    )


def _cap_violation(pi, caps, model):
    lam_vec = aggregate_arrival(pi, model)
    return float(np.maximum(lam_vec - caps, 0.0).max())


def project_feasible(
    pi0: np.ndarray,
    t,
    model: SystemModel,
    support: np.ndarray | None = None,
    tol: float = DYKSTRA_TOL,
    max_iter: int = DYKSTRA_MAX_ITER,
) -> np.ndarray:
    """Euclidean projection of pi0 onto the full feasible polytope at t.

    Raises InfeasibleRegionError when the polytope is provably empty
    (total demand sum_i lambda_i k_i exceeds the total cap) or when
    Dykstra fails to reach the residual tolerance.
    """
    if support is None:
        support = model.support
    t = np.asarray(t, dtype=float)
    caps = node_caps(t, model)
    if np.any(caps < -1e-9):
        raise InfeasibleRegionError(
            "negative node cap: chosen t admits no arrivals at some node"
        )
    caps = np.maximum(caps, 0.0)  # clamp float noise at cap = 0 (t = t_max)
    demand = float((model.lambdas * model.ks).sum())
    if demand > float(caps.sum()):
        raise InfeasibleRegionError(
            f"total demand {demand:.6g} exceeds total cap {caps.sum():.6g}"
        )

    pi0 = np.asarray(pi0, dtype=float)
    x = project_rows(pi0, model, support)
    if _cap_violation(x, caps, model) <= tol:
        return x

    # Dykstra over the simplex-product set and each node halfspace
    lam = model.lambdas
    lam_sq = float(lam @ lam)
    scale = max(1.0, float(np.abs(caps).max()))
    p_rows = np.zeros_like(pi0)
    p_caps = np.zeros((model.m,) + pi0.shape)
    x = pi0.copy()
    for _ in range(max_iter):
        y = x + p_rows
        x = project_rows(y, model, support)
        p_rows = y - x
        for j in range(model.m):
            y = x + p_caps[j]
            excess = float(lam @ y[:, j]) - caps[j]
            if excess > 0:
                x = y.copy()
                x[:, j] = y[:, j] - (excess / lam_sq) * lam
            else:
                x = y
            p_caps[j] = y - x
        # x currently satisfies every cap exactly; measure how far the
        # subsequent row projection moves it and how much it re-violates
        z = project_rows(x, model, support)
        resid = float(np.abs(z - x).max()) + _cap_violation(z, caps, model) / scale
        if resid <= tol:
            return z
    raise InfeasibleRegionError(
        f"Dykstra projection did not converge in {max_iter} iterations"
    )


def nearest_feasible_init(
    model: SystemModel,
    support: np.ndarray | None = None,
    t0: float = 0.01,
    max_halvings: int = 60,
) -> tuple[np.ndarray, np.ndarray]:
    """Closest-norm feasible start: project the k/n pattern at t = t0.

    If the polytope at t0 is empty, t is halved until it is not.
    """
    if support is None:
        support = model.support
    pattern = np.where(
        support, (model.ks / np.array([f.code_n for f in model.files]))[:, None], 0.0
    )
    t = np.full(model.m, float(t0))
    for _ in range(max_halvings):
        try:
            pi = project_feasible(pattern, t, model, support=support)
            return pi, t
        except InfeasibleRegionError:
            t *= 0.5
    raise InfeasibleRegionError(
        "no feasible start found: system overloaded at every tried t"
    )
