"""Shared fixtures: tiny hand-built systems and the scaled builtin scenario."""

import numpy as np
import pytest

from tailopt import builtin_table1_scenario, validate_system


def make_model(nodes, groups, epsilon=1e-6):
    """Tiny helper so tests can state scenarios inline."""
    return validate_system(
        {
            "nodes": [{"alpha_per_sec": a, "beta_ms": b} for a, b in nodes],
            "file_groups": groups,
            "epsilon": epsilon,
        }
    )


@pytest.fixture(scope="session")
def table1():
    """The scaled builtin scenario: 12 nodes, 5 files per group (r=20)."""
    return builtin_table1_scenario()


@pytest.fixture
def two_node_model():
    """One file, k=1 over two identical nodes."""
    return make_model(
        [(20.0, 10.0), (20.0, 10.0)],
        [{"count": 1, "lambda_per_sec": 1.0, "n": 2, "k": 1, "placement": [0, 1]}],
    )


@pytest.fixture
def small_model():
    """Three files over four heterogeneous nodes (r*m = 12, QP-oracle size)."""
    return make_model(
        [(20.0, 10.0), (15.0, 8.0), (25.0, 12.0), (18.0, 9.0)],
        [
            {"count": 1, "lambda_per_sec": 0.5, "n": 3, "k": 2, "placement": [0, 1, 2]},
            {"count": 1, "lambda_per_sec": 0.8, "n": 4, "k": 2, "placement": [0, 1, 2, 3]},
            {"count": 1, "lambda_per_sec": 0.3, "n": 3, "k": 1, "placement": [1, 2, 3]},
        ],
    )


def random_feasible_point(model, rng, t_scale=0.5):
    """A random feasible (pi, t): random row pattern projected at a safe t."""
    from tailopt import project_feasible
    from tailopt.bounds import t_max
    from tailopt.model import aggregate_arrival

    raw = rng.random((model.r, model.m)) * model.support
    # normalize rows toward sum k before projecting
    raw *= (model.ks / np.maximum(raw.sum(axis=1), 1e-12))[:, None]
    t0 = np.full(model.m, 0.01)
    pi = project_feasible(np.clip(raw, 0.0, 1.0), t0, model)
    lam = aggregate_arrival(pi, model)
    t = np.array(
        [
            t_scale
            * rng.uniform(0.2, 0.9)
            * t_max(model.alphas[j], model.betas[j], lam[j], model.epsilon)
            for j in range(model.m)
        ]
    )
    return pi, t
