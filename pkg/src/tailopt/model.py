"""Domain types and derived per-node quantities.

All internal math is in seconds / 1-per-second.  Scenario files give the
service shift in milliseconds; it is converted at ingestion and never
seen in ms again.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

ROW_SUM_TOL = 1e-9
DEFAULT_EPSILON = 1e-6

MS_PER_S = 1000.0


class ModelError(ValueError):
    """A scenario or configuration violates a model invariant."""


class PoleError(ValueError):
    """Transform evaluated at or beyond its pole (t >= alpha)."""


class FeasibilityError(RuntimeError):
    """No point satisfying the requested constraints exists / was found."""


class NoFeasibleTError(FeasibilityError):
    """No auxiliary parameter t satisfies the stability constraint."""


class InfeasibleRegionError(FeasibilityError):
    """The scheduling polytope is empty for the given t."""


class UnstableNodeError(FeasibilityError):
    """A node's traffic intensity is >= 1."""


class InsufficientSamplesError(ValueError):
    """Too few simulation samples for the requested estimate."""


@dataclass(frozen=True)
class NodeParams:
    """Shifted-exponential service parameters of one storage node."""

    rate_alpha: float  # 1/s
    shift_beta: float  # s

    def __post_init__(self):
        if not self.rate_alpha > 0:
            raise ModelError(f"rate_alpha must be positive, got {self.rate_alpha}")
        if self.shift_beta < 0:
            raise ModelError(f"shift_beta must be >= 0, got {self.shift_beta}")

    @property
    def mean_service(self) -> float:
        return 1.0 / self.rate_alpha + self.shift_beta


@dataclass(frozen=True)
class FileClass:
    """One file: erasure code, demand, weight and chunk placement."""

    code_n: int
    code_k: int
    arrival_rate_lambda: float  # req/s
    weight_omega: float
    placement_S: frozenset[int]

    def __post_init__(self):
        if not (1 <= self.code_k <= self.code_n):
            raise ModelError(f"need 1 <= k <= n, got k={self.code_k}, n={self.code_n}")
        if len(self.placement_S) != self.code_n:
            raise ModelError(
                f"placement size {len(self.placement_S)} != n={self.code_n}"
            )
        if not self.arrival_rate_lambda > 0:
            raise ModelError("arrival_rate_lambda must be positive")


@dataclass(frozen=True)
class SystemModel:
    """Validated, immutable system description shared by all modules."""

    nodes: tuple[NodeParams, ...]
    files: tuple[FileClass, ...]
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ModelError("epsilon must be positive")
        m = len(self.nodes)
        for f in self.files:
            if max(f.placement_S) >= m or min(f.placement_S) < 0:
                raise ModelError("placement refers to a node index out of range")
        w = sum(f.weight_omega for f in self.files)
        if abs(w - 1.0) > 1e-6:
            raise ModelError(f"file weights must sum to 1, got {w}")

    @property
    def m(self) -> int:
        return len(self.nodes)

    @property
    def r(self) -> int:
        return len(self.files)

    @cached_property
    def alphas(self) -> np.ndarray:
        return np.array([n.rate_alpha for n in self.nodes])

    @cached_property
    def betas(self) -> np.ndarray:
        return np.array([n.shift_beta for n in self.nodes])

    @cached_property
    def lambdas(self) -> np.ndarray:
        return np.array([f.arrival_rate_lambda for f in self.files])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([f.weight_omega for f in self.files])

    @cached_property
    def ks(self) -> np.ndarray:
        return np.array([f.code_k for f in self.files], dtype=np.int64)

    @cached_property
    def support(self) -> np.ndarray:
        """Boolean r x m mask: True where file i may be scheduled on node j."""
        mask = np.zeros((self.r, self.m), dtype=bool)
        for i, f in enumerate(self.files):
            mask[i, sorted(f.placement_S)] = True
        return mask

    @property
    def total_lambda(self) -> float:
        return float(self.lambdas.sum())

    def with_placements(self, placements: list[frozenset[int]]) -> "SystemModel":
        """Copy of the model with new per-file placements (same codes)."""
        files = tuple(
            FileClass(f.code_n, f.code_k, f.arrival_rate_lambda, f.weight_omega, frozenset(p))
            for f, p in zip(self.files, placements)
        )
        return SystemModel(self.nodes, files, self.epsilon)


def validate_system(raw_config: dict) -> SystemModel:
    """Build a SystemModel from a parsed scenario description.

    Schema::

        {"nodes": [{"alpha_per_sec": float, "beta_ms": float}, ...],
         "file_groups": [{"count": int, "lambda_per_sec": float,
                          "n": int, "k": int,
                          "placement": [node indices],
                          "weight": optional group weight}, ...],
         "epsilon": optional float}

    Weights default to lambda_i / sum(lambda); a group "weight" entry
    overrides the group's total weight (split equally over its files).
    """
    try:
        node_specs = raw_config["nodes"]
        group_specs = raw_config["file_groups"]
    except KeyError as exc:
        raise ModelError(f"scenario missing required key: {exc}") from exc

    nodes = tuple(
        NodeParams(float(n["alpha_per_sec"]), float(n["beta_ms"]) / MS_PER_S)
        for n in node_specs
    )
    m = len(nodes)
    if m == 0:
        raise ModelError("scenario has no nodes")

    lam, counts, group_weights = [], [], []
    for g in group_specs:
        count = int(g.get("count", 1))
        if count < 1:
            raise ModelError("file group count must be >= 1")
        counts.append(count)
        rate = float(g["lambda_per_sec"])
        if rate <= 0:
            raise ModelError("lambda_per_sec must be positive")
        lam.append(rate)
        group_weights.append(g.get("weight"))

    total_lambda = sum(l * c for l, c in zip(lam, counts))
    if any(w is not None for w in group_weights) and not all(
        w is not None for w in group_weights
    ):
        raise ModelError("either all file groups carry a weight or none do")

    files = []
    for g, count, l, gw in zip(group_specs, counts, lam, group_weights):
        n_code, k_code = int(g["n"]), int(g["k"])
        placement = [int(j) for j in g["placement"]]
        if len(set(placement)) != len(placement):
            raise ModelError("duplicate node indices in a placement")
        if len(placement) != n_code:
            raise ModelError(
                f"placement size {len(placement)} != n={n_code}"
            )
        if n_code > m:
            raise ModelError(f"code n={n_code} exceeds node count m={m}")
        if gw is None:
            per_file_weight = l / total_lambda
        else:
            per_file_weight = float(gw) / count
        for _ in range(count):
            files.append(
                FileClass(n_code, k_code, l, per_file_weight, frozenset(placement))
            )

    epsilon = float(raw_config.get("epsilon", DEFAULT_EPSILON))
    return SystemModel(nodes, tuple(files), epsilon)


def load_scenario(path) -> SystemModel:
    with open(path) as fh:
        return validate_system(json.load(fh))


def aggregate_arrival(pi: np.ndarray, model: SystemModel) -> np.ndarray:
    """Per-node aggregate chunk arrival rate: Lambda_j = sum_i lambda_i pi_ij."""
    return model.lambdas @ pi


def traffic_intensity(lam, alpha, beta):
    """rho = Lambda * (1/alpha + beta).  Broadcasts over arrays."""
    return lam * (1.0 / np.asarray(alpha) + np.asarray(beta))


def check_access_matrix(pi: np.ndarray, model: SystemModel, support=None, tol=ROW_SUM_TOL):
    """Raise ModelError unless pi satisfies the access-matrix invariants."""
    if support is None:
        support = model.support
    pi = np.asarray(pi)
    if pi.shape != (model.r, model.m):
        raise ModelError(f"access matrix shape {pi.shape} != {(model.r, model.m)}")
    if (pi < -tol).any() or (pi > 1 + tol).any():
        raise ModelError("access probabilities outside [0, 1]")
    if np.abs(pi[~support]).max(initial=0.0) > tol:
        raise ModelError("nonzero access probability off the placement support")
    row_err = np.abs(pi.sum(axis=1) - model.ks)
    if row_err.max() > tol:
        raise ModelError(f"row sums deviate from k by up to {row_err.max():.3g}")
