"""Discrete-event fork-join simulation of the erasure-coded store.

Requests arrive as a merged Poisson stream; each samples a k-subset of
its file's placement via Madow systematic sampling (exact per-node
inclusion probabilities pi_ij) and forks one chunk per selected node.
Nodes serve FCFS with shifted-exponential times; a request completes
when its slowest chunk does.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import fcfs_fork_join
from .model import (
    InsufficientSamplesError,
    ModelError,
    SystemModel,
    aggregate_arrival,
    traffic_intensity,
)

log = logging.getLogger(__name__)

Z99 = 2.5758293035489004  # two-sided 99% normal quantile


@dataclass(frozen=True)
class SimConfig:
    request_count: int = 100_000
    warmup: float = 0.1  # fraction of requests discarded
    seed: int = 0
    replication_count: int = 1

    def __post_init__(self):
        if not 0 <= self.warmup < 0.5:
            raise ModelError("warmup fraction must be in [0, 0.5)")
        if self.request_count < 1_000:
            raise ModelError("request_count must be >= 1000")
        if self.replication_count < 1:
            raise ModelError("replication_count must be >= 1")


@dataclass
class SimResult:
    file_ids: np.ndarray        # post-warmup, pooled over replications
    arrivals: np.ndarray
    latencies: np.ndarray
    utilization: np.ndarray     # per node
    mean_queue_delay: np.ndarray
    mean_sojourn: np.ndarray
    chunk_counts: np.ndarray
    unstable: bool = False
    # populated when keep_chunk_data=True (single replication only)
    chunk_nodes: np.ndarray | None = field(default=None, repr=False)
    chunk_arrivals: np.ndarray | None = field(default=None, repr=False)
    chunk_completions: np.ndarray | None = field(default=None, repr=False)

    def per_file_samples(self, i: int) -> np.ndarray:
        return self.latencies[self.file_ids == i]


def sample_access_set(pi_row: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw k distinct node indices with inclusion probabilities pi_row.

    Madow systematic sampling: one uniform u selects the indices whose
    cumulative-probability cells contain u, u+1, ..., u+k-1.
    """
    pi_row = np.asarray(pi_row, dtype=float)
    if abs(pi_row.sum() - k) > 1e-6 or (pi_row < 0).any() or (pi_row > 1 + 1e-12).any():
        raise ModelError(f"row must lie in [0,1]^m and sum to k={k}")
    cum = np.concatenate(([0.0], np.cumsum(pi_row)))
    cum[-1] = k  # guard against cumulative round-off
    points = rng.random() + np.arange(k)
    return np.searchsorted(cum, points, side="right") - 1


def _run_one(model: SystemModel, pi, cfg: SimConfig, seed: int, keep_chunk_data: bool):
    rng = np.random.default_rng(seed)
    n = cfg.request_count
    lam = model.lambdas
    lam_tot = lam.sum()
    arrivals = np.cumsum(rng.exponential(1.0 / lam_tot, size=n))
    file_ids = rng.choice(model.r, size=n, p=lam / lam_tot)
    ks = model.ks[file_ids]
    offsets = np.concatenate(([0], np.cumsum(ks)))
    u_sel = rng.random(n)
    u_serv = rng.random(offsets[-1])

    cums = np.concatenate(
        (np.zeros((model.r, 1)), np.cumsum(pi, axis=1)), axis=1
    )
    cums[:, -1] = model.ks  # exact row totals for the systematic sweep

    latencies, chunk_nodes, chunk_service, chunk_completion = fcfs_fork_join(
        file_ids, arrivals, ks, offsets,
        cums, u_sel, u_serv, model.alphas, model.betas,
    )

    first = int(cfg.warmup * n)
    coff = offsets[first]
    chunk_arr = np.repeat(arrivals, ks)

    nodes_w = chunk_nodes[coff:]
    serv_w = chunk_service[coff:]
    comp_w = chunk_completion[coff:]
    arr_w = chunk_arr[coff:]
    t0, t1 = arrivals[first], arrivals[-1]
    span = max(t1 - t0, 1e-12)

    busy = np.bincount(nodes_w, weights=serv_w, minlength=model.m)
    soj = np.bincount(nodes_w, weights=comp_w - arr_w, minlength=model.m)
    qd = np.bincount(nodes_w, weights=comp_w - arr_w - serv_w, minlength=model.m)
    cnt = np.bincount(nodes_w, minlength=model.m)
    safe = np.maximum(cnt, 1)

    out = dict(
        file_ids=file_ids[first:],
        arrivals=arrivals[first:],
        latencies=latencies[first:],
        utilization=busy / span,
        mean_queue_delay=qd / safe,
        mean_sojourn=soj / safe,
        chunk_counts=cnt,
    )
    if keep_chunk_data:
        out.update(
            chunk_nodes=nodes_w, chunk_arrivals=arr_w, chunk_completions=comp_w
        )
    return out


def run_simulation(
    model: SystemModel, pi: np.ndarray, cfg: SimConfig, keep_chunk_data: bool = False
) -> SimResult:
    """Simulate; deterministic per seed.  Replications pool their samples."""
    pi = np.asarray(pi, dtype=float)
    row_err = np.abs(pi.sum(axis=1) - model.ks).max()
    if row_err > 1e-6:
        raise ModelError(f"pi row sums deviate from k by {row_err:.3g}")
    lam_vec = aggregate_arrival(pi, model)
    rho = traffic_intensity(lam_vec, model.alphas, model.betas)
    unstable = bool(np.any(rho >= 1))
    if unstable:
        warnings.warn("simulation running with an unstable node (rho >= 1)")

    runs = [
        _run_one(model, pi, cfg, cfg.seed + rep, keep_chunk_data and cfg.replication_count == 1)
        for rep in range(cfg.replication_count)
    ]
    cnt = np.sum([r["chunk_counts"] for r in runs], axis=0)
    safe = np.maximum(cnt, 1)
    result = SimResult(
        file_ids=np.concatenate([r["file_ids"] for r in runs]),
        arrivals=np.concatenate([r["arrivals"] for r in runs]),
        latencies=np.concatenate([r["latencies"] for r in runs]),
        utilization=np.mean([r["utilization"] for r in runs], axis=0),
        mean_queue_delay=np.sum(
            [r["mean_queue_delay"] * r["chunk_counts"] for r in runs], axis=0
        ) / safe,
        mean_sojourn=np.sum(
            [r["mean_sojourn"] * r["chunk_counts"] for r in runs], axis=0
        ) / safe,
        chunk_counts=cnt,
        unstable=unstable,
    )
    if keep_chunk_data and cfg.replication_count == 1:
        result.chunk_nodes = runs[0]["chunk_nodes"]
        result.chunk_arrivals = runs[0]["chunk_arrivals"]
        result.chunk_completions = runs[0]["chunk_completions"]
    return result


def empirical_tail(result: SimResult, x_grid, r: int | None = None):
    """Per-file Pr(L_i >= x) estimates with 99%-level half-widths.

    Returns (est, half) of shape (r, len(x_grid)).
    """
    x_grid = np.asarray(x_grid, dtype=float)
    if r is None:
        r = int(result.file_ids.max()) + 1
    est = np.empty((r, x_grid.size))
    half = np.empty((r, x_grid.size))
    for i in range(r):
        samples = result.per_file_samples(i)
        n = samples.size
        if n < 100:
            raise InsufficientSamplesError(
                f"file {i} has only {n} samples (< 100)"
            )
        p = (samples[:, None] >= x_grid[None, :]).mean(axis=0)
        est[i] = p
        half[i] = Z99 * np.sqrt(p * (1.0 - p) / n)
    return est, half


def write_trace(result: SimResult, path, delimiter: str = "\t"):
    """Dump one record per completed request: file_id, arrival_s, latency_s."""
    with open(path, "w", newline="") as fh:
        for fid, arr, lat in zip(result.file_ids, result.arrivals, result.latencies):
            fh.write(f"{int(fid)}{delimiter}{float(arr)!r}{delimiter}{float(lat)!r}\n")
