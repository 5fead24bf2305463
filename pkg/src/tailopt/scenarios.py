"""Built-in scenario: the 12-node heterogeneous store with four file groups.

Desk-scale default is 5 files per group (r = 20); the full-scale setup
uses 250 per group.  Group g of files uses a (7,4) code, per-file
arrival rates (2, 4, 6, 3)/150 per second, and sliding placement
windows over the 12 nodes.
"""

from __future__ import annotations

from .model import SystemModel, validate_system

TABLE1_ALPHA = (
    20.0015, 26.1252, 14.9850, 17.0526, 27.1422, 22.8919,
    30.0000, 21.3812, 11.9106, 25.1599, 28.8188, 23.8067,
)
TABLE1_BETA_MS = (
    10.5368, 15.6018, 8.2756, 10.0120, 12.8544, 13.6722,
    12.6616, 9.9156, 10.7872, 8.6166, 13.8721, 10.8964,
)

GROUP_RATES = (2.0 / 150.0, 4.0 / 150.0, 6.0 / 150.0, 3.0 / 150.0)
# node windows, 0-indexed: nodes 1-7, 2-8, 4-10, 6-12 in 1-indexed terms
GROUP_PLACEMENTS = (
    tuple(range(0, 7)),
    tuple(range(1, 8)),
    tuple(range(3, 10)),
    tuple(range(5, 12)),
)
CODE_N, CODE_K = 7, 4


def builtin_table1_scenario(
    files_per_group: int = 5,
    rate_multiplier: float = 1.0,
    epsilon: float = 1e-6,
) -> SystemModel:
    if files_per_group < 1:
        raise ValueError("files_per_group must be >= 1")
    if rate_multiplier <= 0:
        raise ValueError("rate_multiplier must be positive")
    raw = {
        "nodes": [
            {"alpha_per_sec": a, "beta_ms": b}
            for a, b in zip(TABLE1_ALPHA, TABLE1_BETA_MS)
        ],
        "file_groups": [
            {
                "count": files_per_group,
                "lambda_per_sec": rate * rate_multiplier,
                "n": CODE_N,
                "k": CODE_K,
                "placement": list(placement),
            }
            for rate, placement in zip(GROUP_RATES, GROUP_PLACEMENTS)
        ],
        "epsilon": epsilon,
    }
    return validate_system(raw)
