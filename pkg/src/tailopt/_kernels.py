"""Hot numeric kernels for the fork-join simulation.

Single-source loops, compiled with numba unless TAILOPT_PURE_NUMPY=1
(see _backend).  All randomness enters through pre-generated uniform
arrays so both backends are bit-identical and fully seeded.
"""

import numpy as np

from ._backend import maybe_njit


@maybe_njit(cache=True)
def fcfs_fork_join(file_ids, arrivals, ks, offsets, cums, u_sel, u_serv, alphas, betas):
    """Run the fork-join FCFS dynamics over all requests in arrival order.

    Per request: pick k distinct nodes by systematic (Madow) sampling
    from the file's access-probability row, draw shifted-exponential
    service times, and advance each node's FCFS completion clock.  The
    request latency is the slowest of its chunks.

    Returns (latencies, chunk_nodes, chunk_service, chunk_completion);
    chunk arrays are laid out per request via ``offsets``.
    """
    n = file_ids.shape[0]
    m = alphas.shape[0]
    total = offsets[n]
    last = np.zeros(m)
    latencies = np.empty(n)
    chunk_nodes = np.empty(total, dtype=np.int64)
    chunk_service = np.empty(total)
    chunk_completion = np.empty(total)
    for q in range(n):
        f = file_ids[q]
        a = arrivals[q]
        k = ks[q]
        off = offsets[q]
        u = u_sel[q]
        j = 0
        lmax = 0.0
        for l in range(k):
            point = u + l
            while cums[f, j + 1] <= point:
                j += 1
            node = j
            serv = betas[node] - np.log(1.0 - u_serv[off + l]) / alphas[node]
            start = a if a > last[node] else last[node]
            comp = start + serv
            last[node] = comp
            chunk_nodes[off + l] = node
            chunk_service[off + l] = serv
            chunk_completion[off + l] = comp
            d = comp - a
            if d > lmax:
                lmax = d
        latencies[q] = lmax
    return latencies, chunk_nodes, chunk_service, chunk_completion
