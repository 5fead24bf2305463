"""feasibility-projection contracts, with a cvxpy QP oracle."""

import numpy as np
import pytest

from tailopt import project_capped_simplex, project_feasible
from tailopt.model import InfeasibleRegionError, aggregate_arrival, check_access_matrix
from tailopt.projection import nearest_feasible_init, node_caps, project_rows

from conftest import make_model


def qp_projection(pi0, t, model):
    """Dense QP oracle for project_feasible on small instances."""
    import cvxpy as cp

    caps = node_caps(t, model)
    p = cp.Variable((model.r, model.m))
    cons = [p >= 0, p <= 1]
    for i in range(model.r):
        cons.append(cp.sum(p[i, :]) == float(model.ks[i]))
        for j in range(model.m):
            if not model.support[i, j]:
                cons.append(p[i, j] == 0)
    for j in range(model.m):
        cons.append(model.lambdas @ p[:, j] <= caps[j])
    prob = cp.Problem(cp.Minimize(cp.sum_squares(p - pi0)), cons)
    prob.solve(solver=cp.CLARABEL)
    assert prob.status == cp.OPTIMAL
    return p.value


class TestCappedSimplex:
    def test_feasible_unchanged(self):
        # [TRIVIAL] projection idempotence on a feasible point
        v = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(project_capped_simplex(v, 1.0), v, atol=1e-12)

    def test_uniform_oracle(self):
        # [DERIVED: KKT by hand] (0.5,0.5,0.5), k=1 -> (1/3,1/3,1/3)
        out = project_capped_simplex(np.array([0.5, 0.5, 0.5]), 1.0)
        np.testing.assert_allclose(out, 1.0 / 3.0, atol=1e-10)

    def test_clamp_at_cap(self):
        # [TRIVIAL] (10,0,0), k=1 -> (1,0,0)
        out = project_capped_simplex(np.array([10.0, 0.0, 0.0]), 1.0)
        np.testing.assert_allclose(out, [1.0, 0.0, 0.0], atol=1e-10)

    def test_random_against_qp(self):
        import cvxpy as cp

        rng = np.random.default_rng(2)
        for _ in range(20):
            n = rng.integers(2, 8)
            k = float(rng.integers(1, n + 1))
            v = rng.normal(0, 2, size=n)
            w = cp.Variable(n)
            prob = cp.Problem(
                cp.Minimize(cp.sum_squares(w - v)),
                [w >= 0, w <= 1, cp.sum(w) == k],
            )
            prob.solve(solver=cp.CLARABEL)
            # the interior-point oracle itself is only ~1e-6 accurate
            np.testing.assert_allclose(
                project_capped_simplex(v, k), w.value, atol=1e-5
            )

    def test_row_sums_exact(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = rng.integers(2, 10)
            k = float(rng.integers(1, n + 1))
            out = project_capped_simplex(rng.normal(0, 3, size=n), k)
            assert abs(out.sum() - k) < 1e-9
            assert out.min() >= 0 and out.max() <= 1


class TestProjectFeasible:
    def test_feasible_input_unchanged(self, small_model):
        pi, t = nearest_feasible_init(small_model)
        out = project_feasible(pi, t, small_model)
        np.testing.assert_allclose(out, pi, atol=1e-8)

    def test_cap_binding_two_nodes_qp(self):
        # [DERIVED: QP oracle] cap binds on node 1; mass shifts to node 2
        model = make_model(
            [(5.0, 10.0), (20.0, 10.0)],
            [{"count": 1, "lambda_per_sec": 3.0, "n": 2, "k": 1, "placement": [0, 1]}],
        )
        t = np.array([2.0, 2.0])
        pi0 = np.array([[0.95, 0.05]])
        out = project_feasible(pi0, t, model)
        oracle = qp_projection(pi0, t, model)
        np.testing.assert_allclose(out, oracle, atol=1e-6)
        assert out[0, 1] > pi0[0, 1]  # mass moved to the fast node

    def test_peap_start_small_instance_qp(self, small_model):
        # [DERIVED: QP oracle] k/n pattern on a 3-file/4-node instance
        ns = np.array([f.code_n for f in small_model.files], dtype=float)
        pattern = np.where(
            small_model.support, (small_model.ks / ns)[:, None], 0.0
        )
        t = np.full(small_model.m, 1.5)
        out = project_feasible(pattern, t, small_model)
        oracle = qp_projection(pattern, t, small_model)
        np.testing.assert_allclose(out, oracle, atol=1e-6)

    def test_random_instances_qp(self):
        # acceptance-5 support: dense QP agreement for r*m <= 12
        rng = np.random.default_rng(6)
        for trial in range(8):
            m = int(rng.integers(2, 5))
            r = max(1, 12 // m - rng.integers(0, 2))
            nodes = [(float(rng.uniform(8, 30)), float(rng.uniform(5, 15)))
                     for _ in range(m)]
            groups = []
            for _ in range(r):
                n_code = int(rng.integers(1, m + 1))
                k_code = int(rng.integers(1, n_code + 1))
                placement = sorted(rng.choice(m, size=n_code, replace=False).tolist())
                groups.append({
                    "count": 1, "lambda_per_sec": float(rng.uniform(0.2, 1.5)),
                    "n": n_code, "k": k_code, "placement": placement,
                })
            model = make_model(nodes, groups)
            t = np.full(m, float(rng.uniform(0.5, 2.0)))
            pi0 = rng.random((model.r, model.m))
            out = project_feasible(pi0, t, model)
            oracle = qp_projection(pi0, t, model)
            np.testing.assert_allclose(out, oracle, atol=1e-6)

    def test_output_always_feasible(self, table1):
        rng = np.random.default_rng(19)
        t = np.full(table1.m, 1.0)
        caps = node_caps(t, table1)
        for _ in range(5):
            pi0 = rng.random((table1.r, table1.m))
            out = project_feasible(pi0, t, table1)
            check_access_matrix(out, table1, tol=1e-6)
            lam = aggregate_arrival(out, table1)
            assert np.all(lam <= caps + 1e-6)

    def test_idempotence(self, small_model):
        rng = np.random.default_rng(23)
        t = np.full(small_model.m, 1.0)
        p1 = project_feasible(rng.random((small_model.r, small_model.m)), t, small_model)
        p2 = project_feasible(p1, t, small_model)
        np.testing.assert_allclose(p2, p1, atol=1e-8)

    def test_nonexpansive(self, small_model):
        rng = np.random.default_rng(29)
        t = np.full(small_model.m, 1.0)
        for _ in range(10):
            u = rng.random((small_model.r, small_model.m)) * 2
            v = rng.random((small_model.r, small_model.m)) * 2
            pu = project_feasible(u, t, small_model)
            pv = project_feasible(v, t, small_model)
            assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) + 1e-7

    def test_infeasible_region_error(self):
        # [TRIVIAL] overloaded: total demand above total cap
        model = make_model(
            [(5.0, 10.0)],
            [{"count": 1, "lambda_per_sec": 10.0, "n": 1, "k": 1, "placement": [0]}],
        )
        with pytest.raises(InfeasibleRegionError):
            project_feasible(np.array([[1.0]]), np.array([1.0]), model)


class TestNearestFeasibleInit:
    def test_table1_feasible_start(self, table1):
        # [PAPER] margins <= -eps at the initialization
        from tailopt import stability_margin

        pi, t = nearest_feasible_init(table1)
        check_access_matrix(pi, table1, tol=1e-6)
        lam = aggregate_arrival(pi, table1)
        margins = stability_margin(t, lam, table1.alphas, table1.betas)
        assert np.all(margins <= -table1.epsilon + 1e-12)
        np.testing.assert_allclose(t, 0.01)

    def test_degenerate_single(self):
        # [TRIVIAL] k=n=1 -> pi=1, t=0.01
        model = make_model(
            [(20.0, 10.0)],
            [{"count": 1, "lambda_per_sec": 1.0, "n": 1, "k": 1, "placement": [0]}],
        )
        pi, t = nearest_feasible_init(model)
        np.testing.assert_allclose(pi, [[1.0]], atol=1e-9)
        np.testing.assert_allclose(t, [0.01])

    def test_overloaded_error(self):
        # [TRIVIAL] no t can admit the demand
        model = make_model(
            [(5.0, 10.0)],
            [{"count": 1, "lambda_per_sec": 10.0, "n": 1, "k": 1, "placement": [0]}],
        )
        with pytest.raises(InfeasibleRegionError):
            nearest_feasible_init(model)


class TestProjectRows:
    def test_matches_per_row_projection(self, small_model):
        rng = np.random.default_rng(31)
        pi = rng.normal(0, 1, size=(small_model.r, small_model.m))
        out = project_rows(pi, small_model, small_model.support)
        for i in range(small_model.r):
            idx = np.flatnonzero(small_model.support[i])
            row = project_capped_simplex(pi[i, idx], float(small_model.ks[i]))
            np.testing.assert_allclose(out[i, idx], row, atol=1e-9)
            assert np.all(out[i, ~small_model.support[i]] == 0.0)
