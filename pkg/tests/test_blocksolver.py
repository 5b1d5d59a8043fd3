"""Block fixed-point solver tests, anchored on independent oracles."""

import math

import numpy as np
import pytest

from structham.blocksolver import (
    BlockAnchor,
    DivergenceError,
    NonConvergenceError,
    SolverConfig,
    integrate,
    init_block,
    make_anchor,
    pe_update,
    se_update,
    solve_block,
)
from structham.numerics import NATIVE
from structham.problems import (
    HamiltonianProblem,
    make_kepler,
    make_mass_spring,
    make_pendulum,
    make_two_spring,
)
from structham.secoeff import ConfigurationError, Formulation, assemble_tables, coeff_table, kernel_basis

from oracles import dense_block_oracle


class TestInitBlock:
    def test_mass_spring_hand_values(self):
        prob = make_mass_spring()
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, "zd")
        table = coeff_table(1, "zd", 0.1)
        state = init_block(anchor, prob, table)
        assert state.Zx[0][0, 0] == pytest.approx(1.0)
        assert state.Zp[0][0, 0] == pytest.approx(-0.1)
        assert state.Dx[0][0, 0] == pytest.approx(-0.1)
        assert state.Dp[0][0, 0] == pytest.approx(-1.0)

    def test_equilibrium_constant_block(self):
        prob = make_pendulum(x0=0.0, p0=0.0)
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, "zds")
        state = init_block(anchor, prob, coeff_table(3, "zds", 0.2))
        assert np.max(np.abs(state.Zx)) == 0.0
        assert np.max(np.abs(state.Zp)) == 0.0

    def test_kepler_second_order_predictor(self):
        prob = make_kepler()
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, "zds")
        state = init_block(anchor, prob, coeff_table(1, "zds", 0.01))
        assert state.Zx[0][0, 0] == pytest.approx(0.4 - 3.125e-4, abs=1e-15)
        assert state.Zx[0][1, 0] == pytest.approx(0.02, abs=1e-15)


class TestSeUpdate:
    def test_zero_state_linearity(self):
        prob = make_mass_spring(x0=0.0, p0=0.0)
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, "zds")
        table = coeff_table(2, "zds", 0.5)
        state = init_block(anchor, prob, table)
        Zx, Zp = se_update(table, anchor, state)
        assert np.max(np.abs(Zx)) == 0.0
        assert np.max(np.abs(Zp)) == 0.0

    def test_quadratic_reproduction_zds_r1(self):
        # x(t) = t^2 with anchor (Z, D, S) = (0, 0, 2) and candidate node
        # values D1 = 2, S1 = 2 must return Z1 = 1 at dt = 1
        table = coeff_table(1, "zds", 1.0)
        anchor = BlockAnchor(
            t=0.0,
            Zx=np.array([[0.0]]), Zp=np.array([[0.0]]),
            Dx=np.array([[0.0]]), Dp=np.array([[0.0]]),
            Sx=np.array([[2.0]]), Sp=np.array([[0.0]]),
        )
        from structham.blocksolver import BlockState

        state = BlockState(
            Zx=np.zeros((1, 1, 1)), Zp=np.zeros((1, 1, 1)),
            Dx=np.array([[[2.0]]]), Dp=np.zeros((1, 1, 1)),
            Sx=np.array([[[2.0]]]), Sp=np.zeros((1, 1, 1)),
        )
        Zx, _ = se_update(table, anchor, state)
        assert Zx[0][0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_cubic_reproduction_zd_r2(self):
        # x(t) = t^3 sampled with D = 3 t^2: predicted (Z1, Z2) = (1, 8)
        table = coeff_table(2, "zd", 1.0)
        anchor = BlockAnchor(
            t=0.0,
            Zx=np.array([[0.0]]), Zp=np.array([[0.0]]),
            Dx=np.array([[0.0]]), Dp=np.array([[0.0]]),
        )
        from structham.blocksolver import BlockState

        state = BlockState(
            Zx=np.zeros((2, 1, 1)), Zp=np.zeros((2, 1, 1)),
            Dx=np.array([[[3.0]], [[12.0]]]), Dp=np.zeros((2, 1, 1)),
        )
        Zx, _ = se_update(table, anchor, state)
        assert Zx[0][0, 0] == pytest.approx(1.0, abs=1e-12)
        assert Zx[1][0, 0] == pytest.approx(8.0, abs=1e-12)


class TestPeUpdate:
    def test_mass_spring_node_values(self):
        prob = make_mass_spring()
        Zx = np.array([[[1.0]]])
        Zp = np.array([[[0.0]]])
        Dx, Dp, Sx, Sp, calls = pe_update(prob, Zx, Zp, second=True)
        assert calls == 1
        assert Dx[0][0, 0] == 0.0 and Dp[0][0, 0] == -1.0
        assert Sx[0][0, 0] == -1.0 and Sp[0][0, 0] == 0.0

    def test_free_particle(self):
        def ham(X, P):
            return 0.5 * (P * P).sum()

        prob = HamiltonianProblem(
            name="free", dim=1, nbodies=1,
            x0=np.array([[0.0]]), p0=np.array([[1.0]]),
            separable=True,
            hamiltonian=ham,
            first_rhs=lambda X, P: (P.copy(), np.zeros_like(X)),
            second_rhs=lambda X, P, DX, DP: (DP.copy(), np.zeros_like(X)),
        )
        Dx, Dp, Sx, Sp, _ = pe_update(prob, np.array([[[3.0]]]), np.array([[[2.0]]]), True)
        assert Dx[0][0, 0] == 2.0 and Dp[0][0, 0] == 0.0
        assert Sx[0][0, 0] == 0.0 and Sp[0][0, 0] == 0.0

    def test_pendulum_node_values(self):
        prob = make_pendulum()
        Zx = np.array([[[math.pi / 4]]])
        Zp = np.array([[[0.0]]])
        Dx, Dp, Sx, Sp, _ = pe_update(prob, Zx, Zp, second=True)
        assert Dx[0][0, 0] == 0.0
        assert Dp[0][0, 0] == pytest.approx(-math.sqrt(2) / 2)
        assert Sx[0][0, 0] == pytest.approx(-math.sqrt(2) / 2)
        assert Sp[0][0, 0] == 0.0


class TestSolveBlock:
    @pytest.mark.parametrize("form", ["zd", "zds"])
    @pytest.mark.parametrize("R", [1, 2, 3, 4])
    def test_oracle_equivalence_mass_spring(self, R, form):
        prob = make_mass_spring()
        tol = 1e-14
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, form)
        table = coeff_table(R, form, 0.1)
        state, _ = solve_block(anchor, prob, table, SolverConfig(tol=tol))
        Zx_ref, Zp_ref = dense_block_oracle(prob, table, anchor)
        assert np.max(np.abs(state.Zx[:, 0, 0] - Zx_ref[:, 0])) <= 10 * tol
        assert np.max(np.abs(state.Zp[:, 0, 0] - Zp_ref[:, 0])) <= 10 * tol

    @pytest.mark.parametrize("form", ["zd", "zds"])
    @pytest.mark.parametrize("R", [1, 2, 3, 4])
    def test_oracle_equivalence_two_spring(self, R, form):
        prob = make_two_spring()
        tol = 1e-14
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, form)
        table = coeff_table(R, form, 0.05)
        state, _ = solve_block(anchor, prob, table, SolverConfig(tol=tol))
        Zx_ref, Zp_ref = dense_block_oracle(prob, table, anchor)
        assert np.max(np.abs(state.Zx.reshape(R, 2) - Zx_ref)) <= 10 * tol
        assert np.max(np.abs(state.Zp.reshape(R, 2) - Zp_ref)) <= 10 * tol

    def test_equilibrium_one_iteration(self):
        prob = make_pendulum(x0=0.0, p0=0.0)
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, "zds")
        state, stats = solve_block(anchor, prob, coeff_table(2, "zds", 0.3), SolverConfig())
        assert stats.iterations == 1
        assert np.max(np.abs(state.Zx)) == 0.0

    @pytest.mark.parametrize("form,R", [("zd", 2), ("zds", 1), ("zds", 3)])
    def test_iteration_accounting(self, form, R):
        prob = make_pendulum()
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, form)
        state, stats = solve_block(anchor, prob, coeff_table(R, form, 0.1), SolverConfig())
        assert stats.pe1_calls == R * (stats.iterations + 1)
        if form == "zds":
            assert stats.pe2_calls == stats.pe1_calls
        else:
            assert stats.pe2_calls == 0

    def test_divergence_detected(self):
        prob = make_mass_spring()
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, "zd")
        with pytest.raises(DivergenceError):
            solve_block(anchor, prob, coeff_table(1, "zd", 1e8), SolverConfig())

    def test_nonconvergence_detected(self):
        prob = make_mass_spring()
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, "zd")
        with pytest.raises((NonConvergenceError, DivergenceError)):
            solve_block(anchor, prob, coeff_table(1, "zd", 4.0), SolverConfig(max_iter=50))


def max_position_error(prob, traj):
    err = 0.0
    for t, X in zip(traj.times, traj.xs):
        Xe, _ = prob.exact_solution(t)
        err = max(err, float(np.max(np.abs(X - Xe))))
    return err


class TestIntegrate:
    def test_single_block_node_count(self):
        prob = make_mass_spring()
        traj = integrate(prob, "zds", 4, 4, 0.4, SolverConfig())
        assert len(traj.times) == 5
        assert traj.times[0] == 0.0
        assert traj.n_blocks == 1

    def test_partial_final_block(self):
        prob = make_mass_spring()
        traj = integrate(prob, "zd", 2, 5, 0.5, SolverConfig())
        assert len(traj.times) == 6
        assert traj.n_blocks == 3  # 2 + 2 + 1
        assert max_position_error(prob, traj) < 1e-4

    def test_mass_spring_zd_r2_table_value(self):
        prob = make_mass_spring()
        traj = integrate(prob, "zd", 2, 960, 100.0, SolverConfig())
        err = max_position_error(prob, traj)
        assert err == pytest.approx(2.25e-4, rel=2.0)  # within factor 3

    def test_mass_spring_zds_r1_table_value(self):
        prob = make_mass_spring()
        traj = integrate(prob, "zds", 1, 960, 100.0, SolverConfig())
        err = max_position_error(prob, traj)
        assert err == pytest.approx(1.41e-5, rel=2.0)

    def test_pendulum_zds_r2_endpoint(self):
        prob = make_pendulum()
        traj = integrate(prob, "zds", 2, 960, 100.0, SolverConfig())
        err = abs(float(traj.xs[-1][0, 0]) - (-0.2633498226088722))
        assert err == pytest.approx(6.93e-9, rel=2.0)

    def test_observer_contract(self):
        prob = make_mass_spring()
        seen = []
        integrate(prob, "zd", 3, 7, 0.7, SolverConfig(),
                  observer=lambda idx, t, X, P: seen.append((idx, float(t))))
        assert [i for i, _ in seen] == list(range(8))
        times = [t for _, t in seen]
        assert times == sorted(times)

    def test_n_less_than_r_rejected(self):
        prob = make_mass_spring()
        with pytest.raises(ConfigurationError):
            integrate(prob, "zd", 4, 2, 1.0, SolverConfig())

    def test_run_accounting_identity(self):
        prob = make_pendulum()
        traj = integrate(prob, "zds", 2, 100, 10.0, SolverConfig())
        # one init unit per block plus sweeps; R PE calls each, plus the
        # t=0 anchor evaluation
        assert traj.pe1_calls == 2 * traj.total_iter + 1


def measured_orders(prob, form, R, Ns, T=100.0):
    errs = []
    for N in Ns:
        traj = integrate(prob, form, R, N, T, SolverConfig())
        errs.append(max_position_error(prob, traj))
    orders = []
    for (N1, e1), (N2, e2) in zip(zip(Ns, errs), zip(Ns[1:], errs[1:])):
        if e1 > 1e-13 and e2 > 1e-13:
            orders.append(math.log(e1 / e2) / math.log(N2 / N1))
    return errs, orders


class TestConvergenceOrders:
    @pytest.mark.parametrize(
        "form,R,expected",
        [("zd", 2, 4.0), ("zd", 4, 6.0), ("zds", 1, 4.0), ("zds", 2, 6.0)],
    )
    def test_mass_spring_orders(self, form, R, expected):
        prob = make_mass_spring()
        Ns = [120, 240, 480, 960]
        _, orders = measured_orders(prob, form, R, Ns)
        assert orders, "no order measurable above the error floor"
        for o in orders[-2:]:
            assert abs(o - expected) <= 0.4


class TestPolynomialReproduction:
    @staticmethod
    def _poly_problem(coeffs):
        # H(x, p) = q(p) - x gives dx/dt = q'(p), dp/dt = 1; with p(0) = 0
        # the position reproduces x0 + q(t) - q(0) and p(t) = t.
        q = np.polynomial.Polynomial(coeffs)
        dq = q.deriv()
        ddq = dq.deriv()

        def first_rhs(X, P):
            return np.array([[dq(P[0, 0])]]), np.array([[1.0]])

        def second_rhs(X, P, DX, DP):
            return np.array([[ddq(P[0, 0]) * DP[0, 0]]]), np.array([[0.0]])

        return HamiltonianProblem(
            name="poly", dim=1, nbodies=1,
            x0=np.array([[0.0]]), p0=np.array([[0.0]]),
            separable=False,
            hamiltonian=lambda X, P: q(P[0, 0]) - X[0, 0],
            first_rhs=first_rhs,
            second_rhs=second_rhs,
        ), q

    @pytest.mark.parametrize("form,R", [("zd", 1), ("zd", 3), ("zds", 1), ("zds", 2)])
    def test_exactness_degree_polynomial(self, form, R):
        degree = Formulation.parse(form).exactness_degree(R)
        rng = np.random.default_rng(degree + R)
        coeffs = rng.uniform(-1, 1, degree + 1)
        prob, q = self._poly_problem(coeffs)
        # N divisible by R: a partial final block would drop the degree
        traj = integrate(prob, form, R, 4 * R, 2.0, SolverConfig(tol=1e-15, max_iter=400))
        scale = max(1.0, max(abs(q(t) - q(0.0)) for t in traj.times))
        for t, X in zip(traj.times, traj.xs):
            assert abs(float(X[0, 0]) - (q(t) - q(0.0))) <= 1e-10 * scale


class TestSymmetryAndInvariance:
    def test_xp_symmetry(self):
        # integrating H~(x, p) = H(p, -x) from (x~, p~)(0) = (-p0, x0) must
        # reproduce (x~, p~)(t) = (-p(t), x(t)) node for node
        base = make_two_spring()

        def first_rhs(X, P):
            bx, bp = base.first_rhs(P, -X)
            return -bp, bx

        def second_rhs(X, P, DX, DP):
            sx, sp = base.second_rhs(P, -X, DP, -DX)
            return -sp, sx

        twisted = HamiltonianProblem(
            name="twisted", dim=1, nbodies=2,
            x0=-base.p0, p0=base.x0,
            separable=False,
            hamiltonian=lambda X, P: base.hamiltonian(P, -X),
            first_rhs=first_rhs,
            second_rhs=second_rhs,
        )
        tol = 1e-14
        cfg = SolverConfig(tol=tol)
        t1 = integrate(base, "zds", 2, 64, 4.0, cfg)
        t2 = integrate(twisted, "zds", 2, 64, 4.0, cfg)
        worst = 0.0
        for Xb, Pb, Xt, Pt in zip(t1.xs, t1.ps, t2.xs, t2.ps):
            worst = max(worst, float(np.max(np.abs(Xt - (-Pb)))), float(np.max(np.abs(Pt - Xb))))
        assert worst <= 100 * tol

    def test_basis_rotation_invariance(self):
        prob = make_mass_spring()
        tol = 1e-14
        anchor = make_anchor(prob, 0.0, prob.x0, prob.p0, "zd")
        theta = 0.7
        rot = np.array([[math.cos(theta), math.sin(theta)],
                        [-math.sin(theta), math.cos(theta)]])
        table_a = assemble_tables(kernel_basis(2, "zd"), 0.1)
        table_b = assemble_tables(kernel_basis(2, "zd").rotated(rot), 0.1)
        sa, _ = solve_block(anchor, prob, table_a, SolverConfig(tol=tol))
        sb, _ = solve_block(anchor, prob, table_b, SolverConfig(tol=tol))
        assert np.max(np.abs(sa.Zx - sb.Zx)) <= 100 * tol
        assert np.max(np.abs(sa.Zp - sb.Zp)) <= 100 * tol
