import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import fock_ladder, scalar_spec, stable_spec
from qpmedia.errors import FrequencyNotCovered, ThermalSingularity
from qpmedia.openquantum import (
    SystemCoupling,
    assemble_master_equation,
    bohr_decompose,
    classical_correlation,
    correlation_frequency,
    correlation_time,
    dissipator,
    lamb_shift,
    thermal_correlation,
    x_block,
)
from qpmedia.phasespace import GaussianState, thermal_state
from qpmedia.spectral import prepare, symplectic_form


def vacuum_state(n, hbar=1.0):
    return GaussianState(mean=np.zeros(4 * n), cov=(hbar / 2.0) * np.eye(4 * n), hbar=hbar)


class TestCorrelationTime:
    def test_initial_value(self):
        spec = stable_spec(seed=401, n=2)
        ext, _ = prepare(spec)
        rng = np.random.default_rng(1)
        mean = rng.standard_normal(8)
        state = GaussianState(mean=mean, cov=0.5 * np.eye(8), hbar=0.7)
        xi0 = correlation_time(ext, state, 0.0)
        J = symplectic_form(4)
        expected = 0.5 * np.eye(8) + 0.35j * J.T + np.outer(mean, mean)
        assert np.abs(xi0 - expected).max() < 1e-12

    def test_semigroup_residual(self):
        spec = stable_spec(seed=402, n=2)
        ext, _ = prepare(spec)
        state = vacuum_state(2)
        t, s = 0.8, 0.5
        from scipy.linalg import expm

        prop = expm(-ext.gen_JB * t)
        lhs = correlation_time(ext, state, t + s)
        rhs = prop @ correlation_time(ext, state, s)
        assert np.abs(lhs - rhs).max() < 1e-9

    def test_fock_oracle_hermitian_limit(self):
        # exact diagonalization of the quadratic Hamiltonian on a Fock grid;
        # the stiffness is kept near unity so cutoff 30 converges past 1e-6
        spec = scalar_spec(1.3, 0.0)
        ext, _ = prepare(spec)
        hbar = 1.0
        state = vacuum_state(1, hbar)
        A = ext.sim_A
        assert np.abs(A.imag).max() < 1e-12  # real metric in this limit
        pi_w = np.diag(A.real)
        x_w = np.diag(np.linalg.solve(A, ext.kappa).real)
        cutoff = 30
        x1, p1 = fock_ladder(cutoff)
        eye = np.eye(cutoff)
        ops = [
            np.kron(p1, eye),
            np.kron(eye, p1),
            np.kron(x1, eye),
            np.kron(eye, x1),
        ]  # ordering [pi_u, pi_v, u, v]
        H = (
            0.5 * pi_w[0] * ops[0] @ ops[0]
            + 0.5 * pi_w[1] * ops[1] @ ops[1]
            + 0.5 * x_w[0] * ops[2] @ ops[2]
            + 0.5 * x_w[1] * ops[3] @ ops[3]
        )
        evals, vecs = np.linalg.eigh(H)
        vac = np.zeros(cutoff**2)
        vac[0] = 1.0
        for t in (0.4, 1.3):
            phases = np.exp(1j * evals * t / hbar)
            u_fwd = (vecs * phases) @ vecs.conj().T
            u_bwd = (vecs * phases.conj()) @ vecs.conj().T
            xi = correlation_time(ext, state, t)
            for a in range(4):
                qa_t = u_fwd @ ops[a] @ u_bwd
                for b in range(4):
                    val = vac @ (qa_t @ (ops[b] @ vac))
                    assert abs(xi[a, b] - val) < 1e-6


class TestCorrelationFrequency:
    def test_hermiticity_of_gamma_and_s(self):
        for seed in (411, 412):
            spec = stable_spec(seed=seed, n=3)
            ext, _ = prepare(spec)
            corr = correlation_frequency(ext, vacuum_state(3), np.linspace(0.1, 3.0, 7), eta=1e-3)
            for i in range(corr.omega_grid.size):
                g = corr.gamma[i]
                s = corr.s_ls[i]
                assert np.abs(g - g.conj().T).max() < 1e-12 * max(1.0, np.abs(g).max())
                assert np.abs(s - s.conj().T).max() < 1e-12 * max(1.0, np.abs(s).max())

    def test_eta_cauchy_off_resonance(self):
        spec = stable_spec(seed=413, n=2)
        ext, _ = prepare(spec)
        state = vacuum_state(2)
        grid = np.array([0.11])  # off-resonant probe
        d1 = correlation_frequency(ext, state, grid, eta=1e-3)
        d2 = correlation_frequency(ext, state, grid, eta=1e-4)
        d3 = correlation_frequency(ext, state, grid, eta=1e-5)
        gap12 = np.abs(d1.xi - d2.xi).max()
        gap23 = np.abs(d2.xi - d3.xi).max()
        assert gap23 < gap12

    def test_time_quadrature_oracle(self):
        # Simpson quadrature of the half-domain transform, n = 1.  The
        # two-time matrix grows like exp(+Im mu t) along the ghost branch,
        # so eta must exceed that rate for the time integral to converge;
        # the resolvent form continues it analytically below.
        spec = scalar_spec(2.0, 0.3)
        ext, _ = prepare(spec)
        state = vacuum_state(1)
        omega, eta = 0.9, 0.8  # growth rate is Im mu = 0.3
        corr = correlation_frequency(ext, state, [omega], eta=eta)
        horizon = 40.0 / (eta - 0.3)
        m = 60001
        ts = np.linspace(0.0, horizon, m)
        h = ts[1] - ts[0]
        from scipy.linalg import expm

        step = expm(-ext.gen_JB * h)
        xi0 = correlation_time(ext, state, 0.0)
        total = np.zeros((4, 4), dtype=complex)
        cur = xi0.copy()
        weights = np.ones(m)
        weights[1:-1:2] = 4.0
        weights[2:-2:2] = 2.0
        weights *= h / 3.0
        for i, t in enumerate(ts):
            total += weights[i] * np.exp((1j * omega - eta) * t) * cur
            cur = step @ cur
        assert np.abs(x_block(total) - corr.xi[0]).max() < 1e-6


class TestThermalRoutes:
    def test_two_route_equivalence(self):
        spec = stable_spec(seed=421, n=2)
        ext, _ = prepare(spec)
        beta, hbar, eta = 1.4, 0.9, 1e-3
        grid = np.linspace(0.2, 2.0, 5)
        direct = thermal_correlation(ext, beta, hbar, grid, eta)
        via_state = correlation_frequency(ext, thermal_state(ext, beta, hbar), grid, eta)
        scale = np.abs(direct.xi).max()
        assert np.abs(direct.xi - via_state.xi).max() < 1e-9 * max(1.0, scale)

    def test_classical_limit_linear_slope(self):
        spec = stable_spec(seed=422, n=2)
        ext, _ = prepare(spec)
        beta, eta = 1.1, 1e-3
        grid = np.array([0.5, 1.5])
        ref = classical_correlation(ext, beta, grid, eta)
        hbars = np.array([1e-2, 1e-3, 1e-4])
        errs = []
        for hb in hbars:
            got = thermal_correlation(ext, beta, hb, grid, eta)
            errs.append(np.abs(got.xi - ref.xi).max())
        slope = np.polyfit(np.log(hbars), np.log(errs), 1)[0]
        assert abs(slope - 1.0) < 0.1

    def test_classical_beta_scaling(self):
        spec = stable_spec(seed=423, n=2)
        ext, _ = prepare(spec)
        grid = np.array([0.7])
        a = classical_correlation(ext, 1.0, grid, 1e-3)
        b = classical_correlation(ext, 2.0, grid, 1e-3)
        assert_allclose(b.xi, a.xi / 2.0, rtol=1e-12)

    def test_thermal_singularity_propagates(self):
        spec = scalar_spec(1.0, 2.0)  # overdamped: real generator eigenvalues
        ext, _ = prepare(spec)
        from qpmedia.phasespace import decompose_generator

        lam = max(decompose_generator(ext).values, key=lambda z: abs(z.real)).real
        beta = 2.0 * np.pi / abs(lam)
        with pytest.raises(ThermalSingularity):
            thermal_correlation(ext, beta, 1.0, [0.5], 1e-3)


class TestBohr:
    def coupling(self, ext, a_ops, h_sys):
        return SystemCoupling(h_system=h_sys, site_potentials=a_ops, medium=ext)

    def test_two_level_ladder(self):
        spec = stable_spec(seed=431, n=1)
        ext, _ = prepare(spec)
        w0 = 1.3
        sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        cpl = self.coupling(ext, (sx,), np.diag([0.0, w0]).astype(complex))
        bohr = bohr_decompose(cpl)
        assert set(np.round(bohr.frequencies, 10)) == {w0, -w0}
        lowering = bohr.ops[[f for f in bohr.frequencies if f > 0][0]][0]
        assert_allclose(lowering, [[0.0, 1.0], [0.0, 0.0]], atol=1e-12)

    def test_completeness(self):
        spec = stable_spec(seed=432, n=2)
        ext, _ = prepare(spec)
        rng = np.random.default_rng(2)
        h = rng.standard_normal((4, 4))
        h = (h + h.T) / 2
        a_ops = []
        for _ in range(2):
            a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            a_ops.append(a + a.conj().T)
        cpl = self.coupling(ext, tuple(a_ops), h.astype(complex))
        bohr = bohr_decompose(cpl)
        for alpha in range(2):
            total = sum(bohr.ops[f][alpha] for f in bohr.frequencies)
            assert np.abs(total - a_ops[alpha]).max() < 1e-12

    def test_degenerate_system(self):
        spec = stable_spec(seed=433, n=1)
        ext, _ = prepare(spec)
        a = np.array([[0.0, 2.0], [2.0, 1.0]], dtype=complex)
        cpl = self.coupling(ext, (a,), np.zeros((2, 2), dtype=complex))
        bohr = bohr_decompose(cpl)
        assert bohr.frequencies == (0.0,)
        assert_allclose(bohr.ops[0.0][0], a, atol=1e-12)

    def test_conjugate_pairing(self):
        spec = stable_spec(seed=434, n=1)
        ext, _ = prepare(spec)
        sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        cpl = self.coupling(ext, (sx,), np.diag([0.0, 0.9]).astype(complex))
        bohr = bohr_decompose(cpl)
        pos = [f for f in bohr.frequencies if f > 0][0]
        neg = [f for f in bohr.frequencies if f < 0][0]
        assert_allclose(bohr.ops[pos][0], bohr.ops[neg][0].conj().T, atol=1e-12)


class TestMasterEquation:
    def setup_problem(self, seed=441):
        spec = stable_spec(seed=seed, n=2)
        ext, _ = prepare(spec)
        w0 = 0.9
        h_sys = np.diag([0.0, w0]).astype(complex)
        sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        sz = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
        cpl = SystemCoupling(h_system=h_sys, site_potentials=(sx, 0.5 * sz), medium=ext)
        grid = np.linspace(-1.5, 1.5, 61)
        corr = thermal_correlation(ext, beta=1.0, hbar=1.0, omega_grid=grid, eta=1e-3)
        return cpl, corr

    def random_density(self, rng, d=2):
        m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        rho = m @ m.conj().T
        return rho / np.trace(rho)

    def test_trace_free_dissipator(self):
        cpl, corr = self.setup_problem()
        rng = np.random.default_rng(10)
        for _ in range(20):
            rho = self.random_density(rng)
            d = dissipator(cpl, corr, rho)
            assert abs(np.trace(d)) < 1e-12 * max(1.0, np.abs(d).max())

    def test_hermiticity_preserved(self):
        cpl, corr = self.setup_problem()
        rng = np.random.default_rng(11)
        for _ in range(20):
            rho = self.random_density(rng)
            d = dissipator(cpl, corr, rho)
            assert np.abs(d - d.conj().T).max() < 1e-12 * max(1.0, np.abs(d).max())

    def test_zero_coupling(self):
        spec = stable_spec(seed=442, n=2)
        ext, _ = prepare(spec)
        cpl = SystemCoupling(
            h_system=np.diag([0.0, 1.0]).astype(complex),
            site_potentials=(np.zeros((2, 2), complex), np.zeros((2, 2), complex)),
            medium=ext,
        )
        corr = thermal_correlation(ext, 1.0, 1.0, np.linspace(-1.5, 1.5, 31), 1e-3)
        rho = np.array([[0.6, 0.2], [0.2, 0.4]], dtype=complex)
        out = assemble_master_equation(cpl, corr, rho)
        assert np.abs(out).max() < 1e-15

    def test_lamb_shift_commutes_with_system(self):
        cpl, corr = self.setup_problem()
        h_ls = lamb_shift(cpl, corr)
        comm = cpl.h_system @ h_ls - h_ls @ cpl.h_system
        assert np.abs(comm).max() < 1e-10 * max(1.0, np.abs(h_ls).max())
        assert np.abs(h_ls - h_ls.conj().T).max() < 1e-12 * max(1.0, np.abs(h_ls).max())

    def test_missing_frequency_reported(self):
        cpl, corr = self.setup_problem()
        narrow = thermal_correlation(cpl.medium, 1.0, 1.0, np.linspace(0.0, 0.5, 11), 1e-3)
        with pytest.raises(FrequencyNotCovered):
            assemble_master_equation(cpl, narrow, np.eye(2, dtype=complex) / 2)
