"""Gaussian-state propagation under the quadratic medium Hamiltonian.

Means and covariances evolve through the symplectic family
Lambda_t = exp(J B t) plus a driven shift Delta_t; Gaussian states stay
Gaussian, so no phase-space grid is ever materialized.  The canonical
ordering is q = [pi_u, pi_v, u, v].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .errors import ResonantFrequency, ThermalSingularity
from .medium import DriveSignal, spectral_amplitude
from .spectral import ExtendedOperator, symplectic_form

EXPM_FALLBACK_COND = 1e8


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and (complex, symmetric) covariance of a Gaussian state."""

    mean: NDArray[np.complex128]
    cov: NDArray[np.complex128]
    hbar: float = 1.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=complex).ravel()
        cov = np.asarray(self.cov, dtype=complex)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match the mean")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        asym = np.linalg.norm(cov - cov.T)
        scale = max(np.linalg.norm(cov), 1.0)
        if asym > 1e-10 * scale:
            raise ValueError(f"covariance asymmetry {asym / scale:.3e} too large")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", (cov + cov.T) / 2.0)


@dataclass(frozen=True)
class Propagator:
    """Integrals of motion at one time: q(t) = Lambda_t q + Delta_t."""

    lambda_t: NDArray[np.complex128]
    delta_t: NDArray[np.complex128]
    t: float
    used_expm_fallback: bool = False


@dataclass(frozen=True)
class GeneratorSpectral:
    """Cached eigendecomposition of the symplectic generator J B."""

    values: NDArray[np.complex128]
    vectors: NDArray[np.complex128]
    inverse: NDArray[np.complex128]
    cond: float

    @property
    def usable(self) -> bool:
        return np.isfinite(self.cond) and self.cond <= EXPM_FALLBACK_COND


def decompose_generator(ext: ExtendedOperator) -> GeneratorSpectral:
    if ext.gen_JB is None:
        raise ValueError("generator J_B not built; call spectral.prepare first")
    values, vectors = np.linalg.eig(ext.gen_JB)
    cond = float(np.linalg.cond(vectors))
    inverse = np.linalg.inv(vectors) if np.isfinite(cond) else np.full_like(vectors, np.nan)
    return GeneratorSpectral(values=values, vectors=vectors, inverse=inverse, cond=cond)


def _lambda_at(ext, jb_eig: GeneratorSpectral, t: float):
    """exp(J B t), by eigenmodes when well conditioned, else scaling/squaring."""
    if jb_eig.usable:
        phases = np.exp(jb_eig.values * t)
        return (jb_eig.vectors * phases) @ jb_eig.inverse, False
    return scipy.linalg.expm(ext.gen_JB * t), True


def _drive_vector(ext: ExtendedOperator, drive, t: float, spec_damping):
    """J C_t = [A^{-1} F_t; 0] for the phase-space equations of motion."""
    n = ext.n
    f, fdot = drive
    force = np.concatenate([f, fdot - 2.0 * (spec_damping @ f)])
    top = np.linalg.solve(ext.sim_A, force)
    return np.concatenate([top, np.zeros(2 * n, dtype=complex)])


def _damping_block(ext: ExtendedOperator):
    # kappa = [[K, 2 Gamma], [.., ..]] so the damping is recoverable in place
    n = ext.n
    return ext.kappa[:n, n:] / 2.0


def propagator_at(
    ext: ExtendedOperator,
    t: float,
    drive: DriveSignal | None = None,
    quad_step: float = 1e-3,
    jb_eig: GeneratorSpectral | None = None,
) -> Propagator:
    """Propagator (Lambda_t, Delta_t) at a single time.

    Lambda_t comes from the generator eigendecomposition (with a silent
    scaling-and-squaring fallback for ill-conditioned eigenvectors);
    Delta_t integrates Delta' = Lambda_s J C_s with the same fixed RK4 step
    the reference integrators use.
    """
    if ext.gen_JB is None:
        raise ValueError("generator J_B not built; call spectral.prepare first")
    if jb_eig is None:
        jb_eig = decompose_generator(ext)
    lam, fallback = _lambda_at(ext, jb_eig, t)
    N2 = ext.gen_JB.shape[0]
    delta = np.zeros(N2, dtype=complex)
    if drive is not None and t != 0.0:
        from .medium import drive_value

        gamma = _damping_block(ext)

        def rhs(s: float):
            lam_s, _ = _lambda_at(ext, jb_eig, s)
            return lam_s @ _drive_vector(ext, drive_value(drive, s), s, gamma)

        steps = max(1, int(round(abs(t) / quad_step)))
        h = t / steps
        s = 0.0
        for _ in range(steps):
            k1 = rhs(s)
            kmid = rhs(s + h / 2.0)
            k4 = rhs(s + h)
            delta = delta + h / 6.0 * (k1 + 4.0 * kmid + k4)
            s += h
    return Propagator(lambda_t=lam, delta_t=delta, t=t, used_expm_fallback=fallback)


def symplectic_inverse(lam: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Lambda^{-1} = J Lambda^T J^T, exact for any symplectic matrix."""
    N = lam.shape[0] // 2
    J = symplectic_form(N)
    return J @ lam.T @ J.T


def evolve_state(state: GaussianState, prop: Propagator) -> GaussianState:
    """Map mean and covariance through one propagator."""
    lam_inv = symplectic_inverse(prop.lambda_t)
    mean_t = lam_inv @ (state.mean - prop.delta_t)
    cov_t = lam_inv @ state.cov @ lam_inv.T
    return GaussianState(mean=mean_t, cov=cov_t, hbar=state.hbar)


def propagate_mean(
    ext: ExtendedOperator,
    drive: DriveSignal | None,
    q0,
    t_grid,
    quad_step: float = 1e-3,
) -> NDArray[np.complex128]:
    """Mean trajectory over a time grid with a single forward Delta sweep."""
    if ext.gen_JB is None:
        raise ValueError("generator J_B not built; call spectral.prepare first")
    jb_eig = decompose_generator(ext)
    t_grid = np.asarray(t_grid, dtype=float)
    q0 = np.asarray(q0, dtype=complex)
    N2 = ext.gen_JB.shape[0]
    out = np.empty((t_grid.size, N2), dtype=complex)
    from .medium import drive_value

    gamma = _damping_block(ext)
    delta = np.zeros(N2, dtype=complex)
    prev_t = 0.0
    if t_grid[0] != 0.0 and drive is not None:
        raise ValueError("driven mean propagation expects a grid starting at t=0")
    for i, t in enumerate(t_grid):
        if drive is not None and t > prev_t:
            steps = max(1, int(round((t - prev_t) / quad_step)))
            h = (t - prev_t) / steps
            s = prev_t
            for _ in range(steps):
                lam_a, _ = _lambda_at(ext, jb_eig, s)
                lam_b, _ = _lambda_at(ext, jb_eig, s + h / 2.0)
                lam_c, _ = _lambda_at(ext, jb_eig, s + h)
                k1 = lam_a @ _drive_vector(ext, drive_value(drive, s), s, gamma)
                k2 = lam_b @ _drive_vector(ext, drive_value(drive, s + h / 2.0), s + h / 2.0, gamma)
                k3 = lam_c @ _drive_vector(ext, drive_value(drive, s + h), s + h, gamma)
                delta = delta + h / 6.0 * (k1 + 4.0 * k2 + k3)
                s += h
            prev_t = t
        lam_t, _ = _lambda_at(ext, jb_eig, t)
        out[i] = symplectic_inverse(lam_t) @ (q0 - delta)
    return out


def consistent_mean(ext: ExtendedOperator, x0, xdot0) -> NDArray[np.complex128]:
    """Phase-space mean [pi; x] matching extended initial data (x0, x'0)."""
    x0 = np.asarray(x0, dtype=complex)
    xdot0 = np.asarray(xdot0, dtype=complex)
    pi0 = np.linalg.solve(ext.sim_A, xdot0)
    return np.concatenate([pi0, x0])


def thermal_state(ext: ExtendedOperator, beta: float, hbar: float) -> GaussianState:
    """Thermal Gaussian state: zero mean, matrix-cotangent covariance."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    jb_eig = decompose_generator(ext)
    if not jb_eig.usable:
        raise ThermalSingularity("generator eigendecomposition too ill-conditioned")
    args = hbar * beta * jb_eig.values / 2.0
    sin = np.sin(args)
    if np.any(np.abs(sin) < 1e-12 * np.maximum(1.0, np.abs(np.cos(args)))):
        worst = jb_eig.values[np.argmin(np.abs(sin))]
        raise ThermalSingularity(
            f"cot singular: hbar*beta*lambda/2 near a multiple of pi for lambda={worst!r}"
        )
    cot = np.cos(args) / sin
    N = ext.gen_JB.shape[0] // 2
    J = symplectic_form(N)
    M0 = -(hbar / 2.0) * (jb_eig.vectors * cot) @ jb_eig.inverse @ J.T
    M0 = (M0 + M0.T) / 2.0
    return GaussianState(mean=np.zeros(2 * N, dtype=complex), cov=M0, hbar=hbar)


def mean_in_frequency(
    ext: ExtendedOperator, drive: DriveSignal, omega_grid
) -> NDArray[np.complex128]:
    """Frequency-domain mean (zero initial mean assumed).

    Solves (omega E + i J_B) y = -i J C(omega) per grid point; the x block
    of the result carries the polarization sources.
    """
    if ext.gen_JB is None:
        raise ValueError("generator J_B not built; call spectral.prepare first")
    omega_grid = np.asarray(omega_grid, dtype=float)
    n = ext.n
    N2 = ext.gen_JB.shape[0]
    f = spectral_amplitude(drive, None)
    out = np.empty((omega_grid.size, N2), dtype=complex)
    eye = np.eye(N2)
    gamma = _damping_block(ext)
    for i, w in enumerate(omega_grid):
        force = np.concatenate([f, (-1j * w) * f - 2.0 * (gamma @ f)])
        jc = np.concatenate(
            [np.linalg.solve(ext.sim_A, force), np.zeros(2 * n, dtype=complex)]
        )
        try:
            out[i] = np.linalg.solve(w * eye + 1j * ext.gen_JB, -1j * jc)
        except np.linalg.LinAlgError:
            raise ResonantFrequency(w) from None
    return out
