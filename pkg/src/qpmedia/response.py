"""Frequency-domain polarizability, eigenpair decomposition and filters.

Two routes to Im alpha(omega) live here: a decomposition-free dense solve
per frequency (the oracle) and the exact per-eigenvalue split into
absorptive/dispersive Lorentzian amplitudes, which enables reduced-order
reconstruction from a filtered subset of modes.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import SingularAtFrequency, UnsupportedDrive
from .medium import DriveSignal, KickDrive, MediumSpec, spectral_amplitude
from .spectral import EigenSystem


@dataclass(frozen=True)
class ModeLedger:
    """Per-mode data for the rank-1 kick decomposition.

    ``intercept`` and ``angle`` are the constant and linear-in-omega parts
    of the diagonal coefficient C_kk(omega) = intercept_k - i omega angle_k;
    the cached weight vectors are the rank-1 factors they are built from.
    """

    mu: NDArray[np.complex128]
    lam: NDArray[np.complex128]
    intercept: NDArray[np.complex128]
    angle: NDArray[np.complex128]
    left_weights: NDArray[np.complex128]
    left_slope_weights: NDArray[np.complex128]
    right_weights: NDArray[np.complex128]
    trace_weight: complex

    @property
    def n_modes(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class SpectrumTable:
    """Tabulated Im alpha with its absorptive/dispersive split."""

    omega_grid: NDArray[np.float64]
    im_alpha: NDArray[np.float64]
    absorptive: NDArray[np.float64] | None = None
    dispersive: NDArray[np.float64] | None = None


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("QPM_THREADS", "1")))
    except ValueError:
        return 1


def polarizability_direct(
    spec: MediumSpec, drive: DriveSignal, omega_grid
) -> SpectrumTable:
    """Im alpha(omega) by a dense LU solve at every grid point.

    This route needs no eigendecomposition and is the reference the
    reduced-order reconstruction is checked against.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    f = spectral_amplitude(drive, None)
    r = spec.gen_coord_vector
    K, G = spec.kernel, spec.damping
    eye = np.eye(spec.n, dtype=complex)

    def solve_one(w: float) -> float:
        M = (w**2) * eye + 2j * w * G - K
        try:
            u = np.linalg.solve(M, f)
        except np.linalg.LinAlgError:
            raise SingularAtFrequency(w) from None
        return float((r @ u).imag)

    workers = _worker_count()
    if workers > 1 and omega_grid.size > 8:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(solve_one, omega_grid))
    else:
        vals = [solve_one(w) for w in omega_grid]
    return SpectrumTable(omega_grid=omega_grid, im_alpha=np.asarray(vals))


def decompose_modes(eig: EigenSystem, spec: MediumSpec, drive: KickDrive) -> ModeLedger:
    """Rank-1 extraction of the diagonal decomposition coefficients.

    For a kick the frequency dependence of C_kk is linear, so one O(n^2)
    pass yields intercepts and angles valid at every frequency, replacing
    an O(n^3) similarity product per grid point.
    """
    if not isinstance(drive, KickDrive):
        raise UnsupportedDrive("mode decomposition requires a kick drive")
    n = spec.n
    f = drive.amplitude.astype(complex)
    if f.shape != (n,):
        raise ValueError("kick amplitude must have length n")
    r = np.concatenate([spec.gen_coord_vector.astype(complex), np.zeros(n)])
    w0 = np.concatenate([f, -2.0 * (spec.damping @ f)])
    w1 = np.concatenate([np.zeros(n, dtype=complex), f])

    left0 = eig.inverse_vectors @ w0
    left1 = eig.inverse_vectors @ w1
    right = eig.right_vectors.T @ r
    mu = eig.values
    return ModeLedger(
        mu=mu,
        lam=mu**2,
        intercept=left0 * right,
        angle=left1 * right,
        left_weights=left0,
        left_slope_weights=left1,
        right_weights=right,
        trace_weight=complex(f @ spec.gen_coord_vector),
    )


def lorentzian_amplitudes(ledger: ModeLedger, omega: float):
    """Absorptive and dispersive Lorentzian factors of every eigenvalue."""
    lam_re = ledger.lam.real
    lam_im = ledger.lam.imag
    denom = (omega**2 - lam_re) ** 2 + lam_im**2
    return lam_im / denom, (omega**2 - lam_re) / denom


def reconstruct_spectrum(
    ledger: ModeLedger, selected, omega_grid
) -> SpectrumTable:
    """Im alpha from a subset of modes.

    Sums absorptive and dispersive contributions over ``selected`` only;
    selecting every mode reproduces the direct sweep exactly.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    selected = np.asarray(sorted(selected), dtype=int)
    m = omega_grid.size
    if selected.size == 0:
        zero = np.zeros(m)
        return SpectrumTable(omega_grid, zero, zero.copy(), zero.copy())

    lam = ledger.lam[selected]
    intercept = ledger.intercept[selected]
    angle = ledger.angle[selected]

    w2 = omega_grid[:, None] ** 2
    denom = (w2 - lam.real[None, :]) ** 2 + lam.imag[None, :] ** 2
    a_fac = lam.imag[None, :] / denom
    d_fac = (w2 - lam.real[None, :]) / denom
    c_diag = intercept[None, :] - 1j * omega_grid[:, None] * angle[None, :]
    absorptive = np.sum(a_fac * c_diag.real, axis=1)
    dispersive = np.sum(d_fac * c_diag.imag, axis=1)
    return SpectrumTable(
        omega_grid=omega_grid,
        im_alpha=absorptive + dispersive,
        absorptive=absorptive,
        dispersive=dispersive,
    )


def filter_eigenvalue(ledger: ModeLedger, omega_lo: float, omega_hi: float):
    """Select modes whose |Re mu| lies inside [omega_lo, omega_hi]."""
    if omega_lo > omega_hi:
        raise ValueError("omega_lo must not exceed omega_hi")
    re = np.abs(ledger.mu.real)
    return np.flatnonzero((re >= omega_lo) & (re <= omega_hi))


def filter_intercept(ledger: ModeLedger, threshold: float):
    """Select modes whose |Re intercept| exceeds the threshold."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return np.flatnonzero(np.abs(ledger.intercept.real) > threshold)


def top_fraction_by_intercept(ledger: ModeLedger, fraction: float):
    """Indices of the strongest-|Re intercept| modes, given a fraction."""
    count = max(1, int(fraction * ledger.n_modes))
    order = np.argsort(-np.abs(ledger.intercept.real), kind="stable")
    return np.sort(order[:count])
