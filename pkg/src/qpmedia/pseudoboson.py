"""Pseudo-boson ladder operators and bi-coherent Gaussian state parameters.

The quadratic Hamiltonian of a damped medium is diagonalized by a
non-conjugate ladder pair (b, b~) with [b_i, b~_j] = delta_ij.  Their
coefficients are linear forms in (x, pi) built from the mode matrix P1 and
the diagonal square root of the kernel eigenvalues.

Gauge note: when the spectrum is real (undamped symmetric media) the mode
matrix is rebuilt on a real paired basis, which reduces (b, b~) to ordinary
conjugate ladder operators; the generic damped case keeps the eigenvector
basis of the extended square root, whose branch fixes sqrt(J) = diag(mu_k)
unambiguously.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import SingularEffectiveSigma, ZeroMode
from .spectral import EigenSystem, symplectic_form

_REAL_SPECTRUM_RTOL = 1e-10
_PAIR_RTOL = 1e-9


@dataclass(frozen=True)
class PseudoBosonBasis:
    """Ladder-operator coefficients over the doubled phase space.

    Rows of ``b_coeff``/``btilde_coeff`` hold the coefficients of one
    operator, columns ordered as [x-block (2n) | pi-block (2n)].
    """

    b_coeff: NDArray[np.complex128]
    btilde_coeff: NDArray[np.complex128]
    sqrtJK: NDArray[np.complex128]
    quarterJK: NDArray[np.complex128]
    mode_matrix: NDArray[np.complex128]
    mode_matrix_inv: NDArray[np.complex128]
    hbar: float
    paired_real_gauge: bool

    @property
    def n_modes(self) -> int:
        return self.sqrtJK.size


@dataclass(frozen=True)
class BiCoherentParams:
    """Gaussian parameters of the bi-orthogonal coherent pair.

    ``eff_sigma``/``eff_mu`` are the effective covariance and mean of the
    pairing density; they are ``None`` when the defining matrix is singular
    (the ordinary-boson limit, where the pair collapses to one state).
    """

    alpha: NDArray[np.complex128]
    sigma_inv: NDArray[np.complex128]
    mu_vec: NDArray[np.complex128]
    mu_phi: NDArray[np.complex128]
    norm_product: complex
    eff_sigma: NDArray[np.complex128] | None
    eff_mu: NDArray[np.complex128] | None
    hbar: float


def _paired_real_mode_matrix(eig: EigenSystem):
    """Real paired mode basis for a real +/- spectrum, or None if impossible."""
    mu = eig.values
    m = mu.size
    n = m // 2
    scale = max(np.abs(mu).max(), 1.0)
    pos = [k for k in range(m) if mu[k].real > 0]
    neg = set(k for k in range(m) if k not in pos)
    if len(pos) != n:
        return None
    used: set[int] = set()
    pairs = []
    for k in sorted(pos, key=lambda k: mu[k].real):
        partner = None
        for j in neg:
            if j not in used and abs(mu[j] + mu[k]) <= _PAIR_RTOL * scale:
                partner = j
                break
        if partner is None:
            return None
        used.add(partner)
        pairs.append(k)

    P1 = np.zeros((m, m), dtype=complex)
    sqrtJ = np.zeros(m, dtype=complex)
    kappa_rec = (eig.right_vectors * mu**2) @ eig.inverse_vectors
    kscale = max(np.linalg.norm(kappa_rec), 1.0)
    for p, k in enumerate(pairs):
        v = eig.right_vectors[:, k]
        w = v[:n]
        j = int(np.argmax(np.abs(w) >= (1.0 - 1e-9) * np.abs(w).max()))
        w = w * (abs(w[j]) / w[j])
        if np.abs(w.imag).max() > 1e-8 * np.linalg.norm(w):
            return None
        w = w.real / np.linalg.norm(w.real)
        cand = np.concatenate([np.zeros(n), w]).astype(complex)
        if np.linalg.norm(kappa_rec @ cand - mu[k] ** 2 * cand) > 1e-7 * kscale:
            return None
        P1[:n, 2 * p] = w
        P1[n:, 2 * p + 1] = w
        sqrtJ[2 * p] = mu[k].real
        sqrtJ[2 * p + 1] = mu[k].real
    if np.linalg.cond(P1) > 1e8:
        return None
    return P1, sqrtJ


def build_pseudoboson(
    eig: EigenSystem, hbar: float = 1.0, zero_tol: float = 1e-12
) -> PseudoBosonBasis:
    """Assemble the ladder-operator coefficient matrices.

    Requires a non-defective eigensystem with no zero mode (the inverse
    quarter root must exist).
    """
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    mu = eig.values
    scale = max(np.abs(mu).max(), 1.0)
    if np.any(np.abs(mu) < zero_tol * scale):
        raise ZeroMode("zero eigenvalue: inverse quarter root does not exist")

    paired = None
    if np.abs(mu.imag).max() <= _REAL_SPECTRUM_RTOL * scale:
        paired = _paired_real_mode_matrix(eig)

    if paired is not None:
        P1, sqrtJ = paired
        P1inv = np.linalg.inv(P1)
        paired_flag = True
    else:
        P1 = eig.right_vectors
        P1inv = eig.inverse_vectors
        sqrtJ = mu.copy()
        paired_flag = False

    quarter = np.sqrt(sqrtJ.astype(complex))  # principal branch
    pref = 1.0 / np.sqrt(2.0 * hbar)
    bx = pref * (quarter[:, None] * P1inv)
    bp = 1j * pref * (P1.T / quarter[:, None])
    b = np.hstack([bx, bp])
    btilde = np.hstack([bx, -bp])
    return PseudoBosonBasis(
        b_coeff=b,
        btilde_coeff=btilde,
        sqrtJK=sqrtJ,
        quarterJK=quarter,
        mode_matrix=P1,
        mode_matrix_inv=P1inv,
        hbar=hbar,
        paired_real_gauge=paired_flag,
    )


def commutator_matrix(basis: PseudoBosonBasis) -> NDArray[np.complex128]:
    """[b_i, b~_j] contracted through the canonical commutation metric."""
    m = basis.n_modes
    bx, bp = basis.b_coeff[:, :m], basis.b_coeff[:, m:]
    tx, tp = basis.btilde_coeff[:, :m], basis.btilde_coeff[:, m:]
    # q ordering is [pi; x] with [q_a, q_b] = -i hbar J_ab
    w = np.hstack([bp, bx])
    wt = np.hstack([tp, tx])
    J = symplectic_form(m)
    return -1j * basis.hbar * (w @ J @ wt.T)


def coherent_params(
    basis: PseudoBosonBasis,
    eig: EigenSystem,
    alpha,
    hbar: float | None = None,
) -> BiCoherentParams:
    """Gaussian parameters of the coherent pair at amplitude alpha.

    The means solve the ladder eigenvalue equations exactly, which fixes a
    sqrt(2 hbar) scale on the amplitude map.  The normalization product is
    the reciprocal of the (Fresnel-regularized) pairing integral and is
    well defined whenever that integral converges.
    """
    hbar = basis.hbar if hbar is None else hbar
    alpha = np.asarray(alpha, dtype=complex).ravel()
    m = basis.n_modes
    if alpha.size != m:
        raise ValueError(f"alpha must have length {m}")
    P1, P1inv = basis.mode_matrix, basis.mode_matrix_inv
    sigma_inv = -(1.0 / hbar) * (P1inv.T @ (basis.sqrtJK[:, None] * P1inv))
    sigma_inv = (sigma_inv + sigma_inv.T) / 2.0

    amp_map = np.sqrt(2.0 * hbar) * (P1 / basis.quarterJK[None, :])
    mu_psi = amp_map @ alpha
    mu_phi = amp_map.conj() @ alpha

    W = sigma_inv.conj()
    M = -2.0 * W
    evals = np.linalg.eigvals(M)
    mscale = max(np.abs(evals).max(), 1e-300)
    if np.any(np.abs(evals) < 1e-12 * mscale):
        raise SingularEffectiveSigma("pairing integral matrix is singular")
    if np.any(evals.real < -1e-10 * mscale):
        raise SingularEffectiveSigma("pairing integral diverges for this basis")

    # 1/integral of exp(E(x)) with E the sum of the two Gaussian exponents
    a_vec = amp_map.conj() @ alpha.conj()
    diff = mu_phi - a_vec
    e0 = 0.25 * diff @ (W @ diff)
    half_log_det = 0.5 * np.sum(np.log(evals / (2.0 * np.pi)))
    norm_product = np.exp(half_log_det - e0)

    pair_matrix = sigma_inv - sigma_inv.conj()
    eff_sigma = None
    eff_mu = None
    if np.linalg.cond(pair_matrix) < 1e12:
        eff_sigma = np.linalg.inv(pair_matrix)
        eff_mu = eff_sigma @ (
            -sigma_inv.conj() @ mu_psi.conj() + sigma_inv @ mu_psi
        )
    return BiCoherentParams(
        alpha=alpha,
        sigma_inv=sigma_inv,
        mu_vec=mu_psi,
        mu_phi=mu_phi,
        norm_product=complex(norm_product),
        eff_sigma=eff_sigma,
        eff_mu=eff_mu,
        hbar=hbar,
    )


def evolve_alpha(alpha, basis_or_eig, t: float, hbar: float = 1.0):
    """Coherent amplitude at time t plus the log of the global prefactor.

    The prefactor is returned in log form because its modulus grows like
    exp(-t tr Im sqrt(J)) for damped spectra.
    """
    alpha = np.asarray(alpha, dtype=complex).ravel()
    if hasattr(basis_or_eig, "sqrtJK"):
        sqrtJ = basis_or_eig.sqrtJK
    else:
        sqrtJ = basis_or_eig.values
    alpha_t = np.exp(-1j * t * sqrtJ) * alpha
    log_pref = -0.5j * t * np.sum(sqrtJ) - 0.5 * (
        np.sum(np.abs(alpha) ** 2) - np.sum(np.abs(alpha_t) ** 2)
    )
    return alpha_t, complex(log_pref)


# ---------------------------------------------------------------------------
# Pointwise wavefunction values (used by the low-dimensional quadrature tests)
# ---------------------------------------------------------------------------

def psi_unnormalized(params: BiCoherentParams, x) -> complex:
    """exp(+1/2 (x-mu)^T Sigma^{-1} (x-mu)) without its normalization."""
    x = np.asarray(x, dtype=complex)
    d = x - params.mu_vec
    return complex(np.exp(0.5 * d @ (params.sigma_inv @ d)))


def phi_unnormalized(params: BiCoherentParams, x) -> complex:
    """Primed-state Gaussian: conjugated width matrix, shifted mean."""
    x = np.asarray(x, dtype=complex)
    d = x - params.mu_phi
    return complex(np.exp(0.5 * d @ (params.sigma_inv.conj() @ d)))


def biorthogonal_density(params: BiCoherentParams, x) -> complex:
    """Pointwise psi*_alpha(x) phi_alpha(x) including the normalization."""
    return (
        params.norm_product
        * np.conj(psi_unnormalized(params, x))
        * phi_unnormalized(params, x)
    )
