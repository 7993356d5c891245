"""Extended operators, non-symmetric eigendecomposition, similarity matrix.

The dynamics of the medium is encoded in the closed-form square root

    sqrt_kappa = i [[0, -I], [K, 2 Gamma]]

whose spectrum carries every resonance of the damped equation of motion.
From its eigenvectors we build the symmetric similarity matrix A with
kappa = A kappa^T A^{-1}, the quadratic-Hamiltonian generator J_B, and the
on-shell energy functional.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DefectiveMatrix, SingularSimilarity
from .medium import MediumSpec, extended_kernel

DEFECTIVE_COND_THRESHOLD = 1e8
SINGULAR_A_COND_THRESHOLD = 1e12


@dataclass(frozen=True)
class ExtendedOperator:
    """Extended-space operators of one medium.

    ``sim_A`` and ``gen_JB`` are attached by :func:`build_similarity` /
    :func:`build_JB`; instances are immutable and updated via ``replace``.
    """

    kappa: NDArray[np.complex128]
    sqrt_kappa: NDArray[np.complex128]
    sim_A: NDArray[np.complex128] | None = None
    sim_A_cond: float | None = None
    gen_JB: NDArray[np.complex128] | None = None

    @property
    def n(self) -> int:
        return self.kappa.shape[0] // 2

    def a_blocks(self):
        """The (A1, A2, A3) blocks of the similarity matrix."""
        if self.sim_A is None:
            raise ValueError("similarity matrix not built yet")
        n = self.n
        A = self.sim_A
        return A[:n, :n], A[:n, n:], A[n:, n:]


@dataclass(frozen=True)
class EigenSystem:
    """Eigendecomposition of sqrt_kappa with deterministic ordering."""

    values: NDArray[np.complex128]
    right_vectors: NDArray[np.complex128]
    inverse_vectors: NDArray[np.complex128]
    cond: float
    defective: bool


def build_sqrt_kappa(spec: MediumSpec, check: bool = True) -> ExtendedOperator:
    """Assemble kappa and its closed-form square root.

    The construction is total: K and Gamma may be complex, singular or
    non-diagonalizable.  With ``check`` the square identity is verified to
    a relative Frobenius residual of 1e-12.
    """
    n = spec.n
    kappa = extended_kernel(spec)
    sq = 1j * np.block(
        [
            [np.zeros((n, n), dtype=complex), -np.eye(n, dtype=complex)],
            [spec.kernel, 2.0 * spec.damping],
        ]
    )
    if check:
        scale = np.linalg.norm(kappa)
        resid = np.linalg.norm(sq @ sq - kappa)
        if scale > 0 and resid > 1e-12 * scale:
            raise AssertionError(f"square identity violated: {resid / scale:.3e}")
    return ExtendedOperator(kappa=kappa, sqrt_kappa=sq)


def _normalize_columns(vectors: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Unit-norm columns with a deterministic phase.

    The entry of largest modulus (ties broken toward the lowest index, with
    a relative tolerance so near-ties resolve identically across runs) is
    rotated to the positive real axis.  For real K and Gamma this also makes
    conjugate eigenpairs carry exactly conjugate vectors.
    """
    out = vectors.copy()
    for k in range(out.shape[1]):
        v = out[:, k]
        v = v / np.linalg.norm(v)
        mags = np.abs(v)
        j = int(np.argmax(mags >= (1.0 - 1e-9) * mags.max()))
        v = v * (mags[j] / v[j])
        out[:, k] = v
    return out


def eigendecompose(
    ext: ExtendedOperator, cond_threshold: float = DEFECTIVE_COND_THRESHOLD
) -> EigenSystem:
    """Complete eigendecomposition of sqrt_kappa.

    Eigenvalues are sorted lexicographically by (Re, Im) so repeated runs
    produce identical mode orderings.  Raises DefectiveMatrix when the
    eigenvector condition number exceeds ``cond_threshold``, i.e. when the
    diagonal treatment stops being trustworthy.
    """
    values, vectors = np.linalg.eig(ext.sqrt_kappa)
    order = np.lexsort((values.imag, values.real))
    values = values[order]
    vectors = _normalize_columns(vectors[:, order])
    cond = float(np.linalg.cond(vectors))
    defective = not np.isfinite(cond) or cond > cond_threshold
    if defective:
        raise DefectiveMatrix(
            f"eigenvector condition number {cond:.3e} exceeds {cond_threshold:.1e}; "
            "supply an explicit Jordan structure instead"
        )
    inverse = np.linalg.inv(vectors)
    return EigenSystem(
        values=values,
        right_vectors=vectors,
        inverse_vectors=inverse,
        cond=cond,
        defective=False,
    )


def exchange_matrix(size: int) -> NDArray[np.float64]:
    """Anti-diagonal exchange matrix of the given size."""
    return np.eye(size)[::-1].copy()


def build_similarity(
    eig: EigenSystem,
    jordan_blocks: Sequence[int] | None = None,
) -> NDArray[np.complex128]:
    """Symmetric similarity matrix A = P1 P2 P1^T.

    With no explicit Jordan structure all blocks are 1x1 and P2 is the
    identity; ``jordan_blocks`` lists block sizes for a user-supplied
    generalized eigenvector matrix.  A is symmetrized after the product to
    remove rounding-level asymmetry (symmetry holds analytically).
    """
    P1 = eig.right_vectors
    m = P1.shape[0]
    if jordan_blocks is None:
        if eig.defective:
            raise DefectiveMatrix("defective eigensystem needs explicit jordan_blocks")
        A = P1 @ P1.T
    else:
        if sum(jordan_blocks) != m:
            raise ValueError("jordan_blocks must partition the full dimension")
        P2 = np.zeros((m, m))
        pos = 0
        for size in jordan_blocks:
            P2[pos : pos + size, pos : pos + size] = exchange_matrix(size)
            pos += size
        A = P1 @ P2 @ P1.T
    A = (A + A.T) / 2.0
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > SINGULAR_A_COND_THRESHOLD:
        raise SingularSimilarity(f"cond(A) = {cond:.3e}")
    return A


def attach_similarity(
    ext: ExtendedOperator, eig: EigenSystem, jordan_blocks=None
) -> ExtendedOperator:
    A = build_similarity(eig, jordan_blocks)
    return replace(ext, sim_A=A, sim_A_cond=float(np.linalg.cond(A)))


def build_JB(ext: ExtendedOperator) -> NDArray[np.complex128]:
    """First-order symplectic generator [[0, A^{-1} kappa], [-A, 0]].

    Its spectrum is the +/- i image of the sqrt_kappa spectrum, so the
    phase-space route adds no new resonances.
    """
    if ext.sim_A is None:
        raise ValueError("similarity matrix must be built before the generator")
    N = 2 * ext.n
    Ainv_kappa = np.linalg.solve(ext.sim_A, ext.kappa)
    JB = np.zeros((2 * N, 2 * N), dtype=complex)
    JB[:N, N:] = Ainv_kappa
    JB[N:, :N] = -ext.sim_A
    return JB


def attach_JB(ext: ExtendedOperator) -> ExtendedOperator:
    return replace(ext, gen_JB=build_JB(ext))


def prepare(spec: MediumSpec, jordan_blocks=None) -> tuple[ExtendedOperator, EigenSystem]:
    """Convenience chain: sqrt_kappa -> eigendecomposition -> A -> J_B."""
    ext = build_sqrt_kappa(spec)
    eig = eigendecompose(ext)
    ext = attach_similarity(ext, eig, jordan_blocks)
    ext = attach_JB(ext)
    return ext, eig


def on_shell_energy(ext: ExtendedOperator, x) -> complex:
    """Quadratic energy evaluated with the on-shell momentum relation.

    With pi = i A^{-1} sqrt_kappa x the time-independent Hamiltonian
    0.5 pi^T A pi + 0.5 x^T A^{-1} kappa x vanishes identically; the return
    value is the numerical residual of that identity.
    """
    if ext.sim_A is None:
        raise ValueError("similarity matrix not built yet")
    x = np.asarray(x, dtype=complex)
    pi = 1j * np.linalg.solve(ext.sim_A, ext.sqrt_kappa @ x)
    kinetic = 0.5 * pi @ (ext.sim_A @ pi)
    potential = 0.5 * x @ np.linalg.solve(ext.sim_A, ext.kappa @ x)
    return complex(kinetic + potential)


def symplectic_form(N: int) -> NDArray[np.float64]:
    """Standard symplectic matrix [[0, I], [-I, 0]] of order 2N."""
    J = np.zeros((2 * N, 2 * N))
    J[:N, N:] = np.eye(N)
    J[N:, :N] = -np.eye(N)
    return J


def characteristic_residual(spec: MediumSpec, omega: complex) -> float:
    """Scaled singularity measure of omega^2 + 2 i omega Gamma - K.

    Vanishing determinant means a vanishing smallest singular value, so the
    residual is sigma_min over the natural magnitude of the matrix entries;
    this stays meaningful for every size, including n = 1 where any
    determinant normalized by row norms would degenerate to unity.
    """
    n = spec.n
    M = (omega**2) * np.eye(n) + 2j * omega * spec.damping - spec.kernel
    scale = (
        abs(omega) ** 2
        + 2.0 * abs(omega) * np.linalg.norm(spec.damping, 2)
        + np.linalg.norm(spec.kernel, 2)
    )
    sigma_min = np.linalg.svd(M, compute_uv=False)[-1]
    return float(sigma_min / max(scale, 1e-300))
