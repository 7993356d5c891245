"""Defining data of a classical polarizable medium and reference integrators.

A medium is a set of n polarization sources at frozen coordinates obeying

    u''(t) + 2 Gamma u'(t) + K u(t) + f(t) = 0,

with K, Gamma arbitrary complex matrices.  The fixed-step RK4 integrators in
this module are the brute-force oracle against which every other dynamics
route in the package is validated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import NDArray

from .errors import InconsistentInitialConditions, NonFinite, OutOfRange

_GEN_COORD_TOL = 1e-9


@dataclass(frozen=True)
class MediumSpec:
    """The defining tuple of a polarizable medium.

    Attributes
    ----------
    coords:
        Generalized coordinates, 3 x n, atomic units of length.
    covariances:
        n symmetric PSD 3x3 spatial-dispersion matrices.
    kernel, damping:
        The n x n interaction kernel K and damping matrix Gamma.
    source_kind:
        Per-source tag, ``"charge"`` or ``"dipole-component"``.
    gen_coord_vector:
        Measurement weights: a coordinate component for charge sources,
        unity for dipole components.
    """

    coords: NDArray[np.float64]
    covariances: NDArray[np.float64]
    kernel: NDArray[np.complex128]
    damping: NDArray[np.complex128]
    source_kind: tuple[str, ...]
    gen_coord_vector: NDArray[np.float64]

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        n = coords.shape[1]
        object.__setattr__(self, "coords", coords)
        object.__setattr__(
            self, "covariances", np.asarray(self.covariances, dtype=float).reshape(n, 3, 3)
        )
        object.__setattr__(self, "kernel", np.asarray(self.kernel, dtype=complex))
        object.__setattr__(self, "damping", np.asarray(self.damping, dtype=complex))
        object.__setattr__(
            self, "gen_coord_vector", np.asarray(self.gen_coord_vector, dtype=float)
        )
        self._validate()

    @property
    def n(self) -> int:
        return self.coords.shape[1]

    def _validate(self):
        n = self.n
        if self.coords.shape != (3, n):
            raise ValueError(f"coords must be 3 x n, got {self.coords.shape}")
        for name in ("kernel", "damping"):
            m = getattr(self, name)
            if m.shape != (n, n):
                raise ValueError(f"{name} must be {n} x {n}, got {m.shape}")
            if not np.all(np.isfinite(m.view(float))):
                raise ValueError(f"{name} contains non-finite entries")
        if len(self.source_kind) != n:
            raise ValueError("source_kind must have one tag per source")
        if self.gen_coord_vector.shape != (n,):
            raise ValueError("gen_coord_vector must have length n")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("coords contain non-finite entries")
        for alpha, sigma in enumerate(self.covariances):
            if not np.allclose(sigma, sigma.T, atol=1e-12):
                raise ValueError(f"covariance {alpha} is not symmetric")
            if np.linalg.eigvalsh((sigma + sigma.T) / 2).min() < -1e-12:
                raise ValueError(f"covariance {alpha} is not positive semidefinite")
        for alpha, kind in enumerate(self.source_kind):
            g = self.gen_coord_vector[alpha]
            if kind == "dipole-component":
                if abs(g - 1.0) > _GEN_COORD_TOL:
                    raise ValueError(
                        f"dipole source {alpha} must carry unit generalized coordinate"
                    )
            elif kind == "charge":
                if np.abs(self.coords[:, alpha] - g).min() > _GEN_COORD_TOL:
                    raise ValueError(
                        f"charge source {alpha}: gen_coord_vector must be a coordinate component"
                    )
            else:
                raise ValueError(f"unknown source kind {kind!r}")


def simple_spec(kernel, damping, coords=None, gen_axis: int = 2) -> MediumSpec:
    """Build a MediumSpec from K and Gamma alone, with default geometry.

    Sources are placed on the z axis with unit spacing and unit-variance
    covariances; the generalized coordinate is the ``gen_axis`` component.
    """
    kernel = np.atleast_2d(np.asarray(kernel, dtype=complex))
    n = kernel.shape[0]
    if coords is None:
        coords = np.zeros((3, n))
        coords[2] = np.arange(1, n + 1, dtype=float)
    coords = np.asarray(coords, dtype=float)
    return MediumSpec(
        coords=coords,
        covariances=np.broadcast_to(np.eye(3), (n, 3, 3)).copy(),
        kernel=kernel,
        damping=np.atleast_2d(np.asarray(damping, dtype=complex)),
        source_kind=("charge",) * n,
        gen_coord_vector=coords[gen_axis].copy(),
    )


# ---------------------------------------------------------------------------
# Drive signals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KickDrive:
    """Constant generalized force (zero derivative between impulses).

    In the frequency domain its amplitude is constant, which is what makes
    the mode-decomposition coefficients linear in omega.
    """

    amplitude: NDArray[np.complex128]

    def __post_init__(self):
        object.__setattr__(
            self, "amplitude", np.atleast_1d(np.asarray(self.amplitude, dtype=complex))
        )


@dataclass(frozen=True)
class MonochromaticDrive:
    """Real cosine drive f(t) = amplitude * cos(omega0 t)."""

    amplitude: NDArray[np.complex128]
    omega0: float

    def __post_init__(self):
        object.__setattr__(
            self, "amplitude", np.atleast_1d(np.asarray(self.amplitude, dtype=complex))
        )


@dataclass(frozen=True)
class TabulatedDrive:
    """Sampled drive with a user-supplied derivative channel.

    Values are interpolated linearly; the derivative channel is supplied,
    not differenced, to avoid amplifying sampling noise.
    """

    times: NDArray[np.float64]
    values: NDArray[np.complex128]
    derivatives: NDArray[np.complex128]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.atleast_2d(np.asarray(self.values, dtype=complex))
        d = np.atleast_2d(np.asarray(self.derivatives, dtype=complex))
        if t.ndim != 1 or np.any(np.diff(t) <= 0):
            raise ValueError("tabulated time grid must be strictly increasing")
        if v.shape[0] != t.size or d.shape != v.shape:
            raise ValueError("values and derivatives must match the time grid")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "derivatives", d)


DriveSignal = Union[KickDrive, MonochromaticDrive, TabulatedDrive]


def zero_drive(n: int) -> KickDrive:
    return KickDrive(np.zeros(n, dtype=complex))


def drive_value(drive: DriveSignal, t: float):
    """Evaluate (f(t), f'(t)) for a drive."""
    if isinstance(drive, KickDrive):
        return drive.amplitude, np.zeros_like(drive.amplitude)
    if isinstance(drive, MonochromaticDrive):
        f = drive.amplitude * np.cos(drive.omega0 * t)
        fdot = -drive.omega0 * drive.amplitude * np.sin(drive.omega0 * t)
        return f, fdot
    if isinstance(drive, TabulatedDrive):
        times = drive.times
        if t < times[0] or t > times[-1]:
            raise OutOfRange(f"t={t} outside tabulated grid [{times[0]}, {times[-1]}]")
        i = min(np.searchsorted(times, t, side="right"), times.size - 1)
        lo = max(i - 1, 0)
        hi = min(lo + 1, times.size - 1)
        if hi == lo:
            return drive.values[lo], drive.derivatives[lo]
        w = (t - times[lo]) / (times[hi] - times[lo])
        f = (1 - w) * drive.values[lo] + w * drive.values[hi]
        fdot = (1 - w) * drive.derivatives[lo] + w * drive.derivatives[hi]
        return f, fdot
    raise TypeError(f"unknown drive type {type(drive)!r}")


def spectral_amplitude(drive: DriveSignal, omega) -> NDArray[np.complex128]:
    """Frequency-domain amplitude of a drive for linear-response sweeps.

    A kick has a constant amplitude across frequencies.  A monochromatic
    drive is treated as a sweep: evaluating at omega gives the envelope
    amplitude of the drive when tuned to that frequency.  Tabulated drives
    carry no closed-form transform and are rejected.
    """
    if isinstance(drive, (KickDrive, MonochromaticDrive)):
        return drive.amplitude
    from .errors import UnsupportedDrive

    raise UnsupportedDrive("tabulated drives have no closed-form spectral amplitude")


def is_autonomous(drive: DriveSignal) -> bool:
    """True when f(t) is constant in time (kick between impulses)."""
    return isinstance(drive, KickDrive)


# ---------------------------------------------------------------------------
# Extended force and trajectories
# ---------------------------------------------------------------------------

def build_extended_force(spec: MediumSpec, drive: DriveSignal, t: float):
    """Extended-space force vector [f(t); f'(t) - 2 Gamma f(t)]."""
    f, fdot = drive_value(drive, t)
    return np.concatenate([f, fdot - 2.0 * (spec.damping @ f)])


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    u: NDArray[np.complex128]
    v: NDArray[np.complex128]


@dataclass(frozen=True)
class Trajectory:
    """Time series of (u, v) samples; indexing yields TrajectorySample."""

    t: NDArray[np.float64]
    u: NDArray[np.complex128]
    v: NDArray[np.complex128]

    def __len__(self) -> int:
        return self.t.size

    def __getitem__(self, i: int) -> TrajectorySample:
        return TrajectorySample(float(self.t[i]), self.u[i], self.v[i])


@dataclass(frozen=True)
class ExtendedTrajectory:
    """Time series of the extended vector x = [u; v]."""

    t: NDArray[np.float64]
    x: NDArray[np.complex128]

    def __len__(self) -> int:
        return self.t.size


def _rk4_sweep(matrix, y0, t_grid, force_at):
    """Classical RK4 for y' = M y + c(t) over a fixed grid.

    ``force_at`` maps a time to the inhomogeneity c(t).  Returns samples at
    every grid point.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    out = np.empty((t_grid.size, y0.size), dtype=complex)
    out[0] = y0
    y = y0.astype(complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(t_grid.size - 1):
            t = t_grid[i]
            h = t_grid[i + 1] - t
            c1 = force_at(t)
            c2 = force_at(t + h / 2)
            c4 = force_at(t + h)
            k1 = matrix @ y + c1
            k2 = matrix @ (y + h / 2 * k1) + c2
            k3 = matrix @ (y + h / 2 * k2) + c2
            k4 = matrix @ (y + h * k3) + c4
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            out[i + 1] = y
    return out


def _rk4_affine_sweep(matrix, const_force, y0, t_grid):
    """RK4 specialization for autonomous linear systems.

    For y' = M y + c with constant c and a uniform step, one RK4 step is an
    affine map y -> Phi y + psi c; applying it repeatedly is algebraically
    identical to the generic stepper and much faster.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    steps = np.diff(t_grid)
    out = np.empty((t_grid.size, y0.size), dtype=complex)
    out[0] = y0
    y = y0.astype(complex)
    eye = np.eye(y0.size, dtype=complex)
    cache: dict[float, tuple] = {}
    with np.errstate(over="ignore", invalid="ignore"):
        for i, h in enumerate(steps):
            key = float(h)
            if key not in cache:
                m2 = matrix @ matrix
                m3 = m2 @ matrix
                m4 = m3 @ matrix
                phi = eye + h * matrix + h**2 / 2 * m2 + h**3 / 6 * m3 + h**4 / 24 * m4
                psi = h * eye + h**2 / 2 * matrix + h**3 / 6 * m2 + h**4 / 24 * m3
                cache[key] = (phi, psi @ const_force)
            phi, drift = cache[key]
            y = phi @ y + drift
            out[i + 1] = y
    return out


def _check_finite(arr, what: str):
    if not np.all(np.isfinite(arr.view(float))):
        raise NonFinite(f"{what} overflowed; the spectrum is likely unstable")


def integrate_reference_second_order(
    spec: MediumSpec, drive: DriveSignal, u0, v0, t_grid
) -> Trajectory:
    """Fixed-step RK4 solution of the second-order medium equation.

    The equation is rewritten as a first-order system in (u, u').  This is
    the deterministic brute-force oracle for all dynamics modules.
    """
    n = spec.n
    u0 = np.asarray(u0, dtype=complex).reshape(n)
    v0 = np.asarray(v0, dtype=complex).reshape(n)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    mat = np.zeros((2 * n, 2 * n), dtype=complex)
    mat[:n, n:] = np.eye(n)
    mat[n:, :n] = -spec.kernel
    mat[n:, n:] = -2.0 * spec.damping
    y0 = np.concatenate([u0, v0])
    if is_autonomous(drive):
        f, _ = drive_value(drive, t_grid[0])
        const = np.concatenate([np.zeros(n), -f])
        ys = _rk4_affine_sweep(mat, const, y0, t_grid)
    else:
        def force_at(t):
            f, _ = drive_value(drive, t)
            return np.concatenate([np.zeros(n), -f])

        ys = _rk4_sweep(mat, y0, t_grid, force_at)
    _check_finite(ys, "second-order trajectory")
    return Trajectory(t=t_grid, u=ys[:, :n], v=ys[:, n:])


def consistent_extended_ic(
    spec: MediumSpec, u0, v0, drive: DriveSignal | None = None, t0: float = 0.0
):
    """Extended initial conditions (x0, xdot0) generated by (u0, u'0).

    The auxiliary slope is v'(0) = u''(0) = -K u0 - 2 Gamma u'0 - f(0); the
    drive term matters whenever f is nonzero at the start.
    """
    u0 = np.asarray(u0, dtype=complex)
    v0 = np.asarray(v0, dtype=complex)
    x0 = np.concatenate([u0, v0])
    accel = -spec.kernel @ u0 - 2.0 * spec.damping @ v0
    if drive is not None:
        f0, _ = drive_value(drive, t0)
        accel = accel - f0
    xdot0 = np.concatenate([v0, accel])
    return x0, xdot0


def integrate_reference_extended(
    spec: MediumSpec,
    drive: DriveSignal,
    x0,
    xdot0,
    t_grid,
    ic_tol: float = 1e-8,
) -> ExtendedTrajectory:
    """RK4 integration of the velocity-independent extended equation.

    Raises InconsistentInitialConditions when xdot0 violates the constraint
    tying it to x0; ignoring that constraint silently decouples the extended
    equation from the second-order one.
    """
    n = spec.n
    x0 = np.asarray(x0, dtype=complex).reshape(2 * n)
    xdot0 = np.asarray(xdot0, dtype=complex).reshape(2 * n)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")

    u0, v0 = x0[:n], x0[n:]
    _, expected = consistent_extended_ic(spec, u0, v0, drive, t0=float(t_grid[0]))
    scale = max(np.abs(expected).max(), np.abs(x0).max(), 1.0)
    dev = np.abs(xdot0 - expected).max()
    if dev > ic_tol * scale:
        raise InconsistentInitialConditions(
            f"xdot0 deviates from the constraint by {dev:.3e} (scale {scale:.3e})"
        )

    kappa = extended_kernel(spec)
    mat = np.zeros((4 * n, 4 * n), dtype=complex)
    mat[: 2 * n, 2 * n :] = np.eye(2 * n)
    mat[2 * n :, : 2 * n] = -kappa
    y0 = np.concatenate([x0, xdot0])
    if is_autonomous(drive):
        const = np.concatenate(
            [np.zeros(2 * n), -build_extended_force(spec, drive, t_grid[0])]
        )
        ys = _rk4_affine_sweep(mat, const, y0, t_grid)
    else:
        def force_at(t):
            return np.concatenate(
                [np.zeros(2 * n), -build_extended_force(spec, drive, t)]
            )

        ys = _rk4_sweep(mat, y0, t_grid, force_at)
    _check_finite(ys, "extended trajectory")
    return ExtendedTrajectory(t=t_grid, x=ys[:, : 2 * n])


def extended_kernel(spec: MediumSpec) -> NDArray[np.complex128]:
    """The 2n x 2n block kernel of the velocity-independent equation."""
    K, G = spec.kernel, spec.damping
    return np.block([[K, 2.0 * G], [-2.0 * G @ K, K - 4.0 * G @ G]])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def spec_to_json(spec: MediumSpec) -> str:
    """Serialize a MediumSpec to the documented JSON layout (row-major)."""
    doc = {
        "n": spec.n,
        "coords": [float(x) for x in spec.coords.ravel(order="C")],
        "covariances": [float(x) for x in spec.covariances.ravel(order="C")],
        "kernel_re": [float(x) for x in spec.kernel.real.ravel(order="C")],
        "kernel_im": [float(x) for x in spec.kernel.imag.ravel(order="C")],
        "damping_re": [float(x) for x in spec.damping.real.ravel(order="C")],
        "damping_im": [float(x) for x in spec.damping.imag.ravel(order="C")],
        "source_kind": list(spec.source_kind),
        "gen_coord_vector": [float(x) for x in spec.gen_coord_vector],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def spec_from_json(text: str) -> MediumSpec:
    doc = json.loads(text)
    n = int(doc["n"])
    coords = np.asarray(doc["coords"], dtype=float).reshape(3, n)
    cov = np.asarray(doc["covariances"], dtype=float).reshape(n, 3, 3)
    kernel = (
        np.asarray(doc["kernel_re"], dtype=float)
        + 1j * np.asarray(doc["kernel_im"], dtype=float)
    ).reshape(n, n)
    damping = (
        np.asarray(doc["damping_re"], dtype=float)
        + 1j * np.asarray(doc["damping_im"], dtype=float)
    ).reshape(n, n)
    return MediumSpec(
        coords=coords,
        covariances=cov,
        kernel=kernel,
        damping=damping,
        source_kind=tuple(doc["source_kind"]),
        gen_coord_vector=np.asarray(doc["gen_coord_vector"], dtype=float),
    )
