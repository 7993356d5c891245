"""Batch command-line front end.

Frequencies are exchanged in eV at this boundary and converted to Hartree
internally; every run prints one summary line with a checksum of the files
it wrote, and identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import builders, openquantum, phasespace, response, spectral
from .constants import HARTREE_TO_EV
from .errors import QpmError
from .medium import KickDrive, MediumSpec, spec_from_json, spec_to_json

_HEADER_COMMENT = f"# 1 Hartree = {HARTREE_TO_EV!r} eV"


@dataclass
class RunConfig:
    subcommand: str
    model: str | None = None
    out: str | None = None
    omega_min: float | None = None
    omega_max: float | None = None
    omega_step: float | None = None
    filter_mode: str | None = None
    threshold: float | None = None
    window_lo: float | None = None
    window_hi: float | None = None
    beta: float | None = None
    hbar: float = 1.0
    eta: float = 1e-4
    seed: int = 0
    kick: str | None = None
    xyz: str | None = None
    params: str | None = None
    response_axis: str = "z"
    t_max: float | None = None
    t_step: float | None = None
    u0: str | None = None
    v0: str | None = None
    waves: str | None = None
    svg: str | None = None
    vectors: str | None = None
    cov_out: str | None = None


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _grid_ev(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ValueError("frequency step must be positive")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _checksum(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _write_csv(path: Path, header: str, rows) -> int:
    lines = [_HEADER_COMMENT, header]
    lines.extend(",".join(cells) for cells in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines) - 2


def _load_model(config: RunConfig) -> MediumSpec:
    if not config.model:
        raise ValueError("--model is required")
    return spec_from_json(Path(config.model).read_text(encoding="utf-8"))


def _kick_for(spec: MediumSpec, config: RunConfig) -> KickDrive:
    if config.kick is None:
        return KickDrive(np.ones(spec.n, dtype=complex))
    text = config.kick
    if Path(text).is_file():
        values = json.loads(Path(text).read_text(encoding="utf-8"))
    else:
        values = [float(p) for p in text.split(",")]
    amp = np.asarray(values, dtype=complex)
    if amp.size != spec.n:
        raise ValueError(f"kick amplitude must have length {spec.n}")
    return KickDrive(amp)


def _axis_index(name: str) -> int:
    try:
        return {"x": 0, "y": 1, "z": 2}[name.lower()]
    except KeyError:
        raise ValueError("response axis must be one of x, y, z") from None


def _write_svg(path: Path, table: response.SpectrumTable) -> None:
    """Minimal deterministic line plot of the spectrum columns."""
    width, height, pad = 720, 360, 40
    x = table.omega_grid * HARTREE_TO_EV
    series = [("im_alpha", table.im_alpha, "#1f77b4")]
    if table.absorptive is not None:
        series.append(("absorptive", table.absorptive, "#ff7f0e"))
        series.append(("dispersive", table.dispersive, "#2ca02c"))
    ymin = min(float(s.min()) for _, s, _ in series)
    ymax = max(float(s.max()) for _, s, _ in series)
    if ymax == ymin:
        ymax = ymin + 1.0
    xmin, xmax = float(x.min()), float(x.max()) if x.size > 1 else (0.0, 1.0)
    if xmax == xmin:
        xmax = xmin + 1.0

    def sx(v):
        return pad + (v - xmin) / (xmax - xmin) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - ymin) / (ymax - ymin) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for name, ys, color in series:
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x, ys))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>'
        )
        parts.append(f'<text x="{pad}" y="{pad}" font-size="10">{name} and companions</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _run_build(config: RunConfig) -> list[Path]:
    if not (config.xyz and config.params and config.out):
        raise ValueError("build requires --xyz, --params and --out")
    geom = builders.parse_xyz(Path(config.xyz))
    params = builders.DrudeParams.from_json(Path(config.params).read_text(encoding="utf-8"))
    spec = builders.build_drude_charge_model(
        geom, params, response_axis=_axis_index(config.response_axis)
    )
    out = Path(config.out)
    out.write_text(spec_to_json(spec) + "\n", encoding="utf-8")
    return [out]


def _spectrum_pipeline(spec: MediumSpec, config: RunConfig):
    grid_ev = _grid_ev(config.omega_min, config.omega_max, config.omega_step)
    grid = grid_ev / HARTREE_TO_EV
    _, eig = spectral.prepare(spec)
    drive = _kick_for(spec, config)
    ledger = response.decompose_modes(eig, spec, drive)
    return grid_ev, grid, ledger


def _run_spectrum(config: RunConfig) -> list[Path]:
    spec = _load_model(config)
    grid_ev, grid, ledger = _spectrum_pipeline(spec, config)
    table = response.reconstruct_spectrum(ledger, np.arange(ledger.n_modes), grid)
    rows = [
        (_fmt(w), _fmt(a), _fmt(b), _fmt(c))
        for w, a, b, c in zip(grid_ev, table.im_alpha, table.absorptive, table.dispersive)
    ]
    out = Path(config.out)
    _write_csv(out, "omega_eV,im_alpha,absorptive,dispersive", rows)
    written = [out]
    if config.svg:
        svg = Path(config.svg)
        _write_svg(svg, table)
        written.append(svg)
    return written


def _run_modes(config: RunConfig) -> list[Path]:
    spec = _load_model(config)
    _, eig = spectral.prepare(spec)
    rows = [
        (str(k), _fmt(mu.real * HARTREE_TO_EV), _fmt(mu.imag * HARTREE_TO_EV))
        for k, mu in enumerate(eig.values)
    ]
    out = Path(config.out)
    _write_csv(out, "k,re_mu,im_mu", rows)
    written = [out]
    if config.vectors:
        vec_path = Path(config.vectors)
        lines = []
        for k in range(eig.values.size):
            v = eig.right_vectors[:, k]
            lines.append(" ".join(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in v))
        vec_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(vec_path)
    return written


def _run_filter(config: RunConfig) -> list[Path]:
    spec = _load_model(config)
    _, eig = spectral.prepare(spec)
    drive = _kick_for(spec, config)
    ledger = response.decompose_modes(eig, spec, drive)
    if config.filter_mode == "if":
        if config.threshold is None:
            raise ValueError("--threshold is required for --mode if")
        selected = set(response.filter_intercept(ledger, config.threshold).tolist())
    elif config.filter_mode == "ef":
        if config.window_lo is None or config.window_hi is None:
            raise ValueError("--omega-lo/--omega-hi are required for --mode ef")
        selected = set(
            response.filter_eigenvalue(
                ledger,
                config.window_lo / HARTREE_TO_EV,
                config.window_hi / HARTREE_TO_EV,
            ).tolist()
        )
    else:
        raise ValueError("--mode must be 'if' or 'ef'")
    rows = [
        (
            str(k),
            _fmt(ledger.mu[k].real * HARTREE_TO_EV),
            _fmt(ledger.mu[k].imag * HARTREE_TO_EV),
            _fmt(ledger.intercept[k].real),
            "1" if k in selected else "0",
        )
        for k in range(ledger.n_modes)
    ]
    out = Path(config.out)
    _write_csv(out, "k,re_mu_eV,im_mu_eV,re_I,selected", rows)
    return [out]


def _run_propagate(config: RunConfig) -> list[Path]:
    spec = _load_model(config)
    if config.t_max is None or config.t_step is None or config.t_step <= 0:
        raise ValueError("propagate requires positive --t-max and --t-step")
    ext, _ = spectral.prepare(spec)
    n = spec.n

    def parse_vec(text):
        if text is None:
            return np.zeros(n, dtype=complex)
        return np.asarray([float(p) for p in text.split(",")], dtype=complex)

    u0 = parse_vec(config.u0)
    v0 = parse_vec(config.v0)
    drive = _kick_for(spec, config) if config.kick is not None else None
    from qpmedia.medium import consistent_extended_ic

    x0, xdot0 = consistent_extended_ic(spec, u0, v0, drive)
    q0 = phasespace.consistent_mean(ext, x0, xdot0)
    steps = int(np.floor(config.t_max / config.t_step + 1e-9)) + 1
    t_grid = config.t_step * np.arange(steps)
    means = phasespace.propagate_mean(ext, drive, q0, t_grid)
    xs = means[:, 2 * n :]
    header = ["t"]
    for name in ("u", "v"):
        for i in range(1, n + 1):
            header += [f"re_mean_{name}_{i}", f"im_mean_{name}_{i}"]
    rows = []
    for t, xrow in zip(t_grid, xs):
        cells = [_fmt(t)]
        for z in xrow:
            cells += [_fmt(z.real), _fmt(z.imag)]
        rows.append(tuple(cells))
    out = Path(config.out)
    _write_csv(out, ",".join(header), rows)
    written = [out]
    if config.cov_out:
        cov_dir = Path(config.cov_out)
        cov_dir.mkdir(parents=True, exist_ok=True)
        state0 = phasespace.GaussianState(
            mean=q0, cov=(config.hbar / 2.0) * np.eye(4 * n), hbar=config.hbar
        )
        jb = phasespace.decompose_generator(ext)
        for idx, t in enumerate(t_grid):
            prop = phasespace.propagator_at(ext, float(t), drive=drive, jb_eig=jb)
            cov = phasespace.evolve_state(state0, prop).cov
            lines = [_HEADER_COMMENT, f"# t = {_fmt(t)}"]
            for row in cov:
                lines.append(",".join(f"{_fmt(z.real)};{_fmt(z.imag)}" for z in row))
            target = cov_dir / f"cov_{idx:06d}.csv"
            target.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(cov_dir / f"cov_{len(t_grid) - 1:06d}.csv")
    return written


def _run_field(config: RunConfig) -> list[Path]:
    from .selfconsistent import FieldPlaneWaveSet, PlaneWave, emitted_field_first_order

    spec = _load_model(config)
    if not config.waves:
        raise ValueError("field requires --waves")
    doc = json.loads(Path(config.waves).read_text(encoding="utf-8"))
    grid_ev = _grid_ev(doc["omega_min_ev"], doc["omega_max_ev"], doc["omega_step_ev"])
    grid = grid_ev / HARTREE_TO_EV
    waves = []
    for w in doc["plane_waves"]:
        amp = np.asarray(w["amplitude_re"], dtype=float) + 1j * np.asarray(
            w.get("amplitude_im", np.zeros(3)), dtype=float
        )
        waves.append(PlaneWave(k=np.asarray(w["k"], dtype=float), amplitude=amp))
    k_queries = np.asarray(doc["k_queries"], dtype=float)
    field_set = FieldPlaneWaveSet(omega_grid=grid, waves=tuple(waves))
    ext, _ = spectral.prepare(spec)
    scattered, delta_terms = emitted_field_first_order(ext, spec, field_set, k_queries)
    rows = []
    for iw, w_ev in enumerate(grid_ev):
        for ik, kq in enumerate(k_queries):
            e = scattered[iw, ik]
            rows.append(
                (
                    _fmt(w_ev),
                    _fmt(kq[0]),
                    _fmt(kq[1]),
                    _fmt(kq[2]),
                    _fmt(e[0].real),
                    _fmt(e[0].imag),
                    _fmt(e[1].real),
                    _fmt(e[1].imag),
                    _fmt(e[2].real),
                    _fmt(e[2].imag),
                )
            )
    out = Path(config.out)
    _write_csv(
        out, "omega_eV,kx,ky,kz,re_Ex,im_Ex,re_Ey,im_Ey,re_Ez,im_Ez", rows
    )
    sidecar = out.with_suffix(out.suffix + ".deltas.json")
    sidecar.write_text(
        json.dumps(
            {
                "similarity_gauge": "deterministic eigenvector basis of the extended square root",
                "delta_terms": [
                    {
                        "k": [float(v) for v in term["k"]],
                        "amplitude_re": [
                            [float(c.real) for c in row] for row in term["amplitude"]
                        ],
                        "amplitude_im": [
                            [float(c.imag) for c in row] for row in term["amplitude"]
                        ],
                    }
                    for term in delta_terms
                ],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return [out, sidecar]


def _run_bath(config: RunConfig) -> list[Path]:
    spec = _load_model(config)
    if config.beta is None:
        raise ValueError("bath requires --beta")
    grid_ev = _grid_ev(config.omega_min, config.omega_max, config.omega_step)
    grid = grid_ev / HARTREE_TO_EV
    ext, _ = spectral.prepare(spec)
    corr = openquantum.thermal_correlation(ext, config.beta, config.hbar, grid, config.eta)
    rows = []
    m = corr.gamma.shape[1]
    for iw, w_ev in enumerate(grid_ev):
        for a in range(m):
            for b in range(m):
                rows.append(
                    (
                        _fmt(w_ev),
                        str(a + 1),
                        str(b + 1),
                        _fmt(corr.gamma[iw, a, b].real),
                        _fmt(corr.gamma[iw, a, b].imag),
                        _fmt(corr.s_ls[iw, a, b].real),
                        _fmt(corr.s_ls[iw, a, b].imag),
                    )
                )
    out = Path(config.out)
    _write_csv(out, "omega_eV,alpha,beta,re_gamma,im_gamma,re_S,im_S", rows)
    return [out]


_RUNNERS = {
    "build": _run_build,
    "spectrum": _run_spectrum,
    "modes": _run_modes,
    "filter": _run_filter,
    "propagate": _run_propagate,
    "field": _run_field,
    "bath": _run_bath,
}


def run(config: RunConfig) -> int:
    """Dispatch one subcommand; returns the process exit status."""
    try:
        written = _RUNNERS[config.subcommand](config)
    except QpmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    summary = " ".join(f"{p.name} sha256={_checksum(p)}" for p in written)
    print(f"{config.subcommand}: wrote {summary}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpm", description="Dissipative polarizable media toolkit"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, *, model=True):
        if model:
            p.add_argument("--model", required=True, help="model JSON file")
        p.add_argument("--out", required=True, help="output file")

    p = sub.add_parser("build", help="build a model from geometry + parameters")
    p.add_argument("--xyz", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--response-axis", default="z", choices=("x", "y", "z"))
    p.add_argument("--out", required=True)

    p = sub.add_parser("spectrum", help="tabulate Im alpha over a frequency window")
    add_common(p)
    p.add_argument("--omega-min", type=float, required=True, help="window start (eV)")
    p.add_argument("--omega-max", type=float, required=True, help="window end (eV)")
    p.add_argument("--omega-step", type=float, required=True, help="step (eV)")
    p.add_argument("--kick", help="kick amplitudes: comma list or JSON file")
    p.add_argument("--svg", help="optional SVG plot path")

    p = sub.add_parser("modes", help="dump the extended eigenvalues")
    add_common(p)
    p.add_argument("--vectors", help="optional eigenvector dump path")

    p = sub.add_parser("filter", help="mode selection report")
    add_common(p)
    p.add_argument("--mode", dest="filter_mode", required=True, choices=("if", "ef"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--omega-lo", dest="window_lo", type=float, help="window start (eV)")
    p.add_argument("--omega-hi", dest="window_hi", type=float, help="window end (eV)")
    p.add_argument("--kick", help="kick amplitudes: comma list or JSON file")

    p = sub.add_parser("propagate", help="mean phase-space trajectory")
    add_common(p)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--t-step", type=float, required=True)
    p.add_argument("--u0", help="comma list of initial u")
    p.add_argument("--v0", help="comma list of initial u'")
    p.add_argument("--kick", help="kick amplitudes applied for t >= 0")
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument(
        "--cov-out",
        dest="cov_out",
        help="directory for per-sample covariance dumps (vacuum initial state)",
    )

    p = sub.add_parser("field", help="first-order scattered field")
    add_common(p)
    p.add_argument("--waves", required=True, help="plane-wave set JSON")

    p = sub.add_parser("bath", help="thermal bath correlation tables")
    add_common(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1e-4, help="regularization (Hartree)")
    p.add_argument("--omega-min", type=float, required=True)
    p.add_argument("--omega-max", type=float, required=True)
    p.add_argument("--omega-step", type=float, required=True)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    fields = {f: getattr(args, f) for f in vars(args)}
    config = RunConfig(**fields)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
