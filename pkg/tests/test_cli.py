import json

import numpy as np
import pytest

from conftest import stable_spec
from qpmedia.cli import main
from qpmedia.constants import HARTREE_TO_EV
from qpmedia.medium import spec_to_json


@pytest.fixture
def model_file(tmp_path):
    spec = stable_spec(seed=777, n=3)
    path = tmp_path / "model.json"
    path.write_text(spec_to_json(spec) + "\n", encoding="utf-8")
    return path


def read_rows(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("#")  # conversion constant for auditability
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return header, rows


def scalar_model(tmp_path, k=2.0, gamma=0.5):
    from conftest import scalar_spec

    path = tmp_path / "scalar.json"
    path.write_text(spec_to_json(scalar_spec(k, gamma)) + "\n", encoding="utf-8")
    return path


class TestSpectrum:
    def test_row_count_and_determinism(self, model_file, tmp_path, capsys):
        out = tmp_path / "s.csv"
        args = [
            "spectrum", "--model", str(model_file), "--omega-min", "0",
            "--omega-max", "7", "--omega-step", "0.01", "--out", str(out),
        ]
        assert main(args) == 0
        first = out.read_bytes()
        header, rows = read_rows(out)
        assert header == ["omega_eV", "im_alpha", "absorptive", "dispersive"]
        assert len(rows) == 701
        assert main(args) == 0
        assert out.read_bytes() == first
        summary = capsys.readouterr().out
        assert "sha256=" in summary

    def test_split_adds_up(self, model_file, tmp_path):
        out = tmp_path / "s.csv"
        main(
            [
                "spectrum", "--model", str(model_file), "--omega-min", "0.5",
                "--omega-max", "3.0", "--omega-step", "0.25", "--out", str(out),
            ]
        )
        _, rows = read_rows(out)
        for cells in rows:
            total, absorb, disp = float(cells[1]), float(cells[2]), float(cells[3])
            assert total == pytest.approx(absorb + disp, abs=1e-12)

    def test_svg_written(self, model_file, tmp_path):
        out = tmp_path / "s.csv"
        svg = tmp_path / "s.svg"
        main(
            [
                "spectrum", "--model", str(model_file), "--omega-min", "0.5",
                "--omega-max", "3.0", "--omega-step", "0.5", "--out", str(out),
                "--svg", str(svg),
            ]
        )
        assert svg.read_text(encoding="utf-8").startswith("<svg")


class TestModes:
    def test_ev_conversion_of_damped_scalar(self, tmp_path):
        model = scalar_model(tmp_path)
        out = tmp_path / "modes.csv"
        assert main(["modes", "--model", str(model), "--out", str(out)]) == 0
        header, rows = read_rows(out)
        assert header == ["k", "re_mu", "im_mu"]
        vals = sorted(float(r[1]) for r in rows)
        expected = np.sqrt(7.0) / 2.0 * HARTREE_TO_EV
        assert vals[0] == pytest.approx(-expected, rel=1e-10)
        assert vals[1] == pytest.approx(expected, rel=1e-10)

    def test_vector_dump(self, tmp_path):
        model = scalar_model(tmp_path)
        out = tmp_path / "modes.csv"
        vecs = tmp_path / "vecs.txt"
        main(["modes", "--model", str(model), "--out", str(out), "--vectors", str(vecs)])
        lines = vecs.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert len(lines[0].split()) == 4  # two complex pairs


class TestFilter:
    def test_threshold_nesting(self, model_file, tmp_path):
        selected = {}
        for name, thr in (("a", "0.05"), ("b", "0.01")):
            out = tmp_path / f"{name}.csv"
            assert main(
                [
                    "filter", "--model", str(model_file), "--mode", "if",
                    "--threshold", thr, "--out", str(out),
                ]
            ) == 0
            _, rows = read_rows(out)
            selected[name] = {r[0] for r in rows if r[4] == "1"}
        assert selected["a"].issubset(selected["b"])

    def test_ef_window(self, tmp_path):
        model = scalar_model(tmp_path)
        out = tmp_path / "ef.csv"
        lo = 1.0 * HARTREE_TO_EV
        hi = 1.5 * HARTREE_TO_EV
        main(
            [
                "filter", "--model", str(model), "--mode", "ef",
                "--omega-lo", str(lo), "--omega-hi", str(hi), "--out", str(out),
            ]
        )
        _, rows = read_rows(out)
        assert all(r[4] == "1" for r in rows)  # |Re mu| = sqrt7/2 in window


class TestPropagate:
    def test_matches_reference_integrator(self, tmp_path):
        from conftest import scalar_spec
        from qpmedia.medium import integrate_reference_second_order, zero_drive

        model = scalar_model(tmp_path, k=1.0, gamma=0.0)
        out = tmp_path / "traj.csv"
        assert main(
            [
                "propagate", "--model", str(model), "--t-max", "5", "--t-step",
                "0.1", "--u0", "1.0", "--v0", "0.0", "--out", str(out),
            ]
        ) == 0
        _, rows = read_rows(out)
        assert len(rows) == 51
        spec = scalar_spec(1.0, 0.0)
        t = np.arange(0.0, 5.0 + 1e-12, 1e-3)
        oracle = integrate_reference_second_order(spec, zero_drive(1), [1.0], [0.0], t)
        for cells in rows[:: 10]:
            ti = float(cells[0])
            idx = int(round(ti / 1e-3))
            assert float(cells[1]) == pytest.approx(oracle.u[idx, 0].real, abs=1e-7)


class TestBath:
    def test_rows_and_hermiticity(self, model_file, tmp_path):
        out = tmp_path / "bath.csv"
        assert main(
            [
                "bath", "--model", str(model_file), "--beta", "1.0",
                "--omega-min", "1.0", "--omega-max", "2.0", "--omega-step", "0.5",
                "--out", str(out),
            ]
        ) == 0
        header, rows = read_rows(out)
        assert header == ["omega_eV", "alpha", "beta", "re_gamma", "im_gamma", "re_S", "im_S"]
        assert len(rows) == 3 * 6 * 6
        table = {}
        for cells in rows:
            key = (cells[0], int(cells[1]), int(cells[2]))
            table[key] = complex(float(cells[3]), float(cells[4]))
        for (w, a, b), val in table.items():
            assert val == pytest.approx(np.conj(table[(w, b, a)]), abs=1e-10)


class TestField:
    def test_runs_and_writes_sidecar(self, tmp_path):
        from conftest import scalar_spec

        model = tmp_path / "m.json"
        model.write_text(spec_to_json(scalar_spec(2.0, 0.3)) + "\n", encoding="utf-8")
        waves = tmp_path / "waves.json"
        waves.write_text(
            json.dumps(
                {
                    "omega_min_ev": 10.0,
                    "omega_max_ev": 20.0,
                    "omega_step_ev": 10.0,
                    "plane_waves": [
                        {"k": [0.01, 0.0, 0.0], "amplitude_re": [0.0, 1.0, 0.0]}
                    ],
                    "k_queries": [[0.02, 0.0, 0.0], [0.0, 0.03, 0.0]],
                }
            ),
            encoding="utf-8",
        )
        out = tmp_path / "field.csv"
        assert main(
            ["field", "--model", str(model), "--waves", str(waves), "--out", str(out)]
        ) == 0
        header, rows = read_rows(out)
        assert len(rows) == 2 * 2
        sidecar = out.with_suffix(out.suffix + ".deltas.json")
        doc = json.loads(sidecar.read_text(encoding="utf-8"))
        assert len(doc["delta_terms"]) == 1
        assert "similarity_gauge" in doc


class TestBuildRoundTrip:
    def test_build_then_spectrum(self, tmp_path):
        xyz = tmp_path / "g.xyz"
        xyz.write_text("2\ncluster\nAg 0 0 0\nAg 0 0 2.5\n", encoding="utf-8")
        params = tmp_path / "p.json"
        params.write_text(
            json.dumps(
                {
                    "drude_factor": 0.01,
                    "relaxation": 0.004,
                    "gaussian_width": 2.0,
                    "tunneling": {"enabled": False, "d0": 0.0, "steepness": 1.0},
                }
            ),
            encoding="utf-8",
        )
        model = tmp_path / "m.json"
        assert main(
            ["build", "--xyz", str(xyz), "--params", str(params), "--out", str(model)]
        ) == 0
        out = tmp_path / "s.csv"
        assert main(
            [
                "spectrum", "--model", str(model), "--omega-min", "0.05",
                "--omega-max", "2.0", "--omega-step", "0.05", "--out", str(out),
            ]
        ) == 0
        # re-running from the written model reproduces the file exactly
        first = out.read_bytes()
        assert main(
            [
                "spectrum", "--model", str(model), "--omega-min", "0.05",
                "--omega-max", "2.0", "--omega-step", "0.05", "--out", str(out),
            ]
        ) == 0
        assert out.read_bytes() == first
        # and the file matches the in-memory pipeline on the same model
        from qpmedia.constants import HARTREE_TO_EV
        from qpmedia.medium import KickDrive, spec_from_json
        from qpmedia.response import decompose_modes, reconstruct_spectrum
        from qpmedia.spectral import prepare

        spec = spec_from_json(model.read_text(encoding="utf-8"))
        _, eig = prepare(spec)
        ledger = decompose_modes(eig, spec, KickDrive(np.ones(spec.n)))
        _, rows = read_rows(out)
        grid = np.array([float(r[0]) for r in rows]) / HARTREE_TO_EV
        table = reconstruct_spectrum(ledger, np.arange(ledger.n_modes), grid)
        for cells, val in zip(rows, table.im_alpha):
            assert float(cells[1]) == float(format(val, ".12g"))


class TestCovDump:
    def test_per_sample_files(self, tmp_path):
        model = scalar_model(tmp_path, k=1.0, gamma=0.0)
        out = tmp_path / "traj.csv"
        cov_dir = tmp_path / "covs"
        assert main(
            [
                "propagate", "--model", str(model), "--t-max", "0.4", "--t-step",
                "0.2", "--u0", "1.0", "--out", str(out), "--cov-out", str(cov_dir),
            ]
        ) == 0
        files = sorted(cov_dir.glob("cov_*.csv"))
        assert len(files) == 3
        body = files[0].read_text(encoding="utf-8").splitlines()
        assert body[1].startswith("# t = 0")
        assert len(body) == 2 + 4  # 4x4 covariance


class TestThreadCap:
    def test_sweep_identical_under_threads(self, model_file, tmp_path, monkeypatch):
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        args = lambda out: [
            "spectrum", "--model", str(model_file), "--omega-min", "0.5",
            "--omega-max", "3.0", "--omega-step", "0.1", "--out", str(out),
        ]
        monkeypatch.delenv("QPM_THREADS", raising=False)
        assert main(args(out_a)) == 0
        monkeypatch.setenv("QPM_THREADS", "4")
        assert main(args(out_b)) == 0
        assert out_a.read_bytes() == out_b.read_bytes()


class TestErrors:
    def test_structured_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        out = tmp_path / "s.csv"
        code = main(
            [
                "spectrum", "--model", str(bad), "--omega-min", "0",
                "--omega-max", "1", "--omega-step", "0.1", "--out", str(out),
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["spectrum"])  # missing required flags
        assert exc.value.code == 2
