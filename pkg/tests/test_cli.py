import csv
import hashlib
import json

import numpy as np
import pytest

from livsic.cli import load_config, main, make_observable
from livsic.errors import ConfigInvalid
from livsic.maps import AnalyticCircleMap


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, command, cfg, *extra):
    out = tmp_path / "out"
    code = main([command, "--config", write_config(tmp_path, cfg), "--out", str(out), *extra])
    return code, out


DOUBLING = {"type": "circle", "k": 2, "eps": 0.0}
FOURIER16 = {"family": "fourier", "N": 16}


class TestConfig:
    def test_defaults_filled(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"map": DOUBLING}))
        assert cfg["t_grid"] == {"n": 21, "t_max": 0.5}
        assert cfg["seed"] == 0

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"map": {"type": "circle",}\n}')
        with pytest.raises(ConfigInvalid, match="line 1 column"):
            load_config(path)

    def test_bad_field(self, tmp_path):
        with pytest.raises(ConfigInvalid, match="field 'basis/N'"):
            load_config(write_config(tmp_path, {"basis": {"family": "fourier", "N": 0}}))

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            load_config(write_config(tmp_path, {"colour": "blue"}))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            load_config(tmp_path / "absent.json")


class TestObservables:
    def test_builtins(self):
        T = AnalyticCircleMap(2, 0.0)
        x = np.array([0.0, 0.25, 0.5])
        np.testing.assert_allclose(make_observable("cos1", T)(x), [1, 0, -1], atol=1e-15)
        np.testing.assert_allclose(make_observable("constant 0.5", T)(x), 0.5)
        np.testing.assert_allclose(make_observable("indicator-0.2-0.6", T)(x), [0, 1, 1])
        np.testing.assert_allclose(make_observable(2, T)(x), 2.0)

    def test_trig_list(self):
        f = make_observable([[1, 0.5, 0.0], [-1, 0.5, 0.0]], AnalyticCircleMap(2, 0.0))
        x = np.linspace(0, 1, 7)
        np.testing.assert_allclose(f(x), np.cos(2 * np.pi * x), atol=1e-15)

    def test_coboundary_of(self):
        T = AnalyticCircleMap(2, 0.0)
        f = make_observable({"coboundary_of": "cos1"}, T)
        g = make_observable("cos2-minus-cos1", T)
        x = np.linspace(0, 1, 11)
        np.testing.assert_allclose(f(x), g(x), atol=1e-14)

    def test_unknown(self):
        with pytest.raises(ConfigInvalid):
            make_observable("tent", AnalyticCircleMap(2, 0.0))


class TestSubcommands:
    def test_density(self, tmp_path):
        cfg = {"map": {"type": "beta", "beta": "golden"}, "basis": {"family": "ulam", "N": 256}}
        code, out = run(tmp_path, "density", cfg, "--dump-operator")
        assert code == 0
        rows = list(csv.reader((out / "density.csv").open()))
        assert rows[0] == ["x", "chi"]
        assert len(rows) == 257
        summary = json.loads((out / "density_summary.json").read_text())
        assert summary["eigenvalue"][0] == pytest.approx(1.0, abs=1e-10)
        assert (out / "operator.csv").read_text().startswith("row,col,re,im")

    def test_lambda_curve(self, tmp_path):
        cfg = {"map": DOUBLING, "basis": FOURIER16, "observable": "cos1", "t_grid": {"n": 5, "t_max": 0.2}}
        code, out = run(tmp_path, "lambda-curve", cfg)
        assert code == 0
        lines = (out / "lambda_curve.csv").read_text().splitlines()
        assert lines[0].startswith("t,re_lambda")
        assert len(lines) == 6

    def test_detect_not_coboundary(self, tmp_path):
        cfg = {"map": DOUBLING, "basis": {"family": "fourier", "N": 32}, "observable": "cos1"}
        code, out = run(tmp_path, "detect", cfg)
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["verdict"] == "NotCoboundary"
        assert report["variance"] == pytest.approx(0.5, abs=1e-4)
        assert report["periodic_obstruction_max"] >= 1.0
        prov = json.loads((out / "report.json.provenance.json").read_text())
        assert prov["tolerances"] == {"drift": 1e-8, "variance": 1e-6, "lam": 1e-6}

    def test_detect_inconclusive(self, tmp_path):
        # variance 0.5 sits between tau and 10 tau once tau = 0.1
        cfg = {
            "map": DOUBLING, "basis": FOURIER16, "observable": "cos1", "t_grid": [0.0],
            "tolerances": {"drift": 1.0, "variance": 0.1, "lam": 1.0},
        }
        code, out = run(tmp_path, "detect", cfg)
        assert code == 1
        assert json.loads((out / "report.json").read_text())["verdict"] == "Inconclusive"

    @pytest.mark.parametrize("method", ["cauchy", "resolvent"])
    def test_recover(self, tmp_path, method):
        cfg = {"map": DOUBLING, "basis": {"family": "fourier", "N": 64}, "observable": "cos2-minus-cos1"}
        code, out = run(tmp_path, "recover", cfg, "--method", method)
        assert code == 0
        summary = json.loads((out / "recovery.json").read_text())
        assert summary["method"] == method
        assert summary["residual_max"] <= 1e-8
        rows = (out / "h.csv").read_text().splitlines()
        assert rows[0] == "index,re,im"

    def test_recover_detect_first_refuses(self, tmp_path):
        cfg = {
            "map": DOUBLING, "basis": FOURIER16, "observable": "cos1",
            "detect_first": True, "t_grid": {"n": 3, "t_max": 0.1},
        }
        code, out = run(tmp_path, "recover", cfg)
        assert code == 1
        assert not (out / "h.csv").exists()

    def test_recover_residual_too_large(self, tmp_path):
        cfg = {"map": DOUBLING, "basis": FOURIER16, "observable": "cos1"}
        assert run(tmp_path, "recover", cfg)[0] == 1

    def test_periodic(self, tmp_path):
        cfg = {"map": DOUBLING, "observable": "constant 0.5", "n_max": 3}
        code, out = run(tmp_path, "periodic", cfg)
        assert code == 0
        rows = list(csv.DictReader((out / "periodic.csv").open()))
        assert [int(r["period"]) for r in rows] == [1, 2, 3, 3]
        assert [float(r["sum_re"]) for r in rows] == [0.5, 1.0, 1.5, 1.5]
        prov = json.loads((out / "periodic.csv.provenance.json").read_text())
        assert prov["max_abs"] == 1.5
        assert prov["heuristic"] is False

    def test_vexp_certify(self, tmp_path):
        cfg = {"map": {"type": "tsujii", "m": 12}, "s": 2.0, "n_max": 2}
        code, out = run(tmp_path, "vexp-certify", cfg)
        assert code == 0
        rows = list(csv.DictReader((out / "certificates.csv").open()))
        assert rows[0]["m"] == "12"
        assert float(rows[0]["margin"]) > 1e-3

    def test_vexp_printed_negative(self, tmp_path):
        cfg = {"map": {"type": "tsujii", "m": 12}, "s": 2.0, "n_max": 1}
        code, out = run(tmp_path, "vexp-certify", cfg, "--variant", "printed")
        assert code == 1
        rows = list(csv.DictReader((out / "certificates.csv").open()))
        assert float(rows[0]["value"]) >= 1.0

    def test_vexp_scan_empty(self, tmp_path):
        cfg = {"s": 2.0, "n_max": 1, "m_range": [2, 3]}
        code, out = run(tmp_path, "vexp-certify", cfg)
        assert code == 1
        assert (out / "certificates.csv").read_text().startswith("m,s,n")

    def test_selftest_subset(self, tmp_path, capsys):
        code, out = run(tmp_path, "selftest", {"criteria": [1, 7]})
        assert code == 0
        printed = capsys.readouterr().out.splitlines()
        assert len(printed) == 2
        assert all(line.startswith("[PASS]") for line in printed)
        assert (out / "selftest.csv").exists()


class TestExitCodes:
    def test_invalid_config(self, tmp_path, capsys):
        code, _ = run(tmp_path, "detect", {"map": {"type": "tent"}})
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_field(self, tmp_path):
        code, _ = run(tmp_path, "detect", {"map": DOUBLING})
        assert code == 2

    def test_incompatible_pair(self, tmp_path):
        cfg = {"map": DOUBLING, "basis": {"family": "ulam", "N": 16}, "observable": "cos1"}
        assert run(tmp_path, "detect", cfg)[0] == 2

    def test_config_required(self):
        with pytest.raises(SystemExit):
            main(["detect"])


class TestOutputs:
    def test_determinism_across_threads(self, tmp_path):
        cfg = {"map": {"type": "circle", "k": 2, "eps": 0.05}, "basis": FOURIER16, "observable": "cos1",
               "t_grid": {"n": 7, "t_max": 0.3}}
        path = write_config(tmp_path, cfg)
        texts = []
        for threads in ("1", "4"):
            out = tmp_path / f"out{threads}"
            assert main(["lambda-curve", "--config", path, "--out", str(out), "--threads", threads]) == 0
            texts.append((out / "lambda_curve.csv").read_bytes())
        assert texts[0] == texts[1]

    def test_provenance(self, tmp_path):
        cfg = {"map": DOUBLING, "basis": FOURIER16}
        code, out = run(tmp_path, "density", cfg)
        assert code == 0
        for name in ("density.csv", "density_coefficients.csv", "density_summary.json"):
            prov = json.loads((out / f"{name}.provenance.json").read_text())
            assert prov["sha256"] == hashlib.sha256((out / name).read_bytes()).hexdigest()
            assert prov["config"]["basis"] == FOURIER16
            assert prov["config"]["t_grid"] == {"n": 21, "t_max": 0.5}
            assert set(prov["versions"]) == {"livsic", "python", "numpy", "scipy"}
            assert "total_s" in prov["timings"]

    def test_headers(self, tmp_path):
        cfg = {"map": DOUBLING, "basis": FOURIER16}
        _, out = run(tmp_path, "density", cfg)
        for path in out.glob("*.csv"):
            first = path.read_text().splitlines()[0]
            assert first and not first[0].isdigit()
