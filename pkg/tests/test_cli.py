import json

import pytest

from urnfield.cli import main

N2_JSON = {"kind": "polynomial", "coeffs": [0, 0, 1]}


def mc_config(tmp_path, **over):
    cfg = {
        "schema": 1,
        "model": "ium",
        "seq": N2_JSON,
        "p": 0.2,
        "d": 2,
        "black0": [1, 1],
        "red0": [1, 1],
        "n_steps": 500,
        "n_runs": 12,
        "record_every": 50,
        "seed": 99,
    }
    cfg.update(over)
    path = tmp_path / "mc.json"
    path.write_text(json.dumps(cfg))
    return path


class TestExitCodes:
    def test_success(self, tmp_path, capsys):
        assert main(["field", "--m", "3", "--p", "0.5", "--resolution", "3"]) == 0
        assert capsys.readouterr().out.startswith("x,y,F1,F2")

    def test_argument_error(self, capsys):
        assert main(["field", "--m", "3", "--p", "1.5", "--resolution", "3"]) == 2
        assert main(["field", "--m", "1", "--p", "0.5", "--resolution", "3"]) == 2
        assert main(["nonsense"]) == 2

    def test_condition_violation(self, capsys):
        # m far too small for an off-diagonal equilibrium at this p
        assert main(["sm", "--m", "2", "--p", "0.05"]) == 3

    def test_sm_large_p_is_argument_error(self):
        assert main(["sm", "--m", "2", "--p", "0.6"]) == 2

    def test_io_error(self, tmp_path):
        rc = main(
            ["field", "--m", "3", "--p", "0.5", "--resolution", "3",
             "--out", str(tmp_path / "missing_dir" / "x.csv")]
        )
        assert rc == 4

    def test_malformed_config(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("not json at all")
        assert main(["mc", "--config", str(bad)]) == 2

    def test_unknown_config_field(self, tmp_path):
        path = mc_config(tmp_path)
        blob = json.loads(path.read_text())
        blob["typo"] = True
        path.write_text(json.dumps(blob))
        assert main(["mc", "--config", str(path)]) == 2


class TestField:
    def test_row_count(self, tmp_path):
        out = tmp_path / "f.csv"
        assert main(["field", "--m", "3", "--p", "0.5", "--resolution", "25", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 626  # header + 625 rows
        manifest = json.loads((tmp_path / "f.csv.manifest.json").read_text())
        assert manifest["command"] == "field"
        assert manifest["outputs"][0]["path"] == str(out)

    def test_manifest_digest_matches(self, tmp_path):
        import hashlib

        out = tmp_path / "f.csv"
        main(["field", "--m", "2", "--p", "0.3", "--resolution", "5", "--out", str(out)])
        manifest = json.loads((tmp_path / "f.csv.manifest.json").read_text())
        digest = hashlib.sha256(out.read_bytes()).hexdigest()
        assert manifest["outputs"][0]["sha256"] == digest


class TestEquilibriaCommand:
    def test_nine_rows_at_p_zero(self, tmp_path):
        out = tmp_path / "e.csv"
        assert main(["equilibria", "--m", "3", "--p", "0", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,y,lambda_minus,lambda_plus,class"
        assert len(lines) == 10

    def test_json_format(self, capsys):
        assert main(["equilibria", "--m", "2", "--p", "0.2", "--format", "json"]) == 0
        blob = json.loads(capsys.readouterr().out)
        classes = {e["class"] for e in blob["equilibria"]}
        assert "strictly_stable" in classes
        xs = sorted(round(e["x"], 6) for e in blob["equilibria"])
        assert 0.112702 in xs  # the mixed stable point at p = 0.2


class TestPointCommands:
    def test_um_value(self, capsys):
        assert main(["um", "--m", "2", "--p", "0.18"]) == 0
        blob = json.loads(capsys.readouterr().out)
        assert blob["u"] == pytest.approx(0.1, abs=1e-10)
        assert blob["strictly_stable"] is True

    def test_sm_near_corner(self, capsys):
        assert main(["sm", "--m", "30", "--p", "0.3"]) == 0
        blob = json.loads(capsys.readouterr().out)
        assert blob["x"] == pytest.approx(0.3, abs=0.01)
        assert blob["y"] == pytest.approx(1.0, abs=0.01)
        assert blob["class"] == "strictly_stable"


class TestSimulate:
    def test_deterministic_outputs(self, tmp_path):
        args = ["simulate", "--model", "ium", "--m", "3", "--p", "0.2",
                "--steps", "500", "--seed", "7", "--record-every", "100"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_multicolor_counts(self, tmp_path):
        out = tmp_path / "m.csv"
        rc = main(["simulate", "--model", "multicolor", "--m", "3", "--nc", "3",
                   "--a", "1,1,1", "--d", "2", "--steps", "200", "--seed", "5",
                   "--counts", "--record-every", "50", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "step,c_1,c_2,c_3"
        last = [int(v) for v in lines[-1].split(",")]
        assert sum(last[1:]) == 3 + 2 * 200

    def test_coupled_violations_column(self, tmp_path):
        out = tmp_path / "c.csv"
        rc = main(["simulate", "--model", "coupled", "--m", "2", "--p", "0.4",
                   "--steps", "500", "--seed", "3", "--record-every", "100",
                   "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "step,x_1,x_2,seq_x_1,seq_x_2,violations"
        assert lines[-1].endswith(",0")

    def test_missing_weights(self):
        assert main(["simulate", "--model", "ium", "--steps", "10", "--seed", "1"]) == 2


class TestMcAndScan:
    def test_mc_report(self, tmp_path):
        cfg = mc_config(tmp_path)
        out = tmp_path / "rep.json"
        assert main(["mc", "--config", str(cfg), "--out", str(out), "--runs-csv"]) == 0
        rep = json.loads(out.read_text())
        assert rep["n_runs"] == 12
        total = sum(c["count"] for c in rep["cells"]) + rep["unresolved"]
        assert total == 12
        runs = (tmp_path / "rep.runs.csv").read_text().splitlines()
        assert runs[0] == "run_index,seed,label,x_1_final,x_2_final"
        assert len(runs) == 13

    def test_mc_deterministic(self, tmp_path):
        cfg = mc_config(tmp_path)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["mc", "--config", str(cfg), "--out", str(a)])
        main(["mc", "--config", str(cfg), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_scan(self, tmp_path):
        scan = {
            "schema": 1,
            "m": 2,
            "p_grid": [0.1, 0.45],
            "threshold": 0.9,
            "per_point": {
                "schema": 1, "model": "ium", "seq": N2_JSON,
                "n_steps": 500, "n_runs": 10, "seed": 3,
            },
        }
        path = tmp_path / "scan.json"
        path.write_text(json.dumps(scan))
        out = tmp_path / "curve.csv"
        assert main(["scan", "--config", str(path), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "p,domination_frequency,ci_lo,ci_hi"
        assert len(lines) == 3


class TestCheckW:
    def test_verdicts(self, tmp_path, capsys):
        seq_path = tmp_path / "seq.json"
        seq_path.write_text(json.dumps(N2_JSON))
        assert main(["check-w", "--seq", str(seq_path), "--horizon", "100000"]) == 0
        blob = json.loads(capsys.readouterr().out)
        checks = blob["checks"]
        assert checks["strong"]["verdict"] == "holds"
        assert checks["variation_bound"]["verdict"] == "holds"
        assert checks["remainder_bound"]["verdict"] == "fails"

    def test_linear_fails(self, tmp_path, capsys):
        seq_path = tmp_path / "seq.json"
        seq_path.write_text(json.dumps({"kind": "polynomial", "coeffs": [0, 1]}))
        assert main(["check-w", "--seq", str(seq_path), "--horizon", "10000"]) == 0
        blob = json.loads(capsys.readouterr().out)
        assert blob["checks"]["strong"]["verdict"] == "fails"
        assert "rem_ratio" not in blob["checks"]


class TestThreadsEnv:
    def test_env_fallback(self, monkeypatch):
        from urnfield.cli import build_parser

        monkeypatch.setenv("URNFIELD_THREADS", "4")
        args = build_parser().parse_args(
            ["field", "--m", "2", "--p", "0.1", "--resolution", "3"]
        )
        assert args.threads == 4

    def test_flag_overrides_env(self, monkeypatch):
        from urnfield.cli import build_parser

        monkeypatch.setenv("URNFIELD_THREADS", "4")
        args = build_parser().parse_args(
            ["field", "--m", "2", "--p", "0.1", "--resolution", "3", "--threads", "2"]
        )
        assert args.threads == 2


class TestSimulateEvents:
    def test_monopoly_annotation_in_manifest(self, tmp_path):
        out = tmp_path / "t.csv"
        rc = main(["simulate", "--model", "multicolor", "--m", "3", "--nc", "2",
                   "--a", "1,1", "--d", "2", "--steps", "3000", "--seed", "2",
                   "--record-every", "100", "--out", str(out)])
        assert rc == 0
        manifest = json.loads((tmp_path / "t.csv.manifest.json").read_text())
        assert "monopoly" in manifest["arguments"]["events"]


class TestEmbedTest:
    def test_report(self, tmp_path, capsys):
        rc = main(["embed-test", "--nc", "2", "--a", "1,1", "--d", "2", "--m", "2",
                   "--k", "2", "--samples", "2000", "--seed", "5"])
        assert rc == 0
        blob = json.loads(capsys.readouterr().out)
        assert blob["method"] == "chi_square"
        assert blob["p_value"] > 1e-3

    def test_too_few_samples(self):
        rc = main(["embed-test", "--nc", "2", "--a", "1,1", "--d", "2", "--m", "2",
                   "--k", "2", "--samples", "10", "--seed", "5"])
        assert rc == 2
