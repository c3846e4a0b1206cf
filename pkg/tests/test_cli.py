import csv
import io
import json
import subprocess
import sys

import pytest

from hardyiter.cli import (
    ConfigError,
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_IO,
    EXIT_OK,
    Job,
    emit_report,
    main,
    parse_config,
    run,
    summarize,
)
from hardyiter.weights import INF, Power, TwoPiecePower

ONE = {"kind": "power", "c": 1, "alpha": 0}
DROP = {"kind": "two_piece", "c1": 1, "alpha": 0, "c2": 1, "beta": -4, "knot": 1}
GOLDEN = {"cmd": "constant", "ineq": "hardy-dec", "u": ONE, "v": ONE, "w": DROP, "p": 2, "q": 2}


def run_main(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestParseConfig:
    def test_round_trip(self):
        job = parse_config(json.dumps(GOLDEN))
        assert job.cmd == "constant"
        assert job.params["u"] == Power(1, 0)
        assert job.params["w"] == TwoPiecePower(1, 0, 1, -4, 1)
        assert job.grid == (1e-6, 1e6, 4096) and job.format == "json"

    def test_missing_weight(self):
        data = dict(GOLDEN)
        del data["u"]
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps(data))
        assert exc.value.path == "u"

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps({**GOLDEN, "foo": 1}))
        assert exc.value.path == "foo"

    def test_nested_weight_path(self):
        data = {**GOLDEN, "w": {"kind": "power", "c": 1}}
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps(data))
        assert exc.value.path == "w.alpha"

    def test_exponent_path(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps({**GOLDEN, "p": "two"}))
        assert exc.value.path == "p"

    def test_infinite_exponent(self):
        assert parse_config(json.dumps({**GOLDEN, "q": "inf"})).params["q"] == INF

    @pytest.mark.parametrize(
        "patch,path",
        [
            ({"schema_version": 2}, "schema_version"),
            ({"grid": {"a": 1, "b": 0.5, "n": 10}}, "grid"),
            ({"grid": {"a": 1, "b": 2}}, "grid.n"),
            ({"window": [2, 3]}, "window"),
            ({"format": "xml"}, "format"),
            ({"ineq": "nope"}, "ineq"),
            ({"cmd": "launch"}, "cmd"),
        ],
    )
    def test_invalid(self, patch, path):
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps({**GOLDEN, **patch}))
        assert exc.value.path == path

    def test_not_json(self):
        with pytest.raises(ConfigError):
            parse_config("{")

    def test_iterated_needs_s(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps({**GOLDEN, "ineq": "c1"}))
        assert exc.value.path == "s"

    def test_sweep_lattice(self):
        job = parse_config(json.dumps({"cmd": "sweep", "lattice": {"ineq": "hardy-dec", "u": ONE, "v": ONE, "w": DROP, "p": [2, 3], "q": [2]}}))
        assert job.params["p"] == [2.0, 3.0] and job.params["s"] == [None]


class TestEmitReport:
    def test_json_deterministic(self):
        data = {"b": 1 / 3, "a": [INF, 0.0], "c": float("nan")}
        a = emit_report(data, "json")
        assert a == emit_report(data, "json")
        parsed = json.loads(a)
        assert parsed["a"][0] == "inf" and parsed["c"] == "nan"
        assert parsed["b"] == 0.333333333333
        assert a.endswith(b"\n")

    def test_csv_header_only(self):
        text = emit_report([], "csv", ("x", "y")).decode()
        assert text.splitlines() == ["x,y"]

    def test_csv_inf_is_empty_cell(self):
        text = emit_report([{"x": INF, "y": 2.0}], "csv", ("x", "y")).decode()
        rows = list(csv.reader(io.StringIO(text)))
        assert rows == [["x", "y"], ["", "2"]]

    def test_csv_suite_rows(self):
        report = {"instances": [{"id": "a", "theorem": "T", "case": "I", "left": 1, "right": 1, "ratio": 1, "status": "Pass", "reason": ""}]}
        rows = list(csv.DictReader(io.StringIO(emit_report(report, "csv").decode())))
        assert rows[0]["status"] == "Pass"


class TestCommands:
    def test_constant_golden(self, capsys):
        code, out, _ = run_main(["constant", "--config", json.dumps(GOLDEN)], capsys)
        assert code == EXIT_OK
        report = json.loads(out)
        assert report["schema_version"] == 1
        assert report["terms"]["A0"] == pytest.approx(0.666666666667, abs=1e-12)
        assert report["terms"]["A1"] == pytest.approx(0.666666666667, abs=1e-12)
        assert report["regime"] == "I"

    def test_constant_flags_override(self, capsys, tmp_path):
        cfg = tmp_path / "job.json"
        cfg.write_text(json.dumps({**GOLDEN, "ineq": "copson-inc"}))
        code, out, _ = run_main(["constant", "--config", str(cfg), "--ineq", "hardy-dec"], capsys)
        assert code == EXIT_OK and json.loads(out)["terms"]["A0"] == pytest.approx(2 / 3, rel=1e-9)

    def test_config_error_exit(self, capsys):
        code, out, err = run_main(["constant", "--config", json.dumps({**GOLDEN, "foo": 1})], capsys)
        assert code == EXIT_CONFIG and out == "" and "foo" in err

    def test_condition_error_exit(self, capsys):
        # p = inf is not covered on the nondecreasing cone
        code, _, err = run_main(["constant", "--config", json.dumps({**GOLDEN, "ineq": "hardy-inc", "p": "inf"})], capsys)
        assert code == EXIT_CONFIG and err

    def test_missing_config_file(self, capsys, tmp_path):
        code, _, _ = run_main(["constant", "--config", str(tmp_path / "absent.json")], capsys)
        assert code == EXIT_IO

    def test_unwritable_output(self, capsys, tmp_path):
        code, _, _ = run_main(["constant", "--config", json.dumps(GOLDEN), "--out", str(tmp_path / "no" / "x.json")], capsys)
        assert code == EXIT_IO

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "r.json"
        code, out, _ = run_main(["constant", "--config", json.dumps(GOLDEN), "--out", str(target)], capsys)
        assert code == EXIT_OK and out == ""
        assert json.loads(target.read_text())["ineq"] == "hardy-dec"

    def test_oracle(self, capsys):
        cfg = {"cmd": "oracle", "form": "plain-hardy", "u": ONE, "v": ONE, "w": {"kind": "power", "c": 1, "alpha": -2}, "p": 2, "q": 2, "budget": 5}
        code, out, _ = run_main(["oracle", "--config", json.dumps(cfg), "--grid", "1e-3,1e3,257"], capsys)
        assert code == EXIT_OK
        est = json.loads(out)
        assert 1.5 < est["lower_bound"] <= 2.0

    def test_verify_negative_control_exit(self, capsys):
        argv = ["verify", "--samples", "0", "--negative-control", "--budget", "5", "--grid", "1e-6,1e6,513"]
        code, out, _ = run_main(argv, capsys)
        # the negative control is expected to fail and does not set the exit code
        assert code == EXIT_OK
        assert json.loads(out)["instances"][0]["status"] == "Fail"

    def test_verify_fail_exit(self, monkeypatch):
        import hardyiter.cli as cli

        fake = {"config": {}, "summary": {}, "instances": [{"id": "x", "theorem": "T", "case": "I", "status": "Fail"}]}
        monkeypatch.setattr(cli, "run_suite", lambda cfg: fake)
        assert run(Job("verify", {"theorem": "Thm2.5", "samples": 1, "budget": 1, "negative_control": False}), io.StringIO()) == EXIT_FAIL

    def test_sweep_csv(self, capsys, tmp_path):
        lattice = tmp_path / "lat.json"
        lattice.write_text(json.dumps({"ineq": "hardy-dec", "u": ONE, "v": ONE, "w": DROP, "p": [2, 0.5], "q": [2]}))
        code, out, _ = run_main(["sweep", "--lattice", str(lattice), "--format", "csv"], capsys)
        assert code == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [r["p"] for r in rows] == ["2", "0.5"]
        assert float(rows[0]["total"]) == pytest.approx(4 / 3, rel=1e-9)

    def test_report_summary(self, capsys, tmp_path):
        suite = {
            "instances": [
                {"theorem": "Thm2.5", "case": "I", "status": "Pass"},
                {"theorem": "Thm2.5", "case": "I", "status": "Inconclusive"},
                {"theorem": "Thm2.5", "case": "II", "status": "Fail"},
            ]
        }
        path = tmp_path / "suite.json"
        path.write_text(json.dumps(suite))
        code, out, _ = run_main(["report", "--input", str(path), "--format", "csv"], capsys)
        assert code == EXIT_OK
        rows = {(r["theorem"], r["case"]): r for r in csv.DictReader(io.StringIO(out))}
        assert rows[("Thm2.5", "I")]["pass"] == "1" and rows[("Thm2.5", "II")]["fail"] == "1"
        assert summarize(suite)[0]["pass_rate"] == 0.5

    def test_console_script_module(self):
        proc = subprocess.run([sys.executable, "-m", "hardyiter.cli", "constant", "--config", json.dumps(GOLDEN)], capture_output=True, text=True)
        assert proc.returncode == 0 and '"A0"' in proc.stdout

    def test_report_rejects_other_json(self, capsys, tmp_path):
        path = tmp_path / "x.json"
        path.write_text(json.dumps({"instances": [{"status": "Pass"}]}))
        code, _, err = run_main(["report", "--input", str(path)], capsys)
        assert code == EXIT_CONFIG and "input" in err
