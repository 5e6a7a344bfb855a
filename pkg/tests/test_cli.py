import json

import pandas as pd
import pytest

import cli
from classify import InternalConsistencyError


def _write(path, data) -> str:
    path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
    return str(path)


class TestListAndCheck:
    """Katalog und Konstruktionspruefung."""

    def test_list(self, capsys):
        assert cli.main(["list"]) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "VII" in out
        assert "params.a6 = 1.0" in out
        assert "options.w1_form = unsquared" in out

    def test_check_by_name(self, capsys):
        assert cli.main(["check", "VI"]) == cli.EXIT_OK
        assert "[Konstruktion] VI: Karte gueltig" in capsys.readouterr().out

    def test_check_spec_file(self, tmp_path):
        path = _write(tmp_path / "vi.json", {"family": "VI", "params": {"a": 0.5}})
        assert cli.main(["check", path]) == cli.EXIT_OK

    def test_constraint_violation(self, tmp_path, capsys):
        path = _write(tmp_path / "vi.json", {"family": "VI", "params": {"a": 2.0, "b": 2.0}})
        assert cli.main(["check", path]) == cli.EXIT_CONSTRAINT
        assert "a != b" in capsys.readouterr().err

    def test_unknown_parameter(self, tmp_path, capsys):
        path = _write(tmp_path / "i.json", {"family": "I", "params": {"zz": 1}})
        assert cli.main(["check", path]) == cli.EXIT_CONSTRAINT
        assert "params.zz" in capsys.readouterr().err

    def test_unknown_family_name(self):
        assert cli.main(["check", "XYZ"]) == cli.EXIT_CONSTRAINT

    def test_missing_file(self, tmp_path):
        assert cli.main(["check", str(tmp_path / "fehlt.json")]) == cli.EXIT_IO

    def test_malformed_json(self, tmp_path, capsys):
        path = _write(tmp_path / "kaputt.json", "{\"family\": ")
        assert cli.main(["check", path]) == cli.EXIT_CONSTRAINT
        err = capsys.readouterr().err
        assert "kaputt.json" in err
        assert "Zeile 1, Spalte 12" in err

    def test_json_must_be_object(self, tmp_path):
        path = _write(tmp_path / "liste.json", "[1, 2]")
        assert cli.main(["check", path]) == cli.EXIT_CONSTRAINT


class TestClassifyCommand:
    """Berichte als JSON und CSV."""

    def test_json_report(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = cli.main(["classify", "I", "--grid", "2", "--out", str(out), "--quiet", "--workers", "2"])
        assert code == cli.EXIT_OK
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["schema_version"] == cli.SCHEMA_VERSION
        assert report["verdicts"]["LCF"] == "satisfied"
        assert report["n_points"] == 16
        assert report["family"]["family"] == "I"
        assert f"Datei geschrieben: {out}" in capsys.readouterr().out

    def test_json_floats_have_fixed_precision(self):
        text = cli.json_text({"a": 0.1, "b": [1.0, 2, None, True], "c": {}})
        assert '"a": 0.10000000000000001' in text
        assert "1.0," in text
        assert json.loads(text) == {"a": 0.1, "b": [1.0, 2, None, True], "c": {}}
        assert text == cli.json_text(json.loads(text))

    def test_report_is_reproducible(self, tmp_path):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        for path in (first, second):
            assert cli.main(["classify", "III1", "--grid", "2", "--out", str(path), "--quiet"]) == cli.EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_csv_report(self, tmp_path):
        out = tmp_path / "nested" / "report.csv"
        assert cli.main(["classify", "VII", "--grid", "2", "--format", "csv", "--out", str(out), "--quiet"]) == 0
        frame = pd.read_csv(out)
        assert len(frame) == 16
        assert {"x1", "weyl_norm", "q_explicit", "r1", "pattern", "d1"} <= set(frame.columns)
        assert (frame["weyl_norm"] < 1e-7).all()

    def test_grid_from_spec_file(self, tmp_path):
        spec = _write(tmp_path / "i.json", {"family": "I", "grid": {"counts": [2, 1, 1, 2]}})
        out = tmp_path / "report.json"
        assert cli.main(["classify", spec, "--out", str(out), "--quiet"]) == cli.EXIT_OK
        assert json.loads(out.read_text(encoding="utf-8"))["n_points"] == 4

    def test_invalid_thread_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, "0")
        out = tmp_path / "report.json"
        assert cli.main(["classify", "I", "--grid", "2", "--out", str(out), "--quiet"]) == cli.EXIT_CONSTRAINT
        assert not out.exists()

    def test_thread_environment(self, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, "3")
        assert cli.resolve_workers(None) == 3
        assert cli.resolve_workers(1) == 1

    def test_consistency_error_exit_code(self, tmp_path, monkeypatch):
        def contradict(*args, **kwargs):
            raise InternalConsistencyError("LCF und Q erfuellt, P verletzt")

        monkeypatch.setattr(cli, "classify", contradict)
        out = tmp_path / "report.json"
        assert cli.main(["classify", "I", "--grid", "2", "--out", str(out), "--quiet"]) == cli.EXIT_CONSISTENCY


class TestEigenAndVerify:
    """Eigenwertvergleich und Gegenpruefungen."""

    def test_eigen_with_closed_form(self, capsys):
        assert cli.main(["eigen", "VII"]) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "[Eigenwerte] VII" in out
        assert "r4" in out
        assert "Hinweis" not in out

    def test_verify_fails_beyond_tolerance(self, monkeypatch, capsys):
        monkeypatch.setattr(cli, "VERIFY_FD_TOL", 0.0)
        assert cli.main(["verify", "I", "--samples", "1", "--quiet"]) == cli.EXIT_CONSISTENCY
        assert "FD" in capsys.readouterr().err

    def test_verify_checks_diagonal_formulas(self, monkeypatch, capsys):
        monkeypatch.setattr(cli, "VERIFY_DIAGONAL_TOL", -1.0)
        assert cli.main(["verify", "S1", "--samples", "1", "--quiet"]) == cli.EXIT_CONSISTENCY
        assert "Diagonal" in capsys.readouterr().err

    def test_eigen_columns_agree(self, capsys):
        assert cli.main(["eigen", "VII", "--point", "0.6", "1.9", "2.6", "3.9"]) == cli.EXIT_OK
        rows = [line.split() for line in capsys.readouterr().out.splitlines() if line.strip().startswith("r")]
        assert len(rows) == 4
        for row in rows:
            assert float(row[3]) < 1e-6

    def test_eigen_without_closed_form(self, capsys):
        assert cli.main(["eigen", "S1"]) == cli.EXIT_OK
        assert "keine geschlossene Formel" in capsys.readouterr().out

    def test_eigen_outside_chart(self):
        assert cli.main(["eigen", "VII", "--point", "1.3", "1.75", "2.75", "3.75"]) == cli.EXIT_CONSTRAINT

    def test_verify(self, capsys):
        assert cli.main(["verify", "I", "--samples", "2", "--quiet"]) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "[Verify] I: 2 Punkte" in out
        assert "Hinweis" not in out

    def test_missing_command(self):
        with pytest.raises(SystemExit):
            cli.main([])
