"""End-to-end CLI behaviour: formats, exit codes, outputs, resume."""

import json

import pytest

from conftest import MARKETS
from vmauction.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, OUT_DIR_ENV, main

TWO_TYPE = str(MARKETS / "two_type_market.json")
THREE_TYPE = str(MARKETS / "three_type_market.json")
DESK_SCENARIO = str(MARKETS / "desk_scenario.json")


@pytest.fixture(autouse=True)
def _stdout_by_default(monkeypatch):
    """Tests control output placement explicitly; ignore the ambient env."""
    monkeypatch.delenv(OUT_DIR_ENV, raising=False)


class TestAuction:
    def test_json_to_stdout(self, capsys):
        assert main(["auction", TWO_TYPE]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["winners"] == ["b1", "b2", "b4"]
        assert doc["payments"]["b4"] == pytest.approx(295 / 6)
        assert doc["payments"]["b1"] == 8.0
        assert doc["payments"]["b2"] == 16.0
        assert doc["revenue"] == pytest.approx(295 / 6 + 24)
        assert doc["sold"] == [4, 2]

    def test_table_format(self, capsys):
        assert main(["auction", TWO_TYPE, "--format", "table"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "winners : b1, b2, b4" in out
        assert "denied_arc" in out and "denied_rpc" in out

    def test_csv_format(self, capsys):
        assert main(["auction", TWO_TYPE, "--format", "csv"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "bidder_id,density,decision,payment,price_basis"
        assert len(lines) == 6  # header + five bids
        assert lines[1].startswith("b4,")  # highest density examined first

    def test_exponent_override_changes_winners(self, capsys):
        assert main(["auction", TWO_TYPE, "--q", "0.5"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["winners"] == ["b1", "b2", "b3"]

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "result.json"
        assert main(["auction", TWO_TYPE, "--out", str(out)]) == EXIT_OK
        captured = capsys.readouterr()
        assert captured.out == ""
        assert f"wrote {out}" in captured.err
        assert json.loads(out.read_text())["winners"] == ["b1", "b2", "b4"]

    def test_default_out_dir_env(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path))
        assert main(["auction", TWO_TYPE]) == EXIT_OK
        assert capsys.readouterr().out == ""
        produced = tmp_path / "two_type_market.outcome.json"
        assert produced.exists()
        assert json.loads(produced.read_text())["winners"] == ["b1", "b2", "b4"]

    def test_verbose_adds_table_on_stderr(self, capsys):
        assert main(["auction", TWO_TYPE, "-v"]) == EXIT_OK
        assert "winners : b1, b2, b4" in capsys.readouterr().err

    def test_malformed_document_is_usage_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{ nope")
        out = tmp_path / "never.json"
        assert main(["auction", str(bad), "--out", str(out)]) == EXIT_USAGE
        assert "error:" in capsys.readouterr().err
        assert not out.exists()

    def test_missing_file_is_usage_error(self, capsys):
        assert main(["auction", "/does/not/exist.json"]) == EXIT_USAGE
        assert "error:" in capsys.readouterr().err


class TestVerify:
    def test_clean_market_passes(self, capsys):
        assert main(["verify", TWO_TYPE, "--seed", "5"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        summary = json.loads(lines[-1])
        assert summary["violations"] == 0
        assert set(summary["checks"]) == {
            "exactness",
            "participation",
            "monotonicity",
            "critical_value",
        }
        assert all(summary["checks"].values())
        assert summary["deviations"] == len(lines) - 1
        # every non-summary line is one evaluated deviation
        first = json.loads(lines[0])
        assert "deviated_utility" in first and "target" in first
        assert first["profitable"] is False

    def test_three_type_market_passes(self, capsys):
        assert main(["verify", THREE_TYPE, "--seed", "5"]) == EXIT_OK
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["violations"] == 0

    def test_injected_fault_is_reported(self, capsys):
        rc = main(["verify", TWO_TYPE, "--inject-fault", "underpay"])
        assert rc == EXIT_VIOLATION
        err = capsys.readouterr().err
        assert "violation:" in err
        assert "below the critical value" in err

    def test_empty_market_is_vacuously_clean(self, tmp_path, capsys):
        doc = {"ask": {"supplies": [2], "reserve_prices": [1.0]}, "bids": []}
        path = tmp_path / "empty.json"
        path.write_text(json.dumps(doc))
        assert main(["verify", str(path)]) == EXIT_OK
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["deviations"] == 0
        assert summary["violations"] == 0

    def test_verbose_check_lines(self, capsys):
        assert main(["verify", THREE_TYPE, "--seed", "1", "--samples", "5", "-v"]) == EXIT_OK
        err = capsys.readouterr().err
        assert "check exactness: ok" in err
        assert "deviations evaluated:" in err


class TestGrid:
    def test_stdout_csv(self, capsys):
        assert main(["grid", DESK_SCENARIO, "--jobs", "1", "--no-timings"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        # 3 supply percentages over 2 types = 9 combos, times 4 reserve levels
        assert len(lines) == 1 + 36
        assert lines[0].startswith("setting_id,k,supply_pct_1,supply_pct_2,")
        assert lines[1].split(",")[0] == "0"

    def test_rp_levels_override(self, capsys):
        rc = main(
            ["grid", DESK_SCENARIO, "--jobs", "1", "--no-timings", "--rp-levels", "0.0"]
        )
        assert rc == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1 + 9

    def test_cost_sweep_multiplies_rows(self, capsys):
        rc = main(
            [
                "grid",
                DESK_SCENARIO,
                "--jobs",
                "1",
                "--no-timings",
                "--rp-levels",
                "0.0",
                "--cost-run",
                "0.2",
                "--cost-idle",
                "0.05,0.1",
            ]
        )
        assert rc == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1 + 9 * 2

    def test_out_file_and_resume_merge(self, tmp_path, capsys):
        out = tmp_path / "grid.csv"
        assert main(["grid", DESK_SCENARIO, "--no-timings", "--out", str(out)]) == EXIT_OK
        full = out.read_bytes()
        assert b"wrote" not in full  # log lines go to stderr, not the file
        capsys.readouterr()

        # Keep the header and the first ten rows, then resume the rest.
        lines = full.split(b"\r\n")
        out.write_bytes(b"\r\n".join(lines[:11]) + b"\r\n")
        assert main(["grid", DESK_SCENARIO, "--no-timings", "--out", str(out), "--resume"]) == EXIT_OK
        err = capsys.readouterr().err
        assert "resuming: 10 rows already present" in err
        assert out.read_bytes() == full

    def test_resume_needs_out_file(self, capsys):
        assert main(["grid", DESK_SCENARIO, "--resume"]) == EXIT_USAGE
        assert "--resume needs a file" in capsys.readouterr().err

    def test_resume_rejects_foreign_header(self, tmp_path, capsys):
        out = tmp_path / "grid.csv"
        out.write_text("wrong,header\r\n1,2\r\n")
        rc = main(["grid", DESK_SCENARIO, "--no-timings", "--out", str(out), "--resume"])
        assert rc == EXIT_USAGE
        assert "does not match" in capsys.readouterr().err

    def test_plots_need_a_file(self, capsys):
        assert main(["grid", DESK_SCENARIO, "--plots"]) == EXIT_USAGE
        assert "--plots needs a CSV file" in capsys.readouterr().err

    def test_verbose_progress(self, tmp_path, capsys):
        out = tmp_path / "grid.csv"
        rc = main(
            [
                "grid",
                DESK_SCENARIO,
                "--jobs",
                "1",
                "--no-timings",
                "--rp-levels",
                "0.0",
                "--out",
                str(out),
                "-v",
            ]
        )
        assert rc == EXIT_OK
        err = capsys.readouterr().err
        assert "grid: 1/9 settings" in err
        assert "grid: 9/9 settings" in err
        assert "wrote 9 rows" in err


class TestOracle:
    def test_json_output(self, capsys):
        assert main(["oracle", TWO_TYPE]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["mkp"]["welfare"] == pytest.approx(111.0)
        assert doc["mkp"]["winners"] == ["b1", "b2", "b3", "b5"]
        assert doc["mkp_rp"]["welfare"] == pytest.approx(88.0)
        assert doc["mkp_rp"]["winners"] == ["b1", "b2", "b3"]
        assert doc["greedy"]["welfare"] == pytest.approx(80.0)
        assert doc["ratio_mkp"] == pytest.approx(80 / 111)
        assert doc["ratio_mkp_rp"] == pytest.approx(80 / 88)

    def test_enumeration_method_agrees(self, capsys):
        assert main(["oracle", TWO_TYPE, "--method", "enum"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["mkp"]["welfare"] == pytest.approx(111.0)
        assert doc["mkp"]["method"] == "enumeration"

    def test_table_output(self, capsys):
        assert main(["oracle", TWO_TYPE, "--format", "table"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[1].startswith("mkp ")
        assert "greedy" in out


class TestUsage:
    def test_missing_subcommand_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_bad_float_list_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["auction", TWO_TYPE, "--relativity", "1,zap"])
        assert exc.value.code == 2
