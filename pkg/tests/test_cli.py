import csv
import json

import pytest
from typer.testing import CliRunner

from cryobudget import __version__
from cryobudget.cli import app, parse_assignments

runner = CliRunner()


def invoke(tmp_path, *args):
    return runner.invoke(app, ["--out", str(tmp_path), *args])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def error_line(output):
    """The machine-readable error record printed on stderr."""
    for line in output.splitlines():
        if line.startswith('{"'):
            return json.loads(line)
    raise AssertionError(f"no JSON error line in:\n{output}")


def test_version():
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


class TestParseAssignments:
    def test_comma_and_repeat(self):
        assert parse_assignments(["CP=0.05,MXC=0.01", "Still=0.01"]) == {"CP": 0.05, "MXC": 0.01, "Still": 0.01}

    def test_empty(self):
        assert parse_assignments(None) == {}

    @pytest.mark.parametrize("value", ["CP", "=0.1", "CP=lots"])
    def test_malformed(self, value):
        import typer

        with pytest.raises(typer.BadParameter):
            parse_assignments([value])


class TestPassive:
    def test_preset(self, tmp_path):
        result = invoke(tmp_path, "passive", "--preset", "asbuilt")
        assert result.exit_code == 0, result.output
        rows = read_csv(tmp_path / "passive.csv")
        assert rows[0] == ["stage", "quantity", "value_W", "fraction", "bound_low", "bound_high"]
        quantities = {row[1] for row in rows[1:]}
        assert {"passive:drive", "passive:flux"} <= quantities

    def test_needs_input(self, tmp_path):
        result = invoke(tmp_path, "passive")
        assert result.exit_code == 1


class TestNoise:
    def test_named_plan(self, tmp_path):
        result = invoke(tmp_path, "noise", "-c", "C1")
        assert result.exit_code == 0, result.output
        rows = read_csv(tmp_path / "noise.csv")
        assert rows[0] == ["element", "n"]
        assert [r[0] for r in rows[1:]] == ["input", "50K", "4K", "Still", "CP", "MXC"]
        assert float(rows[-1][1]) == pytest.approx(0.0011566, rel=0.02)

    def test_custom_plan(self, tmp_path):
        result = invoke(tmp_path, "noise", "-c", "custom", "-a", "4K=20,CP=20,MXC=20")
        assert result.exit_code == 0, result.output
        assert float(read_csv(tmp_path / "noise.csv")[-1][1]) == pytest.approx(0.002277, rel=0.02)

    def test_custom_plan_needs_attenuation(self, tmp_path):
        assert invoke(tmp_path, "noise", "-c", "custom").exit_code == 1

    def test_unknown_plan(self, tmp_path):
        result = invoke(tmp_path, "noise", "-c", "C9")
        assert result.exit_code == 1
        assert error_line(result.output)["error"] == "ConfigError"

    def test_dephasing_bounds(self, tmp_path):
        result = invoke(tmp_path, "noise", "-c", "C3", "--dephasing")
        assert result.exit_code == 0, result.output
        rows = read_csv(tmp_path / "dephasing.csv")
        assert rows[0] == ["flux_attenuation_dB", "t2_star_s", "t2_echo_s"]
        assert [float(r[0]) for r in rows[1:]] == [0, 10, 20]
        t0, t10, t20 = (float(r[1]) for r in rows[1:])
        assert t0 / t10 == pytest.approx(0.109, rel=0.01)
        assert t0 == pytest.approx(46e-6, rel=0.1)
        assert float(rows[1][2]) == pytest.approx(2 * t0)
        assert t20 > t10 > t0

    def test_dephasing_at_the_sweet_spot(self, tmp_path):
        result = invoke(tmp_path, "noise", "-c", "C3", "--dephasing", "--detuning", "0", "--flux-attenuation", "20")
        assert result.exit_code == 0, result.output
        assert read_csv(tmp_path / "dephasing.csv")[1] == ["20", "", ""]

    def test_no_dephasing_file_by_default(self, tmp_path):
        assert invoke(tmp_path, "noise", "-c", "C3").exit_code == 0
        assert not (tmp_path / "dephasing.csv").exists()

    def test_line_from_project(self, tmp_path):
        result = invoke(tmp_path, "noise", "--preset", "asbuilt", "--with-cable-loss")
        assert result.exit_code == 0, result.output
        assert float(read_csv(tmp_path / "noise.csv")[-1][1]) < 0.002277


class TestBudget:
    def test_fifty_qubits(self, tmp_path):
        result = invoke(tmp_path, "budget", "--preset", "fig9")
        assert result.exit_code == 0, result.output
        document = json.loads((tmp_path / "budget.json").read_text(encoding="utf-8"))
        assert document["preset"] == "fig9"
        assert document["passive_source"] == "measured"
        stage_rows = read_csv(tmp_path / "budget_stages.csv")
        totals = {r[0]: float(r[3]) for r in stage_rows[1:] if r[1] == "total"}
        assert totals["CP"] == pytest.approx(0.33, abs=0.05)
        assert (tmp_path / "budget_lines.csv").exists()

    def test_breakdown_noise_and_fraction_tables(self, tmp_path):
        result = invoke(tmp_path, "budget", "--preset", "fig9")
        assert result.exit_code == 0, result.output
        stage_rows = read_csv(tmp_path / "budget_stages.csv")
        passive = {r[0]: float(r[2]) for r in stage_rows[1:] if r[1] == "passive"}
        active = {r[0]: float(r[2]) for r in stage_rows[1:] if r[1] == "active"}

        breakdown = read_csv(tmp_path / "budget_breakdown.csv")
        assert breakdown[0] == ["line", "kind", "count", "stage", "passive_W", "active_W"]
        assert {r[0] for r in breakdown[1:]} == {"drive", "flux", "readin", "pump", "output"}
        for stage in passive:
            rows = [r for r in breakdown[1:] if r[3] == stage]
            assert sum(float(r[4]) for r in rows) == pytest.approx(passive[stage], rel=1e-8)
            assert sum(float(r[5]) for r in rows) == pytest.approx(active[stage], rel=1e-8, abs=1e-30)

        noise = read_csv(tmp_path / "budget_noise.csv")
        assert noise[0] == ["line", "kind", "50K_dB", "4K_dB", "Still_dB", "CP_dB", "MXC_dB", "total_dB", "n_mxc"]
        by_line = {r[0]: r for r in noise[1:]}
        assert "output" not in by_line
        assert [float(v) for v in by_line["drive"][2:8]] == [0, 20, 0, 20, 20, 60]
        assert float(by_line["drive"][8]) == pytest.approx(0.002277, rel=0.02)
        assert float(by_line["pump"][8]) > float(by_line["drive"][8])

        fractions = read_csv(tmp_path / "budget_fractions.csv")
        assert fractions[0] == ["stage", "passive", "active", "other", "total"]
        for row in fractions[1:]:
            parts = [float(v) for v in row[1:]]
            assert sum(parts[:3]) == pytest.approx(parts[3], rel=1e-8)
        assert {r[0]: float(r[4]) for r in fractions[1:]}["CP"] == pytest.approx(0.33, abs=0.05)

    def test_scenario_records_scale(self, tmp_path):
        result = invoke(tmp_path, "budget", "--preset", "scale047")
        assert result.exit_code == 0, result.output
        document = json.loads((tmp_path / "budget.json").read_text(encoding="utf-8"))
        assert document["diameter_scale"] == pytest.approx(0.047 / 0.085)

    def test_output_is_reproducible(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert invoke(first, "budget", "--preset", "asbuilt").exit_code == 0
        assert invoke(second, "budget", "--preset", "asbuilt").exit_code == 0
        for name in (
            "budget.json",
            "budget_stages.csv",
            "budget_lines.csv",
            "budget_breakdown.csv",
            "budget_noise.csv",
            "budget_fractions.csv",
        ):
            assert (first / name).read_bytes() == (second / name).read_bytes()
            assert b"\r\n" not in (first / name).read_bytes()

    def test_bad_schema_version(self, tmp_path):
        config = tmp_path / "project.json"
        config.write_text(json.dumps({"schema_version": 2, "preset": "basefridge"}), encoding="utf-8")
        result = invoke(tmp_path, "budget", str(config))
        assert result.exit_code == 1
        record = error_line(result.output)
        assert record["exit_code"] == 1
        assert record["path"] == str(config)

    def test_missing_config_file(self, tmp_path):
        assert invoke(tmp_path, "budget", str(tmp_path / "nope.json")).exit_code != 0


class TestFit:
    def test_reference(self, tmp_path):
        cp = tmp_path / "cp.csv"
        rows = [(p, 0.082 + p / 3.75e-3, 0.006 + 6.667 * p) for p in (0, 1e-5, 2e-5, 3e-5)]
        cp.write_text(
            "# heated_stage: CP\napplied_power_W,T_CP,T_MXC\n" + "".join(f"{p!r},{a!r},{b!r}\n" for p, a, b in rows),
            encoding="utf-8",
        )
        result = invoke(tmp_path, "fit", str(cp))
        assert result.exit_code == 0, result.output
        coeffs = json.loads((tmp_path / "coefficients.json").read_text(encoding="utf-8"))
        assert coeffs["dP_dT_W_per_K"]["CP"] == pytest.approx(3.75e-3, rel=1e-6)
        assert coeffs["cross_K_per_W"]["MXC"] == pytest.approx(6.667, rel=1e-6)

    def test_resistance(self, tmp_path):
        points = tmp_path / "flux.csv"
        points.write_text(
            "current_A,load_W\n" + "".join(f"{i!r},{0.15 * i * i!r}\n" for i in (2e-4, 5e-4, 1e-3)), encoding="utf-8"
        )
        target = tmp_path / "r.json"
        result = invoke(tmp_path, "fit", "--kind", "resistance", "--output", str(target), str(points))
        assert result.exit_code == 0, result.output
        assert json.loads(target.read_text(encoding="utf-8"))["r_eff_ohm"] == pytest.approx(0.15)

    def test_bad_rows(self, tmp_path):
        points = tmp_path / "flux.csv"
        points.write_text("current_A,load_W\n1e-3,1.5e-7\n2e-3,hot\n", encoding="utf-8")
        result = invoke(tmp_path, "fit", "--kind", "resistance", str(points))
        assert result.exit_code == 1
        assert error_line(result.output)["line"] == 3

    def test_missing_heated_stage_column(self, tmp_path):
        sweep = tmp_path / "cp.csv"
        sweep.write_text("# heated_stage: CP\napplied_power_W,T_MXC\n0,0.006\n1e-05,0.0061\n", encoding="utf-8")
        result = invoke(tmp_path, "fit", str(sweep))
        assert result.exit_code == 1
        record = error_line(result.output)
        assert record["error"] == "ConfigError"
        assert record["line"] == 2
        assert "T_CP" in record["message"]

    def test_unknown_kind(self, tmp_path):
        points = tmp_path / "flux.csv"
        points.write_text("current_A,load_W\n", encoding="utf-8")
        assert invoke(tmp_path, "fit", "--kind", "magic", str(points)).exit_code == 1


class TestOptimize:
    def test_constrained(self, tmp_path):
        result = invoke(
            tmp_path,
            "optimize",
            "--preset",
            "asbuilt",
            "--max-fraction",
            "CP=0.05,MXC=0.01,Still=0.01",
            "--max-attenuators",
            "3",
        )
        assert result.exit_code == 0, result.output
        assert "matches plan C3" in result.output
        rows = read_csv(tmp_path / "optimize.csv")
        header, best = rows[0], rows[1]
        assert header[:6] == ["rank", "50K_dB", "4K_dB", "Still_dB", "CP_dB", "MXC_dB"]
        assert header[-1] == "attenuators"
        assert "feasible" not in header
        assert [float(v) for v in best[1:6]] == [0, 20, 0, 20, 20]

    def test_infeasible_is_not_an_error(self, tmp_path):
        result = invoke(tmp_path, "optimize", "--preset", "asbuilt", "--max-fraction", "MXC=1e-9")
        assert result.exit_code == 0
        assert "No placement" in result.output
        assert len(read_csv(tmp_path / "optimize.csv")) == 1

    def test_unknown_stage_limit(self, tmp_path):
        result = invoke(tmp_path, "optimize", "--preset", "asbuilt", "--max-fraction", "1K=0.1")
        assert result.exit_code == 1

    def test_malformed_limit(self, tmp_path):
        assert invoke(tmp_path, "optimize", "--preset", "asbuilt", "--max-fraction", "CP").exit_code == 1

    def test_no_drive_line(self, tmp_path):
        result = invoke(tmp_path, "optimize", "--preset", "basefridge")
        assert result.exit_code == 1
        assert "drive line" in error_line(result.output)["message"]


class TestSweep:
    def test_mxc(self, tmp_path):
        result = invoke(tmp_path, "sweep", "--preset", "asbuilt", "--stage", "MXC", "--to", "40", "--step", "10")
        assert result.exit_code == 0, result.output
        rows = read_csv(tmp_path / "sweep_MXC.csv")
        assert rows[0][:2] == ["attenuation_dB", "n_mxc"]
        assert [float(r[0]) for r in rows[1:]] == [0, 10, 20, 30, 40]
        assert float(rows[3][1]) == pytest.approx(0.002277, rel=0.02)

    def test_empty_range(self, tmp_path):
        result = invoke(tmp_path, "sweep", "--preset", "asbuilt", "--stage", "MXC", "--from", "10", "--to", "0")
        assert result.exit_code == 0
        assert len(read_csv(tmp_path / "sweep_MXC.csv")) == 1

    def test_unknown_stage(self, tmp_path):
        assert invoke(tmp_path, "sweep", "--preset", "asbuilt", "--stage", "1K").exit_code == 1
