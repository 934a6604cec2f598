import json

import pytest

from cryobudget import config as cfg
from cryobudget.budget import BudgetReport, PassiveSource, ScenarioResult
from cryobudget.config import (
    ENV_FREQUENCY,
    ENV_OUT_DIR,
    attenuation_plan,
    attenuation_plans,
    available_presets,
    deep_merge,
    load_preset,
    load_project,
    resolve_presets,
    resolve_settings,
    validate_config,
)
from cryobudget.errors import ConfigError, TopologyError
from cryobudget.fridge import LineKind


def write_project(tmp_path, data, name="project.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path


def test_shipped_presets():
    assert {"basefridge", "asbuilt", "fig9", "scale047", "outlook1000"} <= set(available_presets())
    assert "attenuation_plans" not in available_presets()


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        load_preset("nope")


def test_named_plans():
    plans = attenuation_plans()
    assert plans["C3"] == {"50K": 0, "4K": 20, "Still": 0, "CP": 20, "MXC": 20}
    for name in ("C1", "C2", "C3", "C4", "outlook"):
        assert sum(plans[name].values()) == 60
    with pytest.raises(ConfigError):
        attenuation_plan("C9")


def test_deep_merge_replaces_lists():
    merged = deep_merge({"a": {"x": 1, "y": 2}, "l": [1, 2]}, {"a": {"y": 3}, "l": [9]})
    assert merged == {"a": {"x": 1, "y": 3}, "l": [9]}


class TestPresetResolution:
    def test_chain(self):
        merged = resolve_presets({"preset": "scale047"})
        assert merged["preset"] == "scale047"
        assert merged["fridge"]["stages"][0]["name"] == "50K"
        assert merged["scenario"]["keep_line_attenuation"] is True

    def test_cycle(self, monkeypatch, tmp_path):
        (tmp_path / "a.json").write_text('{"preset": "b"}', encoding="utf-8")
        (tmp_path / "b.json").write_text('{"preset": "a"}', encoding="utf-8")
        monkeypatch.setattr(cfg, "PRESET_DIR", tmp_path)
        with pytest.raises(ConfigError, match="preset cycle"):
            resolve_presets({"preset": "a"})

    def test_file_overrides_preset(self, tmp_path):
        path = write_project(tmp_path, {"schema_version": 1, "preset": "fig9", "qubits": 60})
        project = load_project(path)
        assert project.config.qubits == 60
        assert project.config.passive_source is PassiveSource.MEASURED


class TestValidation:
    def test_missing_schema_version(self, tmp_path):
        path = write_project(tmp_path, {"preset": "basefridge"})
        with pytest.raises(ConfigError, match="schema_version"):
            load_project(path)

    def test_wrong_schema_version(self):
        raw = dict(load_preset("basefridge"), schema_version=2)
        with pytest.raises(ConfigError):
            validate_config(raw)

    def test_unknown_key_has_line_number(self, tmp_path):
        data = {"schema_version": 1, "preset": "basefridge", "qubits": 5, "colour": "blue"}
        path = write_project(tmp_path, data)
        with pytest.raises(ConfigError) as exc:
            load_project(path)
        assert "colour" in exc.value.message
        assert exc.value.line == 5
        assert exc.value.path == str(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "schema_version": 1,\n  oops\n}', encoding="utf-8")
        with pytest.raises(ConfigError) as exc:
            load_project(path)
        assert exc.value.line == 3

    def test_negative_cooling_power(self):
        raw = load_preset("basefridge")
        raw["fridge"]["stages"][0]["cooling_power_W"] = -1
        with pytest.raises(ConfigError, match="cooling_power_W"):
            validate_config(raw)

    def test_line_with_gap(self, tmp_path):
        line = {
            "name": "drive",
            "kind": "drive",
            "cable": "UT085-SS-SS",
            "segments": [{"stage": "50K"}, {"stage": "Still"}, {"stage": "CP"}, {"stage": "MXC"}],
        }
        path = write_project(tmp_path, {"schema_version": 1, "preset": "basefridge", "lines": [line]})
        with pytest.raises(TopologyError):
            load_project(path)

    def test_unknown_cable(self, tmp_path):
        line = {
            "name": "drive",
            "kind": "drive",
            "cable": "UT000-XX",
            "segments": [{"stage": s} for s in ("50K", "4K", "Still", "CP", "MXC")],
        }
        path = write_project(tmp_path, {"schema_version": 1, "preset": "basefridge", "lines": [line]})
        with pytest.raises(ConfigError):
            load_project(path)

    def test_nothing_to_load(self):
        with pytest.raises(ConfigError):
            load_project()


class TestSettings:
    def test_option_beats_environment(self):
        settings = resolve_settings(frequency=5e9, environ={ENV_FREQUENCY: "7e9"})
        assert settings.frequency == 5e9

    def test_environment_beats_default(self, tmp_path):
        environ = {ENV_FREQUENCY: "7e9", ENV_OUT_DIR: str(tmp_path)}
        settings = resolve_settings(environ=environ, env_file=tmp_path / ".env")
        assert settings.frequency == 7e9
        assert settings.out_dir == tmp_path

    def test_env_file(self, tmp_path):
        env_file = tmp_path / ".env"
        env_file.write_text('# local\nCRYOBUDGET_FREQUENCY_HZ="5e9"\n', encoding="utf-8")
        assert resolve_settings(environ={}, env_file=env_file).frequency == 5e9
        assert resolve_settings(environ={ENV_FREQUENCY: "6e9"}, env_file=env_file).frequency == 6e9

    def test_defaults(self, tmp_path):
        settings = resolve_settings(environ={}, env_file=tmp_path / ".env")
        assert settings.frequency is None
        assert settings.frequency_or_default == 6e9
        assert str(settings.out_dir) == "."

    def test_bad_frequency(self, tmp_path):
        with pytest.raises(ConfigError):
            resolve_settings(environ={ENV_FREQUENCY: "six"}, env_file=tmp_path / ".env")
        with pytest.raises(ConfigError):
            resolve_settings(frequency=-1.0, environ={}, env_file=tmp_path / ".env")


class TestProjects:
    def test_as_built(self):
        project = load_project(preset="asbuilt")
        kinds = {line.kind for line in project.inventory}
        assert kinds == {LineKind.DRIVE, LineKind.FLUX, LineKind.READIN, LineKind.PUMP, LineKind.OUTPUT_NBTI}
        drive = next(line for line in project.inventory if line.kind is LineKind.DRIVE)
        assert drive.count == 25
        assert drive.attenuation_plan() == attenuation_plan("C3")
        assert isinstance(project.run_budget(), BudgetReport)

    def test_response_coefficients_reach_the_fridge(self):
        project = load_project(preset="fig9")
        assert project.fridge.response is not None
        assert project.fridge.response.cross["MXC"] == pytest.approx(6.667)

    def test_scenario_presets(self):
        assert isinstance(load_project(preset="scale047").run_budget(), ScenarioResult)

    def test_frequency_override(self):
        project = load_project(preset="asbuilt", frequency=5e9, environ={})
        assert project.plan.noise_frequency == 5e9
