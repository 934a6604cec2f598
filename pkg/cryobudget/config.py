"""Project configuration: JSON files, shipped presets and environment overrides.

Precedence, highest first: command-line option, ``CRYOBUDGET_*`` environment
variable (or ``.env`` file), project file, preset, built-in default.
"""

import json
import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .budget import (
    BudgetInput,
    BudgetReport,
    Loom,
    PassiveSource,
    PowerPlan,
    ScenarioResult,
    SignalPlan,
    scale_scenario,
)
from .calibration import ResponseCoefficients
from .errors import ConfigError
from .fridge import (
    ROOM,
    Component,
    ComponentKind,
    FridgeModel,
    LineKind,
    LineSpec,
    Segment,
    ShieldGeometry,
    ShieldSpec,
    Stage,
    Thermalization,
    validate_line,
    with_attenuation,
)
from .heatflow import DielectricPolicy, ThermalizationAssumption
from .materials import Catalog, load_catalog
from .noise import DEFAULT_FREQUENCY
from .signals import FluxBiasSpec

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PRESET_DIR = Path(__file__).parent / "presets"
ATTENUATION_PLANS = PRESET_DIR / "attenuation_plans.json"

ENV_CATALOG = "CRYOBUDGET_CATALOG"
ENV_FREQUENCY = "CRYOBUDGET_FREQUENCY_HZ"
ENV_OUT_DIR = "CRYOBUDGET_OUT_DIR"


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StageModel(_Model):
    name: str
    temperature_K: float = Field(gt=0)
    cooling_power_W: float = Field(gt=0)
    reference_temperature_K: Optional[float] = Field(default=None, gt=0)
    cable_length_above_m: float = Field(gt=0)
    cooling_curve: List[Tuple[float, float]] = []


class ShieldModel(_Model):
    outer_stage: str
    inner_stage: str
    radius_inner_m: float = Field(gt=0)
    radius_outer_m: float = Field(gt=0)
    height_m: float = Field(gt=0)
    emissivity: float = Field(gt=0, le=1)
    counted: bool = False


class ResponseModel(_Model):
    stages: List[str]
    dP_dT_W_per_K: Dict[str, float]
    cross_K_per_W: Dict[str, float] = {}
    base_temperatures_K: Dict[str, float] = {}
    fit_window_rows: Dict[str, int] = {}
    residual_rms_K: Dict[str, float] = {}
    warnings: List[str] = []


class FridgeConfig(_Model):
    room_temperature_K: float = Field(default=300.0, gt=0)
    still_flow_mol_per_s: float = Field(default=1.0e-3, gt=0)
    mxc_cooling_coefficient_W_s_per_mol_K2: float = Field(default=13e-6 / (0.69e-3 * 0.020 ** 2), gt=0)
    stages: List[StageModel]
    shields: List[ShieldModel] = []
    response: Optional[ResponseModel] = None


class ComponentModel(_Model):
    kind: ComponentKind
    attenuation_dB: float = Field(default=0.0, ge=0)
    temperature_K: Optional[float] = Field(default=None, ge=0)
    thermalizes_center: Optional[bool] = None
    reference_frequency_Hz: Optional[float] = Field(default=None, gt=0)


class SegmentModel(_Model):
    stage: str
    cable: Optional[str] = None
    length_m: Optional[float] = Field(default=None, gt=0)
    components: List[ComponentModel] = []
    center_thermalization: Optional[Thermalization] = None


class FluxBiasModel(_Model):
    r_eff_mxc_ohm: float = Field(default=0.15, ge=0)
    r_eff_cp_ohm: float = Field(default=0.42, ge=0)
    i_max_A: float = Field(default=1e-3, ge=0)
    pulse_amplitude_A: float = Field(default=0.2e-3, ge=0)
    pulse_duty: float = Field(default=0.33, ge=0, le=1)

    def build(self) -> FluxBiasSpec:
        return FluxBiasSpec(
            r_eff_mxc=self.r_eff_mxc_ohm,
            r_eff_cp=self.r_eff_cp_ohm,
            i_max=self.i_max_A,
            pulse_amplitude=self.pulse_amplitude_A,
            pulse_duty=self.pulse_duty,
        )


class LineModel(_Model):
    name: str
    kind: LineKind
    count: int = Field(default=1, ge=0)
    top: str = ROOM
    cable: Optional[str] = None
    segments: List[SegmentModel]
    attenuation_plan: Optional[Union[str, Dict[str, float]]] = None
    measured_passive_W: Dict[str, float] = {}
    flux_bias: Optional[FluxBiasModel] = None


class LoomModel(_Model):
    pair: str
    count: int = Field(default=1, ge=0)


class PowerPlanModel(_Model):
    delivered_dBm: Optional[float] = None
    frequency_Hz: float = Field(default=DEFAULT_FREQUENCY, gt=0)
    with_cable_loss: bool = True


class SignalPlanModel(_Model):
    powers: Dict[LineKind, PowerPlanModel] = {}
    flux: FluxBiasModel = FluxBiasModel()
    include_flux_pulses: bool = True
    still_correction: float = Field(default=0.004, ge=0)
    noise_frequency_Hz: float = Field(default=DEFAULT_FREQUENCY, gt=0)
    noise_with_cable_loss: bool = False


class ThermalizationModel(_Model):
    dielectric_policy: DielectricPolicy = DielectricPolicy.WITH_OUTER
    center: Dict[str, Thermalization] = {}


class ScenarioModel(_Model):
    diameter_scale: float = Field(default=1.0, gt=0)
    flux_current_zeroed: bool = False
    cp_temperature_K: Optional[float] = Field(default=None, gt=0)
    mxc_temperature_K: Optional[float] = Field(default=None, gt=0)
    keep_line_attenuation: bool = False
    cooling_power_W: Dict[str, float] = {}


class ProjectConfig(_Model):
    schema_version: Literal[1]
    preset: Optional[str] = None
    description: str = ""
    catalog: Optional[str] = None
    qubits: Optional[int] = Field(default=None, ge=0)
    fridge: FridgeConfig
    lines: List[LineModel] = []
    looms: List[LoomModel] = []
    signal_plan: SignalPlanModel = SignalPlanModel()
    thermalization: ThermalizationModel = ThermalizationModel()
    passive_source: PassiveSource = PassiveSource.PREDICTED
    scenario: Optional[ScenarioModel] = None


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def available_presets() -> List[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.json") if p.stem != ATTENUATION_PLANS.stem)


def _read_json(path: Path) -> Tuple[Dict[str, Any], str]:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", path=str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", path=str(path), line=1)
    return data, text


def load_preset(name: str) -> Dict[str, Any]:
    path = PRESET_DIR / f"{name}.json"
    if not path.exists() or name == ATTENUATION_PLANS.stem:
        raise ConfigError(f"unknown preset '{name}' (available: {', '.join(available_presets())})")
    data, _ = _read_json(path)
    return data


def attenuation_plans() -> Dict[str, Dict[str, float]]:
    data, _ = _read_json(ATTENUATION_PLANS)
    return {name: {k: float(v) for k, v in plan.items()} for name, plan in data["plans"].items()}


def attenuation_plan(name: str) -> Dict[str, float]:
    plans = attenuation_plans()
    if name not in plans:
        raise ConfigError(f"unknown attenuation plan '{name}' (available: {', '.join(sorted(plans))})")
    return plans[name]


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; lists and scalars in ``override`` replace the base value."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def resolve_presets(raw: Mapping[str, Any], _seen: Sequence[str] = ()) -> Dict[str, Any]:
    name = raw.get("preset")
    if not name:
        return dict(raw)
    if name in _seen:
        raise ConfigError(f"preset cycle: {' -> '.join(list(_seen) + [name])}")
    base = resolve_presets(load_preset(name), tuple(_seen) + (name,))
    merged = deep_merge(base, {k: v for k, v in raw.items() if k != "preset"})
    merged["preset"] = name
    return merged


def _locate(text: Optional[str], loc: Sequence[Union[str, int]]) -> Optional[int]:
    """Best-effort line number of the key at ``loc`` in the JSON source."""
    if not text:
        return None
    position = 0
    found = None
    for part in loc:
        if isinstance(part, int):
            continue
        match = re.compile(r'"%s"\s*:' % re.escape(str(part))).search(text, position)
        if match is None:
            break
        position = match.end()
        found = text.count("\n", 0, match.start()) + 1
    return found


def validate_config(raw: Mapping[str, Any], source: Optional[str] = None, text: Optional[str] = None) -> ProjectConfig:
    """Validate a merged project dict.

    Raises:
        ConfigError: with the dotted path of the first offending key and,
            when it can be found, its line in ``text``.
    """
    if "schema_version" not in raw:
        raise ConfigError("missing required key 'schema_version'", path=source, line=1 if text else None)
    try:
        return ProjectConfig.model_validate(dict(raw))
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = first.get("loc", ())
        dotted = ".".join(str(p) for p in loc) or "<root>"
        raise ConfigError(f"{dotted}: {first.get('msg')}", path=source, line=_locate(text, loc)) from None


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------


def read_env_file(env_path: Optional[Path] = None) -> Dict[str, str]:
    """KEY=VALUE pairs from a ``.env`` file; missing file gives an empty dict."""
    env_path = env_path or Path(".env")
    values: Dict[str, str] = {}
    if not env_path.exists():
        return values
    for line in env_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        values[key] = value
    return values


@dataclass(frozen=True)
class RuntimeSettings:
    catalog_path: Optional[Path]
    frequency: Optional[float]
    out_dir: Path

    @property
    def frequency_or_default(self) -> float:
        return self.frequency if self.frequency is not None else DEFAULT_FREQUENCY


def resolve_settings(
    catalog: Optional[str] = None,
    frequency: Optional[float] = None,
    out_dir: Optional[str] = None,
    project_catalog: Optional[str] = None,
    environ: Optional[Mapping[str, str]] = None,
    env_file: Optional[Path] = None,
) -> RuntimeSettings:
    env = dict(read_env_file(env_file))
    env.update(os.environ if environ is None else environ)

    catalog_value = catalog or env.get(ENV_CATALOG) or project_catalog
    if frequency is None and env.get(ENV_FREQUENCY):
        try:
            frequency = float(env[ENV_FREQUENCY])
        except ValueError:
            raise ConfigError(f"{ENV_FREQUENCY} must be a number, got '{env[ENV_FREQUENCY]}'") from None
    if frequency is not None and frequency <= 0:
        raise ConfigError(f"frequency must be > 0, got {frequency}")
    out_value = out_dir or env.get(ENV_OUT_DIR) or "."
    return RuntimeSettings(
        catalog_path=Path(catalog_value) if catalog_value else None,
        frequency=frequency,
        out_dir=Path(out_value),
    )


# ---------------------------------------------------------------------------
# building domain objects
# ---------------------------------------------------------------------------


def build_fridge(model: FridgeConfig) -> FridgeModel:
    stages = tuple(
        Stage(
            name=s.name,
            temperature=s.temperature_K,
            cooling_power=s.cooling_power_W,
            reference_temperature=s.reference_temperature_K,
            cable_length_above=s.cable_length_above_m,
            cooling_curve=tuple(s.cooling_curve),
        )
        for s in model.stages
    )
    shields = tuple(
        ShieldSpec(
            outer_stage=sh.outer_stage,
            inner_stage=sh.inner_stage,
            geometry=ShieldGeometry(sh.radius_inner_m, sh.radius_outer_m, sh.height_m, sh.emissivity),
            counted=sh.counted,
        )
        for sh in model.shields
    )
    response = ResponseCoefficients.from_dict(model.response.model_dump()) if model.response else None
    return FridgeModel(
        stages=stages,
        room_temperature=model.room_temperature_K,
        still_flow=model.still_flow_mol_per_s,
        mxc_cooling_coefficient=model.mxc_cooling_coefficient_W_s_per_mol_K2,
        shields=shields,
        response=response,
    )


def build_line(model: LineModel, catalog: Catalog, fridge: FridgeModel) -> LineSpec:
    segments = []
    for s in model.segments:
        cable_name = s.cable or model.cable
        if cable_name is None:
            raise ConfigError(f"line {model.name}: no cable for the segment to {s.stage}")
        components = tuple(
            Component(
                kind=c.kind,
                attenuation_dB=c.attenuation_dB,
                temperature_override=c.temperature_K,
                thermalizes_center=c.thermalizes_center,
                reference_frequency_Hz=c.reference_frequency_Hz,
            )
            for c in s.components
        )
        segments.append(
            Segment(
                stage=s.stage,
                cable=catalog.cable(cable_name),
                length=s.length_m,
                components=components,
                center_thermalization=s.center_thermalization,
            )
        )
    line = LineSpec(
        name=model.name,
        kind=model.kind,
        segments=tuple(segments),
        count=model.count,
        top=model.top,
        measured_passive=dict(model.measured_passive_W),
        flux_bias=model.flux_bias.build() if model.flux_bias else None,
    )
    if model.attenuation_plan is not None:
        plan = model.attenuation_plan
        if isinstance(plan, str):
            plan = attenuation_plan(plan)
        line = with_attenuation(line, plan)
    validate_line(line, fridge)
    return line


def build_signal_plan(model: SignalPlanModel, frequency_override: Optional[float] = None) -> SignalPlan:
    powers = dict(SignalPlan().powers)
    for kind, p in model.powers.items():
        powers[LineKind(kind)] = PowerPlan(p.delivered_dBm, p.frequency_Hz, p.with_cable_loss)
    return SignalPlan(
        powers=powers,
        flux=model.flux.build(),
        include_flux_pulses=model.include_flux_pulses,
        still_correction=model.still_correction,
        noise_frequency=frequency_override or model.noise_frequency_Hz,
        noise_with_cable_loss=model.noise_with_cable_loss,
    )


@dataclass(frozen=True)
class Project:
    """A validated project with every name resolved against the catalog."""

    config: ProjectConfig
    catalog: Catalog
    fridge: FridgeModel
    inventory: Tuple[LineSpec, ...]
    plan: SignalPlan
    assumption: ThermalizationAssumption
    looms: Tuple[Loom, ...] = ()
    source: Optional[str] = None

    def budget_input(self) -> BudgetInput:
        return BudgetInput(
            fridge=self.fridge,
            inventory=self.inventory,
            plan=self.plan,
            assumption=self.assumption,
            passive_source=self.config.passive_source,
            looms=self.looms,
            qubits=self.config.qubits,
        )

    def run_budget(self) -> Union[BudgetReport, ScenarioResult]:
        """Plain budget, or the configured scenario when there is one."""
        scenario = self.config.scenario
        if scenario is None:
            return self.budget_input().run()
        return scale_scenario(
            self.budget_input(),
            diameter_scale=scenario.diameter_scale,
            flux_current_zeroed=scenario.flux_current_zeroed,
            cp_temperature_override=scenario.cp_temperature_K,
            mxc_temperature_override=scenario.mxc_temperature_K,
            keep_line_attenuation=scenario.keep_line_attenuation,
            cooling_overrides=scenario.cooling_power_W,
        )


def load_project(
    path: Optional[Union[str, Path]] = None,
    preset: Optional[str] = None,
    catalog_path: Optional[Union[str, Path]] = None,
    frequency: Optional[float] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> Project:
    """Read, merge, validate and build a project.

    Either ``path`` or ``preset`` (or both) must be given; a preset named on
    the command line replaces the file's own ``preset`` key.
    """
    if path is None and preset is None:
        raise ConfigError("give a config file or a preset")
    text = None
    source = None
    raw: Dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if path is not None:
        raw, text = _read_json(Path(path))
        source = str(path)
        # presets carry their own version; the file must still declare one
        if "schema_version" not in raw:
            raise ConfigError("missing required key 'schema_version'", path=source, line=1)
    if preset is not None:
        raw = dict(raw)
        raw["preset"] = preset
    merged = resolve_presets(raw)
    config = validate_config(merged, source, text)

    settings = resolve_settings(
        catalog=str(catalog_path) if catalog_path else None,
        frequency=frequency,
        project_catalog=config.catalog,
        environ=environ,
    )
    catalog = load_catalog(settings.catalog_path)
    fridge = build_fridge(config.fridge)
    inventory = tuple(build_line(line, catalog, fridge) for line in config.lines)
    looms = tuple(Loom(catalog.twisted_pair(l.pair), l.count) for l in config.looms)
    assumption = ThermalizationAssumption(
        dielectric_policy=config.thermalization.dielectric_policy, center=dict(config.thermalization.center)
    )
    for stage in assumption.center:
        fridge.stage(stage)
    plan = build_signal_plan(config.signal_plan, settings.frequency)
    logger.debug("project %s: %d line types, preset %s", source or preset, len(inventory), config.preset)
    return Project(
        config=config,
        catalog=catalog,
        fridge=fridge,
        inventory=inventory,
        plan=plan,
        assumption=assumption,
        looms=looms,
        source=source,
    )
