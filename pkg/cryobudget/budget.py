"""Per-stage heat budget of a full wiring inventory.

Sums passive conduction, dissipation of drive/pump signals and flux-bias
currents, and declared radiative loads, then compares every stage to its
cooling power.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .calibration import apply_loads
from .errors import ConfigError, DomainError
from .fridge import ROOM, ComponentKind, FridgeModel, LineKind, LineSpec, validate_line
from .heatflow import (
    PassiveProfile,
    ThermalizationAssumption,
    line_passive_profile,
    loom_passive_profile,
    shield_loads,
)
from .materials import TwistedPairSpec, cable_attenuation_db, is_cryogenic
from .noise import DEFAULT_FREQUENCY, cascade_photon_number, chain_for_line
from .signals import (
    FluxBiasSpec,
    FluxLoads,
    dbm_to_watt,
    flux_bias_average_load,
    flux_pulse_load,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# active loads
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActiveLoads:
    """Where the power fed into one line ends up, in W."""

    input_power: float
    stages: Mapping[str, float]
    room: float
    delivered: float
    components: Mapping[str, float] = field(default_factory=dict)

    @property
    def dissipated(self) -> float:
        return sum(self.stages.values()) + self.room


def active_loads_per_stage(
    line: LineSpec,
    input_power: float,
    frequency: float,
    fridge: FridgeModel,
    with_cable_loss: bool = True,
) -> ActiveLoads:
    """Walk a signal down ``line`` and book every dissipated watt on a stage.

    Attenuators dissipate on the stage they sit on; a cable run splits its
    loss evenly between the node above and the stage below.

    Args:
        line: Line to follow, top stage first.
        input_power: Power fed in at the top of the line, in W.
        frequency: Signal frequency in Hz.
        fridge: Plates the line is sunk to.
        with_cable_loss: Count cable attenuation as well as components.

    Returns:
        Power dissipated per stage and at room temperature, and the power delivered at the bottom.

    Raises:
        DomainError: ``input_power`` is negative.
    """
    if input_power < 0:
        raise DomainError(f"input power must be >= 0, got {input_power}")
    validate_line(line, fridge)
    loads = {name: 0.0 for name in fridge.stage_names}
    in_components = dict(loads)
    room = 0.0
    power = input_power
    upper = line.top
    for segment in line.segments:
        if with_cable_loss and segment.cable is not None:
            db = cable_attenuation_db(
                segment.cable, frequency, segment.run_length(fridge), is_cryogenic(fridge.temperature(upper))
            )
            out = power * 10 ** (-db / 10)
            half = (power - out) / 2
            if upper == ROOM:
                room += half
            else:
                loads[upper] += half
            loads[segment.stage] += half
            power = out
        for component in segment.components:
            db = component.attenuation_at(frequency)
            if db > 0:
                out = power * 10 ** (-db / 10)
                loads[segment.stage] += power - out
                in_components[segment.stage] += power - out
                power = out
        upper = segment.stage
    return ActiveLoads(
        input_power=input_power, stages=loads, room=room, delivered=power, components=in_components
    )


def back_propagate(
    line: LineSpec, delivered_power: float, frequency: float, fridge: FridgeModel, with_cable_loss: bool = True
) -> float:
    """Input power that delivers ``delivered_power`` at the bottom of ``line``."""
    transmission = active_loads_per_stage(line, 1.0, frequency, fridge, with_cable_loss).delivered
    return delivered_power / transmission


def cooling_power_mxc(fridge: FridgeModel, T: float) -> float:
    """Mixing chamber cooling power, quadratic in temperature."""
    if T <= 0:
        raise DomainError(f"temperature must be > 0, got {T}")
    return fridge.mxc_cooling_coefficient * fridge.still_flow * T ** 2


def calibrate_mxc_coefficient(cooling_power: float, still_flow: float, T: float) -> float:
    """Coefficient of P = k * flow * T^2 from one measured operating point."""
    if cooling_power <= 0 or still_flow <= 0 or T <= 0:
        raise DomainError("cooling power, flow and temperature must be > 0")
    return cooling_power / (still_flow * T ** 2)


# ---------------------------------------------------------------------------
# budget
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerPlan:
    """Average power wanted at the bottom of a line, and at which frequency."""

    delivered_dBm: Optional[float]
    frequency: float = DEFAULT_FREQUENCY
    with_cable_loss: bool = True


def _default_powers() -> Dict[LineKind, PowerPlan]:
    return {LineKind.DRIVE: PowerPlan(-78.0), LineKind.PUMP: PowerPlan(-65.0)}


@dataclass(frozen=True)
class SignalPlan:
    """Signal levels for every line kind.

    Read-in lines stay dark unless a power plan is given for them.
    ``still_correction`` books that fraction of the 4K attenuator
    dissipation on the Still as well (empirical).
    """

    powers: Mapping[LineKind, PowerPlan] = field(default_factory=_default_powers)
    flux: FluxBiasSpec = field(default_factory=FluxBiasSpec)
    include_flux_pulses: bool = True
    still_correction: float = 0.004
    correction_source: str = "4K"
    correction_target: str = "Still"
    noise_frequency: float = DEFAULT_FREQUENCY
    noise_with_cable_loss: bool = False

    def __post_init__(self):
        object.__setattr__(self, "powers", {LineKind(k): v for k, v in dict(self.powers).items()})
        if self.still_correction < 0:
            raise ConfigError("still correction must be >= 0")


class PassiveSource(str, Enum):
    PREDICTED = "predicted"
    MEASURED = "measured"


@dataclass(frozen=True)
class Loom:
    """A bundle of identical twisted pairs clamped at every stage."""

    pair: TwistedPairSpec
    count: int = 1


@dataclass(frozen=True)
class StageBudget:
    name: str
    cooling_power: float
    passive: float
    passive_low: float
    passive_high: float
    active: float
    radiative: float = 0.0
    empirical: float = 0.0

    @property
    def total(self) -> float:
        return self.passive + self.active + self.radiative + self.empirical

    @property
    def fraction(self) -> float:
        return self.total / self.cooling_power

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stage": self.name,
            "cooling_power_W": self.cooling_power,
            "passive_W": self.passive,
            "passive_low_W": self.passive_low,
            "passive_high_W": self.passive_high,
            "active_W": self.active,
            "radiative_W": self.radiative,
            "empirical_W": self.empirical,
            "total_W": self.total,
            "fraction_of_cooling": self.fraction,
        }


@dataclass(frozen=True)
class LineBudget:
    """Per-line contributions (one line, not multiplied by ``count``)."""

    name: str
    kind: LineKind
    count: int
    profile: PassiveProfile
    passive: Mapping[str, float]
    active: Mapping[str, float]
    input_power: float = 0.0


@dataclass(frozen=True)
class LineNoise:
    """Attenuation per stage of one line type and the photons it lets through."""

    name: str
    kind: LineKind
    attenuation: Mapping[str, float]
    total_dB: float
    n_mxc: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "line": self.name,
            "kind": self.kind.value,
            "attenuation_dB": dict(self.attenuation),
            "total_dB": self.total_dB,
            "n_mxc": self.n_mxc,
        }


@dataclass(frozen=True)
class BudgetReport:
    """Per-stage budget plus the per-line detail it was summed from.

    ``n_mxc`` is the photon number of the first drive line; ``noise`` has
    one entry per line type fed from room temperature.
    """

    stages: Tuple[StageBudget, ...]
    lines: Tuple[LineBudget, ...] = ()
    n_mxc: Optional[float] = None
    predicted_temperatures: Optional[Mapping[str, float]] = None
    qubits: Optional[int] = None
    noise: Tuple[LineNoise, ...] = ()

    def stage(self, name: str) -> StageBudget:
        for stage in self.stages:
            if stage.name == name:
                return stage
        raise KeyError(name)

    @property
    def max_qubit_estimate(self) -> Optional[int]:
        """Qubits supported before the tightest stage runs out of cooling power."""
        if not self.qubits:
            return None
        ratios = [s.cooling_power / s.total for s in self.stages if s.total > 0]
        if not ratios:
            return None
        return math.floor(self.qubits * min(ratios))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stages": [s.to_dict() for s in self.stages],
            "n_mxc": self.n_mxc,
            "predicted_temperatures_K": dict(self.predicted_temperatures) if self.predicted_temperatures else None,
            "qubits": self.qubits,
            "max_qubit_estimate": self.max_qubit_estimate,
            "line_noise": [n.to_dict() for n in self.noise],
        }


def _flux_loads(line: LineSpec, plan: SignalPlan) -> FluxLoads:
    spec = line.flux_bias or plan.flux
    loads = flux_bias_average_load(spec)
    if plan.include_flux_pulses:
        loads = loads + flux_pulse_load(spec)
    return loads


def _line_active(
    line: LineSpec, fridge: FridgeModel, plan: SignalPlan
) -> Tuple[Dict[str, float], float, Mapping[str, float]]:
    loads = {name: 0.0 for name in fridge.stage_names}
    if line.kind is LineKind.FLUX:
        flux = _flux_loads(line, plan)
        loads[fridge.mxc.name] += flux.mxc
        loads[fridge.cold_plate.name] += flux.cp
        return loads, 0.0, {}
    power_plan = plan.powers.get(line.kind)
    if power_plan is None or power_plan.delivered_dBm is None:
        return loads, 0.0, {}
    delivered = dbm_to_watt(power_plan.delivered_dBm)
    input_power = back_propagate(line, delivered, power_plan.frequency, fridge, power_plan.with_cable_loss)
    result = active_loads_per_stage(line, input_power, power_plan.frequency, fridge, power_plan.with_cable_loss)
    loads.update(result.stages)
    return loads, input_power, result.components


def line_noise(
    fridge: FridgeModel,
    inventory: Sequence[LineSpec],
    frequency: float = DEFAULT_FREQUENCY,
    with_cable_loss: bool = False,
) -> Tuple[LineNoise, ...]:
    """Attenuation plan and photon number at the bottom of every line fed from room temperature.

    Args:
        fridge: Plates the attenuators sit on.
        inventory: Line types; lines starting below room temperature are skipped.
        frequency: Frequency of the thermal photons, Hz.
        with_cable_loss: Treat cable runs as graded lossy segments.

    Returns:
        One entry per line type, in inventory order.
    """
    result = []
    for line in inventory:
        if line.top != ROOM:
            continue
        chain = chain_for_line(line, fridge, frequency, with_cable_loss)
        result.append(
            LineNoise(
                name=line.name,
                kind=line.kind,
                attenuation=line.attenuation_plan(),
                total_dB=chain.total_dB,
                n_mxc=cascade_photon_number(chain, frequency).n_mxc,
            )
        )
    return tuple(result)


def total_budget(
    fridge: FridgeModel,
    inventory: Sequence[LineSpec],
    signal_plan: Optional[SignalPlan] = None,
    *,
    assumption: Optional[ThermalizationAssumption] = None,
    passive_source: PassiveSource = PassiveSource.PREDICTED,
    looms: Sequence[Loom] = (),
    qubits: Optional[int] = None,
) -> BudgetReport:
    """Assemble the per-stage budget of ``inventory`` on ``fridge``.

    Every stage sums the passive, active, radiative and empirical loads of all
    lines times their counts, plus looms and counted shields.

    Args:
        fridge: Stages with their temperatures and cooling powers.
        inventory: Line types, each with a count.
        signal_plan: Power levels per line kind; the default plan when omitted.
        assumption: Thermalization used for predicted passive loads.
        passive_source: Predicted midpoints or measured per-line values.
        looms: Twisted-pair bundles clamped at every stage.
        qubits: Qubit count the inventory serves, for the maximum qubit estimate.

    Returns:
        Stage totals, per-line detail and photon numbers of room-temperature lines.

    Raises:
        ConfigError: a line names a stage the fridge does not have.
    """
    plan = signal_plan or SignalPlan()
    assumption = assumption or ThermalizationAssumption()
    passive_source = PassiveSource(passive_source)
    names = fridge.stage_names
    passive = dict.fromkeys(names, 0.0)
    low = dict.fromkeys(names, 0.0)
    high = dict.fromkeys(names, 0.0)
    active = dict.fromkeys(names, 0.0)
    correction = dict.fromkeys(names, 0.0)
    lines: List[LineBudget] = []
    apply_correction = plan.correction_source in names and plan.correction_target in names

    for line in inventory:
        unknown = set(line.measured_passive) - set(names)
        if unknown:
            raise ConfigError(f"line {line.name}: measured loads for unknown stages {sorted(unknown)}")
        profile = line_passive_profile(line, fridge, assumption)
        used = profile.midpoint()
        line_low, line_high = dict(profile.lower), dict(profile.upper)
        if passive_source is PassiveSource.MEASURED:
            for stage, value in line.measured_passive.items():
                used[stage] = line_low[stage] = line_high[stage] = value
        line_active, input_power, in_components = _line_active(line, fridge, plan)
        for name in names:
            passive[name] += line.count * used[name]
            low[name] += line.count * line_low[name]
            high[name] += line.count * line_high[name]
            active[name] += line.count * line_active[name]
        if apply_correction:
            burnt = in_components.get(plan.correction_source, 0.0)
            correction[plan.correction_target] += line.count * plan.still_correction * burnt
        lines.append(
            LineBudget(
                name=line.name,
                kind=line.kind,
                count=line.count,
                profile=profile,
                passive=used,
                active=line_active,
                input_power=input_power,
            )
        )

    for loom in looms:
        for name, value in loom_passive_profile(loom.pair, fridge, loom.count).items():
            passive[name] += value
            low[name] += value
            high[name] += value

    radiative = shield_loads(fridge, counted_only=True)
    stages = tuple(
        StageBudget(
            name=stage.name,
            cooling_power=stage.cooling_power,
            passive=passive[stage.name],
            passive_low=low[stage.name],
            passive_high=high[stage.name],
            active=active[stage.name],
            radiative=radiative[stage.name],
            empirical=correction[stage.name],
        )
        for stage in fridge.stages
    )

    noise = line_noise(fridge, inventory, plan.noise_frequency, plan.noise_with_cable_loss)
    n_mxc = next((n.n_mxc for n in noise if n.kind is LineKind.DRIVE), None)

    report = BudgetReport(stages=stages, lines=tuple(lines), n_mxc=n_mxc, qubits=qubits, noise=noise)
    temperatures = predict_temperatures(fridge, report)
    if temperatures is not None:
        report = replace(report, predicted_temperatures=temperatures)
    logger.debug("budget over %d line types: %s", len(lines), {s.name: round(s.fraction, 4) for s in stages})
    return report


def predict_temperatures(fridge: FridgeModel, report: BudgetReport) -> Optional[Dict[str, float]]:
    """Plate temperatures under the report's loads; ``None`` without response coefficients."""
    if fridge.response is None:
        return None
    loads = {s.name: s.total for s in report.stages}
    base = {stage.name: stage.temperature for stage in fridge.stages}
    base.update(fridge.response.base_temperatures)
    return apply_loads(fridge.response, loads, base)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BudgetInput:
    """Everything :func:`total_budget` needs, bundled for scenarios."""

    fridge: FridgeModel
    inventory: Tuple[LineSpec, ...]
    plan: SignalPlan = field(default_factory=SignalPlan)
    assumption: ThermalizationAssumption = field(default_factory=ThermalizationAssumption)
    passive_source: PassiveSource = PassiveSource.PREDICTED
    looms: Tuple[Loom, ...] = ()
    qubits: Optional[int] = None

    def run(self) -> BudgetReport:
        return total_budget(
            self.fridge,
            self.inventory,
            self.plan,
            assumption=self.assumption,
            passive_source=self.passive_source,
            looms=self.looms,
            qubits=self.qubits,
        )


@dataclass(frozen=True)
class ScenarioResult:
    report: BudgetReport
    diameter_scale: float
    budget_input: BudgetInput

    @property
    def max_qubit_estimate(self) -> Optional[int]:
        return self.report.max_qubit_estimate


def _scale_flux(spec: Optional[FluxBiasSpec], s: float, zeroed: bool) -> Optional[FluxBiasSpec]:
    if spec is None:
        return None
    return replace(
        spec,
        r_eff_mxc=spec.r_eff_mxc / s ** 2,
        r_eff_cp=spec.r_eff_cp / s ** 2,
        i_max=0.0 if zeroed else spec.i_max,
    )


def _scale_line(
    line: LineSpec, s: float, fridge: FridgeModel, plan: SignalPlan, keep_attenuation: bool, zeroed: bool
) -> LineSpec:
    power_plan = plan.powers.get(line.kind)
    frequency = power_plan.frequency if power_plan else plan.noise_frequency
    segments = []
    upper = line.top
    for segment in line.segments:
        cable = segment.cable.scaled(s) if segment.cable is not None else None
        components = segment.components
        if keep_attenuation and cable is not None and cable is not segment.cable:
            length = segment.run_length(fridge)
            cryogenic = is_cryogenic(fridge.temperature(upper))
            extra = cable_attenuation_db(cable, frequency, length, cryogenic) - cable_attenuation_db(
                segment.cable, frequency, length, cryogenic
            )
            components = _reduce_attenuation(components, extra)
        segments.append(replace(segment, cable=cable, components=components))
        upper = segment.stage
    return replace(
        line,
        segments=tuple(segments),
        measured_passive={k: v * s ** 2 for k, v in line.measured_passive.items()},
        flux_bias=_scale_flux(line.flux_bias, s, zeroed),
    )


def _reduce_attenuation(components, extra_db: float):
    result = []
    remaining = extra_db
    for component in components:
        if remaining > 0 and component.kind is ComponentKind.ATTENUATOR:
            new_db = max(component.attenuation_dB - remaining, 0.0)
            remaining -= component.attenuation_dB - new_db
            if new_db == 0:
                continue
            component = replace(component, attenuation_dB=new_db)
        result.append(component)
    return tuple(result)


def scale_scenario(
    base: BudgetInput,
    diameter_scale: float = 1.0,
    flux_current_zeroed: bool = False,
    cp_temperature_override: Optional[float] = None,
    mxc_temperature_override: Optional[float] = None,
    keep_line_attenuation: bool = False,
    cooling_overrides: Optional[Mapping[str, float]] = None,
) -> ScenarioResult:
    """Rebudget with thinner cables and/or warmer CP and MXC plates.

    Cable cross sections go as s^2, attenuation per length as 1/s, DC and
    effective flux resistances as 1/s^2 and measured passive loads as s^2.

    Raises:
        DomainError: ``diameter_scale`` is not positive.
        ConfigError: a plate override on a fridge without a cold plate.
    """
    if diameter_scale <= 0:
        raise DomainError(f"diameter scale must be > 0, got {diameter_scale}")
    fridge = base.fridge
    mxc = fridge.mxc.name
    if cp_temperature_override is not None:
        stage = fridge.cold_plate
        cp = stage.name
        fridge = fridge.with_stage(
            cp, temperature=cp_temperature_override, cooling_power=stage.cooling_power_at(cp_temperature_override)
        )
    if mxc_temperature_override is not None:
        fridge = fridge.with_stage(
            mxc,
            temperature=mxc_temperature_override,
            cooling_power=cooling_power_mxc(fridge, mxc_temperature_override),
        )
    for name, power in (cooling_overrides or {}).items():
        fridge = fridge.with_stage(name, cooling_power=power)

    s = diameter_scale
    plan = replace(base.plan, flux=_scale_flux(base.plan.flux, s, flux_current_zeroed))
    inventory = tuple(
        _scale_line(line, s, fridge, base.plan, keep_line_attenuation, flux_current_zeroed) for line in base.inventory
    )
    scenario = replace(base, fridge=fridge, inventory=inventory, plan=plan)
    logger.info("scenario: scale %.4g, flux zeroed %s, CP %s K, MXC %s K", s, flux_current_zeroed,
                cp_temperature_override, mxc_temperature_override)
    return ScenarioResult(report=scenario.run(), diameter_scale=s, budget_input=scenario)
