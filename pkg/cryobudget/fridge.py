"""Fridge and wiring model types.

A :class:`FridgeModel` is an ordered list of stages below room temperature.
A :class:`LineSpec` is a chain of :class:`Segment` objects: each segment is a
cable run that lands on one stage and carries the components mounted there.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Dict, Mapping, Optional, Tuple

import numpy as np

from .errors import ConfigError, TopologyError, UnknownEntryError
from .materials import CableSpec
from .signals import FluxBiasSpec

if TYPE_CHECKING:
    from .calibration import ResponseCoefficients

ROOM = "RT"
ROOM_TEMPERATURE = 300.0


@dataclass(frozen=True)
class Stage:
    """One fridge plate."""

    name: str
    temperature: float
    cooling_power: float
    reference_temperature: Optional[float] = None
    cable_length_above: float = 0.2
    cooling_curve: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError(f"stage {self.name}: temperature must be > 0")
        if self.cooling_power <= 0:
            raise ConfigError(f"stage {self.name}: cooling power must be > 0")
        if self.cable_length_above <= 0:
            raise ConfigError(f"stage {self.name}: cable length must be > 0")
        curve = tuple(sorted((float(t), float(p)) for t, p in self.cooling_curve))
        object.__setattr__(self, "cooling_curve", curve)

    def cooling_power_at(self, temperature: float) -> float:
        """Cooling power at ``temperature``.

        Uses the stage cooling curve (clamped at its ends) when one is given,
        the rated cooling power otherwise.
        """
        if not self.cooling_curve:
            return self.cooling_power
        temps = [t for t, _ in self.cooling_curve]
        powers = [p for _, p in self.cooling_curve]
        return float(np.interp(temperature, temps, powers))


@dataclass(frozen=True)
class ShieldGeometry:
    """Concentric cylindrical shields."""

    radius_inner: float
    radius_outer: float
    height: float
    emissivity: float

    def __post_init__(self):
        if not 0 < self.emissivity <= 1:
            raise ConfigError(f"emissivity must be in (0, 1], got {self.emissivity}")
        if not 0 < self.radius_inner < self.radius_outer:
            raise ConfigError("shield radii must satisfy 0 < radius_inner < radius_outer")
        if self.height <= 0:
            raise ConfigError("shield height must be > 0")

    @property
    def area_inner(self) -> float:
        return 2 * math.pi * self.radius_inner * self.height

    @property
    def area_outer(self) -> float:
        return 2 * math.pi * self.radius_outer * self.height


@dataclass(frozen=True)
class ShieldSpec:
    """Radiative exchange between the shield of ``outer_stage`` and that of ``inner_stage``.

    ``counted`` is false when the rated cooling power of the inner stage
    already absorbs this load.
    """

    outer_stage: str
    inner_stage: str
    geometry: ShieldGeometry
    counted: bool = False


@dataclass(frozen=True)
class FridgeModel:
    """Stages from warm to cold plus the mixing chamber cooling model."""

    stages: Tuple[Stage, ...]
    room_temperature: float = ROOM_TEMPERATURE
    still_flow: float = 1.0e-3
    mxc_cooling_coefficient: float = 13e-6 / (0.69e-3 * 0.020 ** 2)
    shields: Tuple[ShieldSpec, ...] = ()
    response: Optional["ResponseCoefficients"] = None

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "shields", tuple(self.shields))
        if not stages:
            raise ConfigError("fridge has no stages")
        names = [s.name for s in stages]
        if len(set(names)) != len(names) or ROOM in names:
            raise ConfigError(f"stage names must be unique and not '{ROOM}': {names}")
        temps = [self.room_temperature] + [s.temperature for s in stages]
        if any(b >= a for a, b in zip(temps, temps[1:])):
            raise ConfigError("stage temperatures must decrease strictly from room temperature down")
        if self.still_flow <= 0:
            raise ConfigError("still flow must be > 0")
        if self.mxc_cooling_coefficient <= 0:
            raise ConfigError("mixing chamber cooling coefficient must be > 0")
        for shield in self.shields:
            for name in (shield.outer_stage, shield.inner_stage):
                if name != ROOM and name not in names:
                    raise UnknownEntryError(f"shield references unknown stage '{name}'")

    @property
    def stage_names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.stages)

    @property
    def mxc(self) -> Stage:
        return self.stages[-1]

    @property
    def cold_plate(self) -> Stage:
        """Stage just above the mixing chamber."""
        if len(self.stages) < 2:
            raise ConfigError(f"fridge needs a stage above '{self.mxc.name}' for cold plate loads")
        return self.stages[-2]

    def stage(self, name: str) -> Stage:
        for stage in self.stages:
            if stage.name == name:
                return stage
        raise UnknownEntryError(f"unknown stage '{name}' (known: {', '.join(self.stage_names)})")

    def index(self, name: str) -> int:
        """Position of a node: 0 for room temperature, 1.. for the stages."""
        if name == ROOM:
            return 0
        return self.stage_names.index(self.stage(name).name) + 1

    def temperature(self, name: str) -> float:
        if name == ROOM:
            return self.room_temperature
        return self.stage(name).temperature

    def node_names(self) -> Tuple[str, ...]:
        return (ROOM,) + self.stage_names

    def with_stage(self, name: str, **changes) -> "FridgeModel":
        stages = tuple(replace(s, **changes) if s.name == name else s for s in self.stages)
        self.stage(name)
        return replace(self, stages=stages)


class Thermalization(str, Enum):
    FULL = "full"
    NONE = "none"


class ComponentKind(str, Enum):
    ATTENUATOR = "attenuator"
    COUPLER = "coupler"
    AMPLIFIER = "amplifier"
    LOWPASS = "lowpass"
    FILTER = "filter"
    ECCOSORB = "eccosorb"
    CIRCULATOR = "circulator"
    ISOLATOR = "isolator"


# Components that clamp the center conductor to the plate.
CENTER_SINKING_KINDS = frozenset(
    {
        ComponentKind.ATTENUATOR,
        ComponentKind.COUPLER,
        ComponentKind.AMPLIFIER,
        ComponentKind.LOWPASS,
        ComponentKind.FILTER,
        ComponentKind.ECCOSORB,
    }
)


@dataclass(frozen=True)
class Component:
    """A discrete element mounted on a stage.

    For an eccosorb filter ``attenuation_dB`` is the value at
    ``reference_frequency_Hz`` and grows linearly with frequency.
    """

    kind: ComponentKind
    attenuation_dB: float = 0.0
    temperature_override: Optional[float] = None
    thermalizes_center: Optional[bool] = None
    reference_frequency_Hz: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ComponentKind(self.kind))
        if self.attenuation_dB < 0:
            raise ConfigError(f"{self.kind.value}: attenuation must be >= 0 dB")
        if self.temperature_override is not None and self.temperature_override < 0:
            raise ConfigError(f"{self.kind.value}: temperature override must be >= 0 K")

    @property
    def sinks_center(self) -> bool:
        if self.thermalizes_center is not None:
            return self.thermalizes_center
        return self.kind in CENTER_SINKING_KINDS

    @property
    def dissipative(self) -> bool:
        return self.kind not in (ComponentKind.AMPLIFIER, ComponentKind.CIRCULATOR, ComponentKind.ISOLATOR)

    def attenuation_at(self, frequency: float) -> float:
        if not self.dissipative:
            return 0.0
        if self.kind is ComponentKind.ECCOSORB and self.reference_frequency_Hz:
            return self.attenuation_dB * frequency / self.reference_frequency_Hz
        return self.attenuation_dB


@dataclass(frozen=True)
class Segment:
    """Cable run from the node above down to ``stage``, plus what sits on ``stage``.

    ``length`` defaults to the stage's ``cable_length_above``.
    """

    stage: str
    cable: Optional[CableSpec] = None
    length: Optional[float] = None
    components: Tuple[Component, ...] = ()
    center_thermalization: Optional[Thermalization] = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.center_thermalization is not None:
            object.__setattr__(self, "center_thermalization", Thermalization(self.center_thermalization))
        if self.length is not None and self.length <= 0:
            raise ConfigError(f"segment to {self.stage}: length must be > 0")

    def run_length(self, fridge: FridgeModel) -> float:
        if self.length is not None:
            return self.length
        return fridge.stage(self.stage).cable_length_above

    @property
    def attenuation_dB(self) -> float:
        return sum(c.attenuation_dB for c in self.components if c.kind is ComponentKind.ATTENUATOR)


class LineKind(str, Enum):
    DRIVE = "drive"
    FLUX = "flux"
    OUTPUT_NBTI = "output_nbti"
    OUTPUT_SS = "output_ss"
    PUMP = "pump"
    READIN = "readin"


@dataclass(frozen=True)
class LineSpec:
    """A line type: the segment chain and how many identical lines use it."""

    name: str
    kind: LineKind
    segments: Tuple[Segment, ...]
    count: int = 1
    top: str = ROOM
    measured_passive: Mapping[str, float] = field(default_factory=dict)
    flux_bias: Optional[FluxBiasSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LineKind(self.kind))
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "measured_passive", dict(self.measured_passive))
        if self.count < 0:
            raise ConfigError(f"line {self.name}: count must be >= 0")

    def segment_at(self, stage: str) -> Optional[Segment]:
        for segment in self.segments:
            if segment.stage == stage:
                return segment
        return None

    def attenuation_plan(self) -> Dict[str, float]:
        return {s.stage: s.attenuation_dB for s in self.segments}


def validate_line(line: LineSpec, fridge: FridgeModel) -> None:
    """Check that the segments run contiguously from ``line.top`` down to the mixing chamber.

    Raises:
        TopologyError: the chain skips a stage, repeats one, or stops short.
    """
    start = fridge.index(line.top)
    expected = fridge.node_names()[start + 1:]
    got = [s.stage for s in line.segments]
    for s in got:
        if s != ROOM:
            fridge.stage(s)
    if got != list(expected)[: len(got)]:
        raise TopologyError(
            f"line {line.name}: segments {got} are not contiguous below {line.top} ({list(expected)})"
        )
    if len(got) < len(expected):
        end = got[-1] if got else line.top
        raise TopologyError(f"line {line.name}: dangling line ends at {end}, not {expected[-1]}")
    for segment in line.segments:
        if segment.cable is None:
            raise TopologyError(f"line {line.name}: segment to {segment.stage} has no cable")
        for component in segment.components:
            if component.temperature_override is not None and component.temperature_override > fridge.room_temperature:
                raise ConfigError(f"line {line.name}: component above room temperature at {segment.stage}")


def with_attenuation(line: LineSpec, plan: Mapping[str, float]) -> LineSpec:
    """Copy of ``line`` whose attenuators match ``plan`` (stage name -> dB).

    Stages missing from ``plan`` keep their attenuators. A 0 dB entry removes
    the attenuator from that stage.
    """
    segments = []
    for segment in line.segments:
        if segment.stage not in plan:
            segments.append(segment)
            continue
        others = tuple(c for c in segment.components if c.kind is not ComponentKind.ATTENUATOR)
        existing = [c for c in segment.components if c.kind is ComponentKind.ATTENUATOR]
        db = float(plan[segment.stage])
        if db > 0:
            template = existing[0] if existing else Component(ComponentKind.ATTENUATOR)
            others = (replace(template, attenuation_dB=db),) + others
        segments.append(replace(segment, components=others))
    unknown = set(plan) - {s.stage for s in line.segments}
    if unknown:
        raise UnknownEntryError(f"line {line.name}: attenuation plan names stages without segments: {sorted(unknown)}")
    return replace(line, segments=tuple(segments))
