"""Passive heat flow: conduction along coax and twisted pairs, radiation between shields.

Stage temperatures are fixed boundary conditions. A cable element deposits
its heat on the next stage down where it is thermalized; stages where the
center conductor may or may not be sunk produce lower/upper bounds.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from scipy import constants, optimize

from .errors import DomainError, OutOfRangeError
from .fridge import (
    FridgeModel,
    LineSpec,
    ShieldGeometry,
    Thermalization,
    validate_line,
)
from .materials import (
    ALL_ELEMENTS,
    CableElement,
    CableSpec,
    Material,
    TwistedPairSpec,
    conductivity_integral,
)

logger = logging.getLogger(__name__)

__all__ = [
    "DielectricPolicy",
    "PassiveProfile",
    "ShieldGeometry",
    "ThermalizationAssumption",
    "conductive_load",
    "line_passive_profile",
    "loom_passive_profile",
    "radiative_load",
    "shield_loads",
    "twisted_pair_load",
]


class DielectricPolicy(str, Enum):
    """Which conductor the dielectric is heat-sunk with."""

    WITH_OUTER = "with_outer"
    WITH_CENTER = "with_center"


@dataclass(frozen=True)
class ThermalizationAssumption:
    """Thermalization of cable elements per stage.

    ``center`` pins the center conductor at named stages for every line; any
    other stage falls back to the line itself (component or per-segment
    override), and stages left undetermined are toggled to build bounds.
    The outer conductor is sunk at every stage.
    """

    dielectric_policy: DielectricPolicy = DielectricPolicy.WITH_OUTER
    center: Mapping[str, Thermalization] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "dielectric_policy", DielectricPolicy(self.dielectric_policy))
        object.__setattr__(self, "center", {k: Thermalization(v) for k, v in dict(self.center).items()})


@dataclass(frozen=True)
class PassiveProfile:
    """Per-stage passive load of one line, as a [lower, upper] interval in W."""

    line: str
    lower: Mapping[str, float]
    upper: Mapping[str, float]

    @property
    def stages(self) -> Tuple[str, ...]:
        return tuple(self.lower)

    def midpoint(self) -> Dict[str, float]:
        return {name: 0.5 * (self.lower[name] + self.upper[name]) for name in self.lower}

    def bounds(self, stage: str) -> Tuple[float, float]:
        return self.lower[stage], self.upper[stage]


def conductive_load(
    cable: CableSpec,
    length: float,
    T_low: float,
    T_high: float,
    elements: Sequence[CableElement] = ALL_ELEMENTS,
) -> float:
    """Heat conducted by the selected elements of ``length`` metres of cable, in W.

    Args:
        cable: Coax whose center, dielectric and outer each carry heat.
        length: Run length in metres.
        T_low: Cold end temperature in K.
        T_high: Warm end temperature in K.
        elements: Which cable elements to count.

    Returns:
        Conducted power in W; zero for an isothermal run.

    Raises:
        DomainError: ``length`` is not positive.
        OutOfRangeError: the temperatures are negative or inverted.
    """
    if length <= 0:
        raise DomainError(f"{cable.name}: cable length must be > 0, got {length}")
    if T_low < 0 or T_high < T_low:
        raise OutOfRangeError(f"{cable.name}: need 0 <= T_low <= T_high, got [{T_low}, {T_high}]")
    total = 0.0
    for element in elements:
        element = CableElement(element)
        total += cable.area(element) * conductivity_integral(cable.material(element), T_low, T_high)
    return total / length


def twisted_pair_load(pair: TwistedPairSpec, length: float, T_low: float, T_high: float) -> float:
    """Heat conducted by one twisted pair, in W.

    Both wires of the pair conduct; the insulation is ignored.
    """
    if length <= 0:
        raise DomainError(f"{pair.name}: length must be > 0, got {length}")
    if T_low < 0 or T_high < T_low:
        raise OutOfRangeError(f"{pair.name}: need 0 <= T_low <= T_high, got [{T_low}, {T_high}]")
    integral = conductivity_integral(pair.wire_material, T_low, T_high)
    return pair.wires_per_pair * pair.wire_area * integral / length


def radiative_load(geometry: ShieldGeometry, T_outer: float, T_inner: float) -> float:
    """Gray-body exchange between two long concentric cylinders, in W.

    Args:
        geometry: Radii, height and the emissivity shared by both surfaces.
        T_outer: Temperature of the warmer, outer shield in K.
        T_inner: Temperature of the colder, inner shield in K.

    Returns:
        Power absorbed by the inner shield in W.
    """
    if T_inner < 0 or T_outer < T_inner:
        raise OutOfRangeError(f"need T_outer >= T_inner >= 0, got {T_outer} K and {T_inner} K")
    eps = geometry.emissivity
    ratio = geometry.area_inner / geometry.area_outer
    denominator = 1 / eps + ratio * (1 / eps - 1)
    return constants.Stefan_Boltzmann * geometry.area_inner * (T_outer ** 4 - T_inner ** 4) / denominator


def shield_loads(fridge: FridgeModel, counted_only: bool = True) -> Dict[str, float]:
    """Radiative load per stage from the declared shield pairs."""
    loads = {name: 0.0 for name in fridge.stage_names}
    for shield in fridge.shields:
        if counted_only and not shield.counted:
            continue
        loads[shield.inner_stage] += radiative_load(
            shield.geometry, fridge.temperature(shield.outer_stage), fridge.temperature(shield.inner_stage)
        )
    return loads


def loom_passive_profile(pair: TwistedPairSpec, fridge: FridgeModel, count: int = 1) -> Dict[str, float]:
    """Load of ``count`` twisted pairs clamped at every stage from room temperature down.

    Returns:
        Stage name to load in W, each run spanning ``cable_length_above`` of that stage.
    """
    loads = {}
    upper = fridge.room_temperature
    for stage in fridge.stages:
        loads[stage.name] = count * twisted_pair_load(pair, stage.cable_length_above, stage.temperature, upper)
        upper = stage.temperature
    return loads


# ---------------------------------------------------------------------------
# series conduction
# ---------------------------------------------------------------------------

_Run = Tuple[Material, float, float]  # material, cross section, length


def _series_flow(runs: Sequence[_Run], T_high: float, T_low: float) -> float:
    """Steady heat flow through runs in series between two fixed temperatures."""
    if T_high <= T_low:
        return 0.0
    materials = {(m, a) for m, a, _ in runs}
    if len(materials) == 1:
        (material, area), = materials
        return area * conductivity_integral(material, T_low, T_high) / sum(l for _, _, l in runs)

    def end_temperature(q: float) -> float:
        # walk down the runs; negative return means the flow cannot be carried
        t = T_high
        for material, area, length in runs:
            needed = q * length / area
            available = conductivity_integral(material, 0.0, t)
            if needed >= available:
                return -(needed - available)
            t = optimize.brentq(
                lambda x: conductivity_integral(material, x, t) - needed, 0.0, t, xtol=1e-14, rtol=1e-12
            )
        return t

    q_max = min(area * conductivity_integral(m, T_low, T_high) / length for m, area, length in runs)
    return optimize.brentq(lambda q: end_temperature(q) - T_low, 0.0, q_max, xtol=1e-30, rtol=1e-12)


def _center_states(
    line: LineSpec, assumption: ThermalizationAssumption
) -> List[Optional[Thermalization]]:
    states: List[Optional[Thermalization]] = []
    last = len(line.segments) - 1
    for i, segment in enumerate(line.segments):
        if i == last:
            states.append(Thermalization.FULL)
        elif segment.stage in assumption.center:
            states.append(assumption.center[segment.stage])
        elif segment.center_thermalization is not None:
            states.append(segment.center_thermalization)
        elif any(c.sinks_center for c in segment.components):
            states.append(Thermalization.FULL)
        else:
            states.append(None)
    return states


def _element_loads(
    count: int,
    element: CableElement,
    sunk: Sequence[bool],
    flow: Callable[[CableElement, int, int], float],
) -> List[float]:
    loads = [0.0] * count
    last = 0
    for j in range(1, count + 1):
        if sunk[j - 1]:
            loads[j - 1] = flow(element, last, j)
            last = j
    return loads


def line_passive_profile(
    line: LineSpec,
    fridge: FridgeModel,
    assumption: Optional[ThermalizationAssumption] = None,
) -> PassiveProfile:
    """Per-stage conducted load of a single line, with thermalization bounds.

    Elements whose thermalization at a stage is unknown are taken as both sunk and
    floating; the two extremes give the lower and upper bound.

    Args:
        line: Line running from its top stage down to the mixing chamber.
        fridge: Stage temperatures and cable lengths.
        assumption: Pins elements to a thermalization, narrowing the bounds.

    Returns:
        Lower and upper load per stage in W.

    Raises:
        TopologyError: the line does not reach the mixing chamber.
    """
    assumption = assumption or ThermalizationAssumption()
    validate_line(line, fridge)
    segments = line.segments
    temperatures = [fridge.temperature(line.top)] + [fridge.temperature(s.stage) for s in segments]
    lengths = [s.run_length(fridge) for s in segments]
    memo: Dict[Tuple[CableElement, int, int], float] = {}

    def flow(element: CableElement, upper: int, lower: int) -> float:
        key = (element, upper, lower)
        if key not in memo:
            runs = [
                (segments[k].cable.material(element), segments[k].cable.area(element), lengths[k])
                for k in range(upper, lower)
            ]
            memo[key] = _series_flow(runs, temperatures[upper], temperatures[lower])
        return memo[key]

    states = _center_states(line, assumption)
    uncertain = [i for i, state in enumerate(states) if state is None]
    always = [True] * len(segments)
    lower = {name: float("inf") for name in fridge.stage_names}
    upper = {name: float("-inf") for name in fridge.stage_names}

    for choice in itertools.product((True, False), repeat=len(uncertain)):
        center = [state is Thermalization.FULL for state in states]
        for i, sunk in zip(uncertain, choice):
            center[i] = sunk
        if assumption.dielectric_policy is DielectricPolicy.WITH_CENTER:
            dielectric = center
        else:
            dielectric = always
        totals = {name: 0.0 for name in fridge.stage_names}
        for element, sunk in (
            (CableElement.OUTER, always),
            (CableElement.DIELECTRIC, dielectric),
            (CableElement.CENTER, center),
        ):
            for segment, load in zip(segments, _element_loads(len(segments), element, sunk, flow)):
                totals[segment.stage] += load
        for name, value in totals.items():
            lower[name] = min(lower[name], value)
            upper[name] = max(upper[name], value)

    logger.debug("%s: %d thermalization combinations", line.name, 2 ** len(uncertain))
    return PassiveProfile(line=line.name, lower=lower, upper=upper)
