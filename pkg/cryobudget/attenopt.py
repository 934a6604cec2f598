"""Search for attenuator placements.

Every candidate is scored by the thermal photon number it leaves at the
mixing chamber and by the fraction of each stage's cooling power its drive
signals burn.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .budget import PowerPlan, active_loads_per_stage, back_propagate
from .errors import ConfigError
from .fridge import FridgeModel, LineSpec, with_attenuation
from .noise import DEFAULT_FREQUENCY, cascade_photon_number, chain_for_line
from .signals import dbm_to_watt

logger = logging.getLogger(__name__)

DEFAULT_ALLOWED = (0.0, 3.0, 6.0, 10.0, 20.0, 30.0)


class Objective(str, Enum):
    MIN_N_MXC = "min_n_mxc"
    MIN_MAX_FRACTION = "min_max_fraction"
    PARETO = "pareto"


@dataclass(frozen=True)
class SearchConstraints:
    total_dB: float = 60.0
    allowed_values: Tuple[float, ...] = DEFAULT_ALLOWED
    max_fraction: Mapping[str, float] = field(default_factory=dict)
    max_attenuators: Optional[int] = None
    objective: Objective = Objective.MIN_N_MXC
    count_penalty: bool = False

    def __post_init__(self):
        object.__setattr__(self, "allowed_values", tuple(sorted({float(v) for v in self.allowed_values})))
        object.__setattr__(self, "objective", Objective(self.objective))
        if any(v < 0 for v in self.allowed_values):
            raise ConfigError("allowed attenuation values must be >= 0 dB")


@dataclass(frozen=True)
class SearchContext:
    """The line being optimized and how it is driven."""

    fridge: FridgeModel
    line_template: LineSpec
    line_count: int = 25
    drive_plan: PowerPlan = field(default_factory=lambda: PowerPlan(-78.0))
    frequency: float = DEFAULT_FREQUENCY
    with_cable_loss: bool = False

    @property
    def stages(self) -> Tuple[str, ...]:
        return tuple(s.stage for s in self.line_template.segments)


@dataclass(frozen=True)
class ConfigCandidate:
    stages: Tuple[str, ...]
    values: Tuple[float, ...]
    n_mxc: float
    fractions: Mapping[str, float]
    attenuator_count: int

    @property
    def config(self) -> Dict[str, float]:
        return dict(zip(self.stages, self.values))

    @property
    def max_fraction(self) -> float:
        return max(self.fractions.values()) if self.fractions else 0.0

    @property
    def total_dB(self) -> float:
        return sum(self.values)


def evaluate_config(
    config: Mapping[str, float],
    fridge: FridgeModel,
    line_template: LineSpec,
    drive_plan: PowerPlan,
    line_count: int = 25,
    frequency: float = DEFAULT_FREQUENCY,
    with_cable_loss: bool = False,
) -> ConfigCandidate:
    """Photon number and per-stage drive-load fractions of one placement."""
    line = with_attenuation(line_template, config)
    chain = chain_for_line(line, fridge, frequency, with_cable_loss)
    n_mxc = cascade_photon_number(chain, frequency).n_mxc

    fractions = {name: 0.0 for name in fridge.stage_names}
    if drive_plan.delivered_dBm is not None:
        delivered = dbm_to_watt(drive_plan.delivered_dBm)
        input_power = back_propagate(line, delivered, drive_plan.frequency, fridge, drive_plan.with_cable_loss)
        loads = active_loads_per_stage(line, input_power, drive_plan.frequency, fridge, drive_plan.with_cable_loss)
        fractions = {
            stage.name: line_count * loads.stages[stage.name] / stage.cooling_power for stage in fridge.stages
        }
    stages = tuple(s.stage for s in line.segments)
    values = tuple(float(config.get(name, 0.0)) for name in stages)
    return ConfigCandidate(
        stages=stages,
        values=values,
        n_mxc=n_mxc,
        fractions=fractions,
        attenuator_count=sum(1 for v in values if v > 0),
    )


def _evaluate(values: Sequence[float], context: SearchContext) -> ConfigCandidate:
    return evaluate_config(
        dict(zip(context.stages, values)),
        context.fridge,
        context.line_template,
        context.drive_plan,
        context.line_count,
        context.frequency,
        context.with_cable_loss,
    )


def _is_feasible(candidate: ConfigCandidate, constraints: SearchConstraints) -> bool:
    for stage, limit in constraints.max_fraction.items():
        if candidate.fractions.get(stage, 0.0) > limit:
            return False
    if constraints.max_attenuators is not None and candidate.attenuator_count > constraints.max_attenuators:
        return False
    return True


def compositions(total: float, allowed: Sequence[float], parts: int) -> List[Tuple[float, ...]]:
    """Every ordered choice of ``parts`` allowed values summing to ``total``."""
    allowed = sorted(set(allowed))
    return [combo for combo in itertools.product(allowed, repeat=parts) if abs(sum(combo) - total) < 1e-9]


def pareto_front(candidates: Iterable[ConfigCandidate]) -> List[ConfigCandidate]:
    """Candidates not beaten on both photon number and worst stage fraction."""
    pool = list(candidates)
    front = []
    for c in pool:
        dominated = any(
            o.n_mxc <= c.n_mxc
            and o.max_fraction <= c.max_fraction
            and (o.n_mxc < c.n_mxc or o.max_fraction < c.max_fraction)
            for o in pool
        )
        if not dominated:
            front.append(c)
    return sorted(front, key=lambda c: (c.n_mxc, c.values))


def _rank_key(constraints: SearchConstraints):
    penalty = constraints.count_penalty
    if constraints.objective is Objective.MIN_MAX_FRACTION:
        return lambda c: (c.max_fraction, c.attenuator_count if penalty else 0, c.n_mxc, c.values)
    return lambda c: (c.n_mxc, c.attenuator_count if penalty else 0, c.values)


def enumerate_configs(constraints: SearchConstraints, context: SearchContext) -> List[ConfigCandidate]:
    """Evaluate every allowed placement with the requested total; feasible ones, best first."""
    combos = compositions(constraints.total_dB, constraints.allowed_values, len(context.stages))
    candidates = [_evaluate(values, context) for values in combos]
    feasible = [c for c in candidates if _is_feasible(c, constraints)]
    logger.info("%d placements evaluated, %d feasible", len(candidates), len(feasible))
    if constraints.objective is Objective.PARETO:
        return pareto_front(feasible)
    return sorted(feasible, key=_rank_key(constraints))


def db_range(start: float, stop: float, step: float) -> List[float]:
    """``start`` to ``stop`` inclusive in ``step`` increments."""
    if step <= 0:
        raise ConfigError(f"step must be > 0, got {step}")
    if stop < start:
        return []
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 9) for i in range(count)]


@dataclass(frozen=True)
class SweepPoint:
    attenuation_dB: float
    n_mxc: float
    fractions: Mapping[str, float] = field(default_factory=dict)


def sweep_single_stage(
    stage: str,
    values: Sequence[float],
    fixed: Mapping[str, float],
    context: SearchContext,
) -> List[SweepPoint]:
    """Vary the attenuation on ``stage`` while the others stay at ``fixed``."""
    if stage not in context.stages:
        raise ConfigError(f"stage '{stage}' is not on line {context.line_template.name}")
    curve = []
    for db in values:
        config = dict(fixed)
        config[stage] = db
        candidate = _evaluate([config.get(s, 0.0) for s in context.stages], context)
        curve.append(SweepPoint(attenuation_dB=db, n_mxc=candidate.n_mxc, fractions=candidate.fractions))
    return curve


def relax_continuous(
    constraints: SearchConstraints,
    context: SearchContext,
    coarse_step: float = 5.0,
    min_step: float = 0.1,
) -> Optional[ConfigCandidate]:
    """Best placement with real-valued attenuations.

    Starts from a grid of ``coarse_step`` and repeatedly moves attenuation
    between pairs of stages with halving step sizes.
    """
    n = len(context.stages)
    grid = db_range(0.0, constraints.total_dB, coarse_step)
    key = _rank_key(SearchConstraints(objective=constraints.objective))
    feasible = [
        c for c in (_evaluate(v, context) for v in compositions(constraints.total_dB, grid, n))
        if _is_feasible(c, constraints)
    ]
    if not feasible:
        return None
    best = min(feasible, key=key)
    step = coarse_step / 2
    while step >= min_step:
        improved = True
        while improved:
            improved = False
            for i, j in itertools.permutations(range(n), 2):
                values = list(best.values)
                if values[i] < step:
                    continue
                values[i] = round(values[i] - step, 9)
                values[j] = round(values[j] + step, 9)
                candidate = _evaluate(values, context)
                if _is_feasible(candidate, constraints) and key(candidate) < key(best):
                    best = candidate
                    improved = True
        step /= 2
    return best
