"""Fit model coefficients to measured data.

Reference curves give each stage's response dP/dT and the temperature
pull-down from the stage above; flux-line sweeps give effective resistances.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, FitError

logger = logging.getLogger(__name__)

DEFAULT_STAGES = ("50K", "4K", "Still", "CP", "MXC")
DEFAULT_WINDOW = 0.3
STILL_REFERENCE_T = 0.882
STILL_TOLERANCE_T = 0.001


@dataclass(frozen=True)
class MeasurementRow:
    applied_power: float
    temperatures: Mapping[str, float]


@dataclass(frozen=True)
class MeasurementSeries:
    """Plate temperatures while a heater on ``heated_stage`` is stepped up."""

    heated_stage: str
    rows: Tuple[MeasurementRow, ...]

    def __post_init__(self):
        rows = tuple(self.rows)
        object.__setattr__(self, "rows", rows)
        if any(r.applied_power < 0 for r in rows):
            raise ConfigError(f"{self.heated_stage}: applied power must be >= 0")
        powers = [r.applied_power for r in rows]
        if powers != sorted(powers):
            raise ConfigError(f"{self.heated_stage}: rows must be sorted by applied power")
        if rows and rows[0].applied_power != 0:
            raise ConfigError(f"{self.heated_stage}: first row must be the zero-power baseline")
        if any(self.heated_stage not in r.temperatures for r in rows):
            raise ConfigError(f"no temperature column for heated stage '{self.heated_stage}'")

    @property
    def baseline(self) -> Mapping[str, float]:
        return self.rows[0].temperatures


@dataclass(frozen=True)
class ResponseCoefficients:
    """Linear plate response around the baseline.

    ``cross[i]`` is dT_i/dP_{i-1}: how much heating the stage above raises
    stage ``i``.
    """

    stages: Tuple[str, ...]
    dP_dT: Mapping[str, float]
    cross: Mapping[str, float] = field(default_factory=dict)
    base_temperatures: Mapping[str, float] = field(default_factory=dict)
    fit_window: Mapping[str, int] = field(default_factory=dict)
    residuals: Mapping[str, float] = field(default_factory=dict)
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        for name, value in self.dP_dT.items():
            if value <= 0:
                raise FitError(f"{name}: dP/dT must be > 0, got {value}")

    def upstream(self, stage: str) -> Optional[str]:
        i = self.stages.index(stage)
        return self.stages[i - 1] if i > 0 else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stages": list(self.stages),
            "dP_dT_W_per_K": dict(self.dP_dT),
            "cross_K_per_W": dict(self.cross),
            "base_temperatures_K": dict(self.base_temperatures),
            "fit_window_rows": dict(self.fit_window),
            "residual_rms_K": dict(self.residuals),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ResponseCoefficients":
        try:
            return cls(
                stages=tuple(data["stages"]),
                dP_dT={k: float(v) for k, v in data["dP_dT_W_per_K"].items()},
                cross={k: float(v) for k, v in data.get("cross_K_per_W", {}).items()},
                base_temperatures={k: float(v) for k, v in data.get("base_temperatures_K", {}).items()},
                fit_window={k: int(v) for k, v in data.get("fit_window_rows", {}).items()},
                residuals={k: float(v) for k, v in data.get("residual_rms_K", {}).items()},
                warnings=tuple(data.get("warnings", ())),
            )
        except KeyError as exc:
            raise ConfigError(f"response coefficients: missing key {exc.args[0]}") from None


def _through_origin(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """Least-squares slope of y = a*x; returns (slope, standard error, residual rms)."""
    coef, _, _, _ = np.linalg.lstsq(x[:, None], y, rcond=None)
    slope = float(coef[0])
    residual = y - slope * x
    rms = float(np.sqrt(np.mean(residual ** 2)))
    dof = max(len(x) - 1, 1)
    err = math.sqrt(float(residual @ residual) / dof / float(x @ x))
    return slope, err, rms


def _window_rows(series: MeasurementSeries, stage: str, window: float) -> List[MeasurementRow]:
    base = series.baseline[stage]
    rows = [r for r in series.rows if (r.temperatures[stage] - base) / base <= window]
    if len(rows) < 3:
        # keep at least two points above the baseline
        rows = list(series.rows[:3])
    return rows


def fit_reference(
    series: Sequence[MeasurementSeries],
    window: float = DEFAULT_WINDOW,
    stages: Sequence[str] = DEFAULT_STAGES,
) -> ResponseCoefficients:
    """Fit dP/dT per heated stage and the cross terms dT_i/dP_{i-1}.

    Only rows whose relative temperature rise of the heated stage stays within
    ``window`` enter the fit.

    Raises:
        FitError: a series has fewer than three rows or a flat response.
    """
    if not 0 < window:
        raise ConfigError(f"fit window must be > 0, got {window}")
    stages = tuple(stages)
    dP_dT: Dict[str, float] = {}
    cross: Dict[str, float] = {}
    base: Dict[str, float] = {}
    used: Dict[str, int] = {}
    residuals: Dict[str, float] = {}
    warnings: List[str] = []

    for s in series:
        if s.heated_stage not in stages:
            raise ConfigError(f"series heats unknown stage '{s.heated_stage}'")
        if len(s.rows) < 3:
            raise FitError(f"{s.heated_stage}: need at least 3 rows, got {len(s.rows)}")
        for name, value in s.baseline.items():
            base.setdefault(name, value)
        h = s.heated_stage
        rows = _window_rows(s, h, window)
        power = np.array([r.applied_power for r in rows])
        rise = np.array([r.temperatures[h] - s.baseline[h] for r in rows])
        if np.allclose(rise, 0):
            raise FitError(f"{h}: temperature does not respond to the heater")
        slope, _, rms = _through_origin(power, rise)
        dP_dT[h] = 1 / slope
        used[h] = len(rows)
        residuals[h] = rms
        full_rise = [r.temperatures[h] for r in s.rows]
        if any(b < a for a, b in zip(full_rise, full_rise[1:])):
            msg = f"{h}: temperature response is not monotone"
            logger.warning(msg)
            warnings.append(msg)

        i = stages.index(h)
        if i + 1 < len(stages):
            below = stages[i + 1]
            if all(below in r.temperatures for r in rows):
                drift = np.array([r.temperatures[below] - s.baseline[below] for r in rows])
                cross[below], _, _ = _through_origin(power, drift)

    return ResponseCoefficients(
        stages=stages,
        dP_dT=dP_dT,
        cross=cross,
        base_temperatures=base,
        fit_window=used,
        residuals=residuals,
        warnings=tuple(warnings),
    )


def apply_loads(
    coeffs: ResponseCoefficients,
    loads: Mapping[str, float],
    base_temperatures: Optional[Mapping[str, float]] = None,
) -> Dict[str, float]:
    """Plate temperatures after adding ``loads`` (W per stage), top-down."""
    base = dict(coeffs.base_temperatures)
    base.update(base_temperatures or {})
    temps = {}
    for stage in coeffs.stages:
        dp = loads.get(stage, 0.0)
        if dp and stage not in coeffs.dP_dT:
            raise FitError(f"no dP/dT for stage {stage}")
        dt = dp / coeffs.dP_dT[stage] if dp else 0.0
        upstream = coeffs.upstream(stage)
        if upstream is not None:
            dt += coeffs.cross.get(stage, 0.0) * loads.get(upstream, 0.0)
        if stage in base:
            temps[stage] = base[stage] + dt
    return temps


@dataclass(frozen=True)
class ExtractedLoads:
    loads: Mapping[str, float]
    warnings: Tuple[str, ...] = ()


def extract_passive_load(
    baseline: Mapping[str, float],
    loaded: Mapping[str, float],
    coeffs: ResponseCoefficients,
) -> ExtractedLoads:
    """Convert temperature rises into loads, removing the pull from the stage above first."""
    loads: Dict[str, float] = {}
    warnings: List[str] = []
    for stage in coeffs.stages:
        if stage not in baseline or stage not in loaded:
            continue
        dt = loaded[stage] - baseline[stage]
        upstream = coeffs.upstream(stage)
        if upstream is not None:
            dt -= coeffs.cross.get(stage, 0.0) * loads.get(upstream, 0.0)
        if dt == 0:
            loads[stage] = 0.0
            continue
        if stage not in coeffs.dP_dT:
            raise FitError(f"no dP/dT for stage {stage}")
        if dt < 0:
            msg = f"{stage}: corrected temperature rise {dt:.3g} K is negative, reported as 0"
            logger.warning(msg)
            warnings.append(msg)
            dt = 0.0
        loads[stage] = coeffs.dP_dT[stage] * dt
    return ExtractedLoads(loads=loads, warnings=tuple(warnings))


@dataclass(frozen=True)
class ResistanceFit:
    r_eff: float
    std_error: float


def fit_effective_resistance(points: Sequence[Tuple[float, float]]) -> ResistanceFit:
    """Fit P = R * I^2 through the origin."""
    if len(points) < 3:
        raise FitError(f"need at least 3 points, got {len(points)}")
    currents = np.array([p[0] for p in points], dtype=float)
    loads = np.array([p[1] for p in points], dtype=float)
    if np.ptp(currents) == 0:
        raise FitError("all currents are equal")
    x = currents ** 2
    if not np.any(loads):
        return ResistanceFit(0.0, 0.0)
    r, std, _ = _through_origin(x, loads)
    return ResistanceFit(r_eff=r, std_error=std)


@dataclass(frozen=True)
class FlowValidity:
    """Whether CP/MXC extractions hold at the reference still flow; ``valid`` None is unknown."""

    valid: Optional[bool]
    message: str


def still_flow_normalize(
    coeffs: ResponseCoefficients,
    still_temperature: Optional[float] = None,
    still_target_T: float = STILL_REFERENCE_T,
    tolerance: float = STILL_TOLERANCE_T,
    still_stage: str = "Still",
) -> FlowValidity:
    if still_temperature is None:
        still_temperature = coeffs.base_temperatures.get(still_stage)
    if still_temperature is None:
        return FlowValidity(None, "still temperature unknown; CP/MXC extractions unverified")
    if abs(still_temperature - still_target_T) <= tolerance:
        return FlowValidity(True, f"still at {still_temperature * 1e3:.0f} mK, reference flow")
    return FlowValidity(
        False,
        f"still at {still_temperature * 1e3:.0f} mK, not {still_target_T * 1e3:.0f} mK; "
        "CP/MXC extractions only hold at the reference flow",
    )


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

_HEATED_PREFIX = "# heated_stage:"


def read_measurement_csv(path: Union[str, Path]) -> MeasurementSeries:
    """Read a heater sweep.

    The first line names the heated stage (``# heated_stage: 4K``); the header
    is ``applied_power_W,T_50K,...``.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise ConfigError(f"measurement file not found: {path}", path=str(path)) from None
    if not text or not text[0].lower().startswith(_HEATED_PREFIX):
        raise ConfigError(f"first line must be '{_HEATED_PREFIX} <stage>'", path=str(path), line=1)
    heated = text[0][len(_HEATED_PREFIX):].strip()
    reader = csv.reader(text[1:])
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError("missing header row", path=str(path), line=2) from None
    if not header or header[0] != "applied_power_W" or not all(h.startswith("T_") for h in header[1:]):
        raise ConfigError("header must be applied_power_W,T_<stage>,...", path=str(path), line=2)
    stages = [h[2:] for h in header[1:]]
    if heated not in stages:
        raise ConfigError(
            f"no T_{heated} column for the heated stage; columns are {','.join(header)}", path=str(path), line=2
        )
    rows = []
    for lineno, row in enumerate(reader, start=3):
        if not row:
            continue
        if len(row) != len(header):
            raise ConfigError(f"expected {len(header)} columns, got {len(row)}", path=str(path), line=lineno)
        try:
            values = [float(v) for v in row]
        except ValueError:
            raise ConfigError(f"non-numeric value in {row}", path=str(path), line=lineno) from None
        rows.append(MeasurementRow(values[0], dict(zip(stages, values[1:]))))
    return MeasurementSeries(heated_stage=heated, rows=tuple(rows))


def read_resistance_csv(path: Union[str, Path]) -> List[Tuple[float, float]]:
    """Read ``current_A,load_W`` rows."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise ConfigError(f"resistance file not found: {path}", path=str(path)) from None
    reader = csv.reader(text)
    header = next(reader, None)
    if header != ["current_A", "load_W"]:
        raise ConfigError("header must be current_A,load_W", path=str(path), line=1)
    points = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ConfigError(f"expected 2 columns, got {len(row)}", path=str(path), line=lineno)
        try:
            points.append((float(row[0]), float(row[1])))
        except ValueError:
            raise ConfigError(f"non-numeric value in {row}", path=str(path), line=lineno) from None
    return points
