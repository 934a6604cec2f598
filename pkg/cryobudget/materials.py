"""Material property database and cable catalog.

Thermal conductivity curves are stored as tabulated points and interpolated
log-log. Published fits in the catalog file are sampled on a log-spaced grid
when the catalog is loaded, so every downstream module sees the same
points-based representation.
"""

import bisect
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from pathlib import Path
from types import MappingProxyType
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, OutOfRangeError, UnknownEntryError

logger = logging.getLogger(__name__)

DEFAULT_CATALOG = Path(__file__).parent / "data" / "catalog.json"

# Cable segments whose warm end sits below this temperature use the cryogenic
# attenuation scale.
CRYOGENIC_THRESHOLD_K = 4.0


class Extrapolation(str, Enum):
    """What happens below the lowest tabulated temperature."""

    LINEAR_TO_ZERO = "linear_to_zero"
    FORBIDDEN = "forbidden"


class CableElement(str, Enum):
    """Conducting parts of a coaxial cable."""

    OUTER = "outer"
    DIELECTRIC = "dielectric"
    CENTER = "center"


ALL_ELEMENTS = (CableElement.OUTER, CableElement.DIELECTRIC, CableElement.CENTER)


@dataclass(frozen=True)
class Material:
    """Thermal conductivity curve of one material."""

    name: str
    conductivity_points: Tuple[Tuple[float, float], ...]
    extrapolation_rule: Extrapolation = Extrapolation.LINEAR_TO_ZERO
    source: str = ""

    def __post_init__(self):
        points = tuple((float(t), float(k)) for t, k in self.conductivity_points)
        if len(points) < 2:
            raise ConfigError(f"material '{self.name}' needs at least two conductivity points")
        temps = [t for t, _ in points]
        if any(b <= a for a, b in zip(temps, temps[1:])):
            raise ConfigError(f"material '{self.name}': temperatures must be strictly increasing")
        if temps[0] <= 0 or any(k <= 0 for _, k in points):
            raise ConfigError(f"material '{self.name}': temperatures and conductivities must be > 0")
        object.__setattr__(self, "conductivity_points", points)
        object.__setattr__(self, "extrapolation_rule", Extrapolation(self.extrapolation_rule))

    @property
    def valid_range(self) -> Tuple[float, float]:
        return self.conductivity_points[0][0], self.conductivity_points[-1][0]

    @property
    def t_min(self) -> float:
        return self.conductivity_points[0][0]

    @property
    def t_max(self) -> float:
        return self.conductivity_points[-1][0]


@dataclass(frozen=True)
class CableSpec:
    """Coaxial cable: geometry, materials, RF attenuation and DC resistance."""

    name: str
    cc_diameter: float
    dielectric_od: float
    shield_od: float
    center: Material
    dielectric: Material
    outer: Material
    attenuation_curve: Tuple[Tuple[float, float], ...]
    cryo_attenuation_scale: float = 8.2 / 9.7
    dc_resistance_per_m: float = 0.0
    superconducting_below: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.cc_diameter < self.dielectric_od < self.shield_od:
            raise ConfigError(
                f"cable '{self.name}': need 0 < cc_diameter < dielectric_od < shield_od"
            )
        curve = tuple((float(f), float(a)) for f, a in self.attenuation_curve)
        if not curve:
            raise ConfigError(f"cable '{self.name}': empty attenuation curve")
        freqs = [f for f, _ in curve]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ConfigError(f"cable '{self.name}': attenuation frequencies must increase")
        if any(b < a for (_, a), (_, b) in zip(curve, curve[1:])):
            raise ConfigError(f"cable '{self.name}': attenuation must not decrease with frequency")
        object.__setattr__(self, "attenuation_curve", curve)

    def cross_sections(self) -> Tuple[float, float, float]:
        """Return (A_o, A_d, A_c) in m^2."""
        a_c = math.pi * self.cc_diameter ** 2 / 4
        a_d = math.pi * (self.dielectric_od ** 2 - self.cc_diameter ** 2) / 4
        a_o = math.pi * (self.shield_od ** 2 - self.dielectric_od ** 2) / 4
        return a_o, a_d, a_c

    def area(self, element: CableElement) -> float:
        a_o, a_d, a_c = self.cross_sections()
        return {CableElement.OUTER: a_o, CableElement.DIELECTRIC: a_d, CableElement.CENTER: a_c}[
            CableElement(element)
        ]

    def material(self, element: CableElement) -> Material:
        element = CableElement(element)
        if element is CableElement.OUTER:
            return self.outer
        if element is CableElement.DIELECTRIC:
            return self.dielectric
        return self.center

    def scaled(self, s: float) -> "CableSpec":
        """Same cable family with every diameter multiplied by ``s``.

        Cross sections go as s^2, the attenuation per length as 1/s and the DC
        resistance as 1/s^2.
        """
        if s <= 0:
            raise ConfigError(f"diameter scale must be > 0, got {s}")
        if s == 1:
            return self
        return replace(
            self,
            name=f"{self.name}x{s:.4g}",
            cc_diameter=self.cc_diameter * s,
            dielectric_od=self.dielectric_od * s,
            shield_od=self.shield_od * s,
            attenuation_curve=tuple((f, a / s) for f, a in self.attenuation_curve),
            dc_resistance_per_m=self.dc_resistance_per_m / s ** 2,
        )


@dataclass(frozen=True)
class TwistedPairSpec:
    """A pair of identical round wires."""

    name: str
    wire_material: Material
    wire_diameter: float
    wires_per_pair: int = 2

    def __post_init__(self):
        if self.wire_diameter <= 0:
            raise ConfigError(f"twisted pair '{self.name}': wire diameter must be > 0")

    @property
    def wire_area(self) -> float:
        return math.pi * self.wire_diameter ** 2 / 4


@dataclass(frozen=True)
class Catalog:
    """Immutable lookup of materials, cables and twisted pairs."""

    materials: Mapping[str, Material] = field(default_factory=dict)
    cables: Mapping[str, CableSpec] = field(default_factory=dict)
    twisted_pairs: Mapping[str, TwistedPairSpec] = field(default_factory=dict)
    source: str = ""

    def material(self, name: str) -> Material:
        return _lookup(self.materials, name, "material")

    def cable(self, name: str) -> CableSpec:
        return _lookup(self.cables, name, "cable")

    def twisted_pair(self, name: str) -> TwistedPairSpec:
        return _lookup(self.twisted_pairs, name, "twisted pair")


def _lookup(table: Mapping[str, Any], name: str, what: str):
    try:
        return table[name]
    except KeyError:
        known = ", ".join(sorted(table)) or "none"
        raise UnknownEntryError(f"unknown {what} '{name}' (known: {known})") from None


# ---------------------------------------------------------------------------
# Conductivity
# ---------------------------------------------------------------------------


def conductivity(material: Material, T: float) -> float:
    """Thermal conductivity in W/(m K).

    Log-log interpolation between tabulated points; below the first point the
    curve falls linearly to zero when the material allows it.

    Raises:
        OutOfRangeError: T < 0, T above the table, or T below the table with a
            forbidden extrapolation.
    """
    if T < 0 or not math.isfinite(T):
        raise OutOfRangeError(f"{material.name}: temperature {T} K is not a valid temperature")
    t_min, t_max = material.valid_range
    if T > t_max * (1 + 1e-12):
        raise OutOfRangeError(f"{material.name}: {T} K above tabulated range (max {t_max} K)")
    k_min = material.conductivity_points[0][1]
    if T < t_min:
        if material.extrapolation_rule is Extrapolation.FORBIDDEN:
            raise OutOfRangeError(f"{material.name}: {T} K below tabulated range (min {t_min} K)")
        return k_min * T / t_min
    if T >= t_max:
        return material.conductivity_points[-1][1]
    log_t, log_k = _log_table(material)
    return float(np.exp(np.interp(math.log(T), log_t, log_k)))


def conductivity_array(material: Material, temperatures: Iterable[float]) -> np.ndarray:
    """Vectorised :func:`conductivity` for plotting and brute-force checks."""
    temps = np.asarray(list(temperatures), dtype=float)
    t_min, t_max = material.valid_range
    if np.any(temps < 0) or np.any(temps > t_max * (1 + 1e-12)):
        raise OutOfRangeError(f"{material.name}: temperatures outside [0, {t_max}] K")
    below = temps < t_min
    if np.any(below) and material.extrapolation_rule is Extrapolation.FORBIDDEN:
        raise OutOfRangeError(f"{material.name}: temperatures below {t_min} K")
    log_t, log_k = _log_table(material)
    out = np.empty_like(temps)
    inside = ~below
    out[inside] = np.exp(np.interp(np.log(temps[inside]), log_t, log_k))
    out[below] = material.conductivity_points[0][1] * temps[below] / t_min
    return out


@lru_cache(maxsize=64)
def _log_table(material: Material) -> Tuple[np.ndarray, np.ndarray]:
    temps = np.array([t for t, _ in material.conductivity_points])
    values = np.array([k for _, k in material.conductivity_points])
    return np.log(temps), np.log(values)


def conductivity_integral(material: Material, T_low: float, T_high: float) -> float:
    """Integral of the conductivity from T_low to T_high, in W/m.

    Between tabulated points the log-log interpolation is a power law, so the
    integral is evaluated in closed form from a cumulative table.
    """
    if T_low < 0 or T_high < T_low:
        raise OutOfRangeError(
            f"{material.name}: need 0 <= T_low <= T_high, got [{T_low}, {T_high}]"
        )
    # range checks on both ends
    conductivity(material, T_high)
    conductivity(material, T_low)
    if T_high == T_low:
        return 0.0
    t_min = material.t_min
    if T_high <= t_min:
        k_min = material.conductivity_points[0][1]
        return k_min * (T_high ** 2 - T_low ** 2) / (2 * t_min)
    return _antiderivative(material, T_high) - _antiderivative(material, T_low)


def _power_law_integral(t0: float, k0: float, exponent: float, t: float) -> float:
    # integral of k0 * (x / t0) ** exponent from t0 to t
    if abs(exponent + 1) < 1e-12:
        return k0 * t0 * math.log(t / t0)
    return k0 * t0 / (exponent + 1) * ((t / t0) ** (exponent + 1) - 1)


_Table = Tuple[float, ...]


@lru_cache(maxsize=64)
def _cumulative_table(material: Material) -> Tuple[_Table, _Table, _Table, _Table]:
    temps = tuple(t for t, _ in material.conductivity_points)
    values = tuple(k for _, k in material.conductivity_points)
    exponents = tuple(
        math.log(k1 / k0) / math.log(t1 / t0)
        for (t0, k0), (t1, k1) in zip(material.conductivity_points, material.conductivity_points[1:])
    )
    cumulative = [values[0] * temps[0] / 2]
    for i, p in enumerate(exponents):
        cumulative.append(cumulative[-1] + _power_law_integral(temps[i], values[i], p, temps[i + 1]))
    return temps, values, exponents, tuple(cumulative)


def _antiderivative(material: Material, T: float) -> float:
    """Integral of the conductivity from 0 K to T."""
    temps, values, exponents, cumulative = _cumulative_table(material)
    if T <= temps[0]:
        return values[0] * T ** 2 / (2 * temps[0])
    i = min(bisect.bisect_right(temps, T) - 1, len(exponents) - 1)
    return cumulative[i] + _power_law_integral(temps[i], values[i], exponents[i], T)


# ---------------------------------------------------------------------------
# RF attenuation
# ---------------------------------------------------------------------------


def attenuation_per_m(cable: CableSpec, frequency: float) -> float:
    """Room-temperature attenuation in dB/m, linearly interpolated."""
    f_lo, f_hi = cable.attenuation_curve[0][0], cable.attenuation_curve[-1][0]
    if not f_lo <= frequency <= f_hi:
        raise OutOfRangeError(
            f"{cable.name}: frequency {frequency:g} Hz outside attenuation data [{f_lo:g}, {f_hi:g}] Hz"
        )
    freqs = [f for f, _ in cable.attenuation_curve]
    values = [a for _, a in cable.attenuation_curve]
    return float(np.interp(frequency, freqs, values))


def cable_attenuation_db(cable: CableSpec, frequency: float, length: float, cryogenic: bool) -> float:
    """Attenuation of ``length`` metres of cable at ``frequency``.

    Cryogenic runs use ``cryo_attenuation_scale``; superconducting cables are
    lossless there.
    """
    if length < 0:
        raise OutOfRangeError(f"{cable.name}: negative length {length}")
    per_m = attenuation_per_m(cable, frequency)
    if cryogenic:
        if cable.superconducting_below is not None and cable.superconducting_below > CRYOGENIC_THRESHOLD_K:
            return 0.0
        per_m *= cable.cryo_attenuation_scale
    return length * per_m


def is_cryogenic(warm_end_temperature: float) -> bool:
    return warm_end_temperature < CRYOGENIC_THRESHOLD_K


# ---------------------------------------------------------------------------
# Catalog loading
# ---------------------------------------------------------------------------


def _sample_fit(
    name: str, fit: Mapping[str, Any], t_min: float, t_max: float, n: int
) -> Tuple[Tuple[float, float], ...]:
    temps = np.geomspace(t_min, t_max, n)
    form = fit.get("form")
    if form == "log_polynomial":
        x = np.log10(temps)
        values = 10 ** np.polyval(list(reversed(fit["coefficients"])), x)
    elif form == "rational_sqrt":
        root = np.sqrt(temps)
        num = np.polyval(list(reversed(fit["numerator"])), root)
        den = np.polyval(list(reversed(fit["denominator"])), root)
        values = 10 ** (num / den)
    elif form == "polynomial":
        values = np.polyval(list(reversed(fit["coefficients"])), temps)
    else:
        raise ConfigError(f"material '{name}': unknown fit form '{form}'")
    if np.any(values <= 0):
        raise ConfigError(f"material '{name}': fit is not positive over {t_min}-{t_max} K")
    return tuple(zip(temps.tolist(), values.tolist()))


def material_from_dict(entry: Mapping[str, Any], sample_points: int = 64) -> Material:
    name = entry.get("name")
    if not name:
        raise ConfigError("material entry without a name")
    if "fit" in entry:
        t_min, t_max = entry["valid_range_K"]
        points = _sample_fit(name, entry["fit"], float(t_min), float(t_max), sample_points)
    elif "points" in entry:
        points = tuple((float(t), float(k)) for t, k in entry["points"])
    else:
        raise ConfigError(f"material '{name}' has neither 'fit' nor 'points'")
    return Material(
        name=name,
        conductivity_points=points,
        extrapolation_rule=Extrapolation(entry.get("extrapolation", "linear_to_zero")),
        source=entry.get("source", ""),
    )


def _attenuation_points(name: str, spec: Mapping[str, Any], grid: Sequence[float]) -> Tuple[Tuple[float, float], ...]:
    if "points" in spec:
        return tuple((float(f), float(a)) for f, a in spec["points"])
    if spec.get("form") == "sqrt_frequency":
        f_ref = float(spec["reference_frequency_Hz"])
        a_ref = float(spec["reference_dB_per_m"])
        return tuple((float(f), a_ref * math.sqrt(f / f_ref)) for f in grid)
    raise ConfigError(f"cable '{name}': unknown attenuation description")


def load_catalog(path: Optional[Union[str, Path]] = None) -> Catalog:
    """Load the material/cable catalog (defaults to the bundled file)."""
    catalog_path = Path(path) if path else DEFAULT_CATALOG
    return _load_catalog_cached(str(catalog_path.resolve()))


@lru_cache(maxsize=8)
def _load_catalog_cached(path: str) -> Catalog:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"catalog file not found: {path}", path=path) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"catalog is not valid JSON: {exc.msg}", path=path, line=exc.lineno) from None
    return catalog_from_dict(raw, source=path)


def catalog_from_dict(raw: Mapping[str, Any], source: str = "") -> Catalog:
    n = int(raw.get("sample_points", 64))
    grid = raw.get("frequency_grid_Hz", [])
    materials: Dict[str, Material] = {}
    for entry in raw.get("materials", []):
        material = material_from_dict(entry, n)
        materials[material.name] = material

    def mat(name: str) -> Material:
        return _lookup(materials, name, "material")

    cables: Dict[str, CableSpec] = {}
    for entry in raw.get("cables", []):
        name = entry["name"]
        cables[name] = CableSpec(
            name=name,
            cc_diameter=float(entry["cc_diameter_m"]),
            dielectric_od=float(entry["dielectric_od_m"]),
            shield_od=float(entry["shield_od_m"]),
            center=mat(entry["center"]),
            dielectric=mat(entry["dielectric"]),
            outer=mat(entry["outer"]),
            attenuation_curve=_attenuation_points(name, entry["attenuation"], grid),
            cryo_attenuation_scale=float(entry.get("cryo_attenuation_scale", 8.2 / 9.7)),
            dc_resistance_per_m=float(entry.get("dc_resistance_ohm_per_m", 0.0)),
            superconducting_below=entry.get("superconducting_below_K"),
        )
    pairs: Dict[str, TwistedPairSpec] = {}
    for entry in raw.get("twisted_pairs", []):
        pairs[entry["name"]] = TwistedPairSpec(
            name=entry["name"],
            wire_material=mat(entry["wire_material"]),
            wire_diameter=float(entry["wire_diameter_m"]),
            wires_per_pair=int(entry.get("wires_per_pair", 2)),
        )
    logger.debug("catalog %s: %d materials, %d cables, %d pairs", source, len(materials), len(cables), len(pairs))
    return Catalog(
        materials=MappingProxyType(materials),
        cables=MappingProxyType(cables),
        twisted_pairs=MappingProxyType(pairs),
        source=source,
    )
