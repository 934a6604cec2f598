"""CSV, JSON and console output.

Files are written so that identical inputs give byte-identical output:
LF line endings, floats with 10 significant digits, JSON keys sorted.
"""

import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence

from rich.table import Table

from .attenopt import ConfigCandidate, SweepPoint
from .budget import BudgetReport
from .heatflow import PassiveProfile
from .noise import DephasingBounds, PhotonNumberProfile

logger = logging.getLogger(__name__)

STAGE_COLUMNS = ("stage", "quantity", "value_W", "fraction", "bound_low", "bound_high")
BREAKDOWN_COLUMNS = ("line", "kind", "count", "stage", "passive_W", "active_W")
FRACTION_COLUMNS = ("stage", "passive", "active", "other", "total")
DEPHASING_COLUMNS = ("flux_attenuation_dB", "t2_star_s", "t2_echo_s")


def fmt(value: Any) -> str:
    """Cell text for ``value``; floats get 10 significant digits."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if value == 0:
            return "0"
        return format(value, ".10g")
    return str(value)


def _clean(value: Any) -> Any:
    if isinstance(value, float):
        if math.isinf(value) or math.isnan(value):
            return None
        return float(format(value, ".10g"))
    if isinstance(value, Mapping):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buffer.getvalue()


def json_text(data: Any) -> str:
    return json.dumps(_clean(data), sort_keys=True, indent=2) + "\n"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows), encoding="utf-8", newline="")
    logger.debug("wrote %s", path)
    return path


def write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json_text(data), encoding="utf-8", newline="")
    logger.debug("wrote %s", path)
    return path


# ---------------------------------------------------------------------------
# row builders
# ---------------------------------------------------------------------------


def passive_rows(profiles: Sequence[PassiveProfile]) -> List[List[Any]]:
    """Rows in ``STAGE_COLUMNS`` order: one per line type and stage."""
    rows = []
    for profile in profiles:
        midpoint = profile.midpoint()
        for stage in profile.stages:
            low, high = profile.bounds(stage)
            rows.append([stage, f"passive:{profile.line}", midpoint[stage], None, low, high])
    return rows


def budget_stage_rows(report: BudgetReport) -> List[List[Any]]:
    rows = []
    for s in report.stages:
        rows.append([s.name, "passive", s.passive, s.passive / s.cooling_power, s.passive_low, s.passive_high])
        rows.append([s.name, "active", s.active, s.active / s.cooling_power, None, None])
        if s.radiative:
            rows.append([s.name, "radiative", s.radiative, s.radiative / s.cooling_power, None, None])
        if s.empirical:
            rows.append([s.name, "empirical", s.empirical, s.empirical / s.cooling_power, None, None])
        rows.append([s.name, "total", s.total, s.fraction, None, None])
        rows.append([s.name, "cooling_power", s.cooling_power, None, None, None])
    return rows


def budget_line_rows(report: BudgetReport) -> List[List[Any]]:
    """Per-line contributions, already multiplied by the line count."""
    rows = []
    for line in report.lines:
        for stage in line.passive:
            low, high = line.profile.bounds(stage)
            rows.append(
                [stage, f"passive:{line.name}", line.count * line.passive[stage], None,
                 line.count * low, line.count * high]
            )
        for stage, value in line.active.items():
            if value:
                rows.append([stage, f"active:{line.name}", line.count * value, None, None, None])
    return rows


def budget_breakdown_rows(report: BudgetReport) -> List[List[Any]]:
    """Passive and active load of each line type on each stage, multiplied by the line count."""
    return [
        [line.name, line.kind.value, line.count, stage, line.count * line.passive[stage],
         line.count * line.active.get(stage, 0.0)]
        for line in report.lines
        for stage in line.passive
    ]


def budget_fraction_rows(report: BudgetReport) -> List[List[Any]]:
    rows = []
    for s in report.stages:
        share = [s.passive, s.active, s.radiative + s.empirical, s.total]
        rows.append([s.name] + [value / s.cooling_power for value in share])
    return rows


def noise_header(stages: Sequence[str]) -> List[str]:
    return ["line", "kind"] + [f"{s}_dB" for s in stages] + ["total_dB", "n_mxc"]


def budget_noise_rows(report: BudgetReport, stages: Sequence[str]) -> List[List[Any]]:
    return [
        [n.name, n.kind.value] + [n.attenuation.get(s, 0.0) for s in stages] + [n.total_dB, n.n_mxc]
        for n in report.noise
    ]


def photon_rows(profile: PhotonNumberProfile) -> List[List[Any]]:
    rows = [["input", profile.n_input]]
    rows.extend([label, value] for label, value in zip(profile.labels, profile.values))
    return rows


def candidate_header(stages: Sequence[str], fraction_stages: Sequence[str]) -> List[str]:
    return (
        ["rank"] + [f"{s}_dB" for s in stages] + ["n_mxc"]
        + [f"fraction_{s}" for s in fraction_stages] + ["attenuators"]
    )


def candidate_rows(candidates: Sequence[ConfigCandidate], fraction_stages: Sequence[str]) -> List[List[Any]]:
    return [
        [rank] + list(c.values) + [c.n_mxc] + [c.fractions.get(s, 0.0) for s in fraction_stages]
        + [c.attenuator_count]
        for rank, c in enumerate(candidates, start=1)
    ]


def sweep_rows(points: Sequence[SweepPoint], fraction_stages: Sequence[str]) -> List[List[Any]]:
    return [[p.attenuation_dB, p.n_mxc] + [p.fractions.get(s, 0.0) for s in fraction_stages] for p in points]


def dephasing_rows(table: Mapping[float, DephasingBounds]) -> List[List[Any]]:
    return [[db, b.t2_star, b.t2_echo] for db, b in table.items()]


# ---------------------------------------------------------------------------
# console tables
# ---------------------------------------------------------------------------


def _si(value: Optional[float], unit: str = "W") -> str:
    if value is None:
        return "-"
    if value == 0:
        return f"0 {unit}"
    for factor, prefix in ((1, ""), (1e-3, "m"), (1e-6, "µ"), (1e-9, "n"), (1e-12, "p")):
        if abs(value) >= factor:
            return f"{value / factor:.3g} {prefix}{unit}"
    return f"{value:.3g} {unit}"


def passive_table(profiles: Sequence[PassiveProfile], show_bounds: bool = True) -> Table:
    table = Table(title="Passive heat load per line")
    table.add_column("Line", style="cyan")
    stages: List[str] = []
    for profile in profiles:
        for stage in profile.stages:
            if stage not in stages:
                stages.append(stage)
    for stage in stages:
        table.add_column(stage, justify="right")
    for profile in profiles:
        cells = []
        for stage in stages:
            if stage not in profile.lower:
                cells.append("-")
                continue
            low, high = profile.bounds(stage)
            if show_bounds and not math.isclose(low, high, rel_tol=1e-9):
                cells.append(f"{_si(low)} .. {_si(high)}")
            else:
                cells.append(_si(0.5 * (low + high)))
        table.add_row(profile.line, *cells)
    return table


def budget_table(report: BudgetReport) -> Table:
    table = Table(title="Heat budget")
    table.add_column("Stage", style="cyan")
    for name in ("Passive", "Active", "Other", "Total", "Cooling", "Used"):
        table.add_column(name, justify="right")
    for s in report.stages:
        style = "red" if s.fraction > 1 else ("yellow" if s.fraction > 0.5 else "green")
        table.add_row(
            s.name,
            _si(s.passive),
            _si(s.active),
            _si(s.radiative + s.empirical),
            _si(s.total),
            _si(s.cooling_power),
            f"[{style}]{100 * s.fraction:.2f} %[/{style}]",
        )
    return table


def photon_table(profile: PhotonNumberProfile) -> Table:
    table = Table(title=f"Thermal photons at {profile.frequency / 1e9:.3g} GHz")
    table.add_column("After", style="cyan")
    table.add_column("n", justify="right")
    table.add_row("input", f"{profile.n_input:.4g}")
    for label, value in zip(profile.labels, profile.values):
        table.add_row(label, f"{value:.4g}")
    return table


def candidate_table(candidates: Sequence[ConfigCandidate], limit: int = 10) -> Table:
    table = Table(title="Attenuator placements")
    table.add_column("#", justify="right")
    table.add_column("Placement (dB)", style="cyan")
    table.add_column("n_MXC", justify="right")
    table.add_column("Worst stage", justify="right")
    for rank, c in enumerate(candidates[:limit], start=1):
        placement = " / ".join(f"{s} {v:g}" for s, v in zip(c.stages, c.values))
        worst = max(c.fractions, key=c.fractions.get) if c.fractions else "-"
        share = f"{worst} {100 * c.fractions[worst]:.2f} %" if c.fractions else "-"
        table.add_row(str(rank), placement, f"{c.n_mxc:.4g}", share)
    return table
