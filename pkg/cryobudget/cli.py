"""Command line interface for cryobudget."""

import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import click
import typer
from rich.panel import Panel
from typer.core import TyperGroup

from . import __version__
from .attenopt import (
    Objective,
    SearchConstraints,
    SearchContext,
    db_range,
    enumerate_configs,
    relax_continuous,
    sweep_single_stage,
)
from .budget import BudgetReport, PowerPlan, ScenarioResult
from .calibration import (
    DEFAULT_WINDOW,
    fit_effective_resistance,
    fit_reference,
    read_measurement_csv,
    read_resistance_csv,
    still_flow_normalize,
)
from .config import Project, attenuation_plan, attenuation_plans, load_project, resolve_settings
from .console import console, configure_logging, err_console
from .errors import ConfigError, CryoBudgetError
from .fridge import LineKind, LineSpec, with_attenuation
from .heatflow import line_passive_profile
from .noise import (
    AttenuatorChain,
    FluxCoupling,
    cascade_photon_number,
    chain_for_line,
    dephasing_table,
    detuning_flux,
    reference_attenuations,
)
from .reporting import (
    BREAKDOWN_COLUMNS,
    DEPHASING_COLUMNS,
    FRACTION_COLUMNS,
    STAGE_COLUMNS,
    budget_breakdown_rows,
    budget_fraction_rows,
    budget_line_rows,
    budget_noise_rows,
    budget_stage_rows,
    budget_table,
    candidate_header,
    candidate_rows,
    candidate_table,
    dephasing_rows,
    noise_header,
    passive_rows,
    passive_table,
    photon_rows,
    photon_table,
    sweep_rows,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)


class ExitCodeGroup(TyperGroup):
    """Maps usage errors to exit code 1 and library errors to their own codes."""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            rv = super().main(*args, **kwargs)
        except click.UsageError as exc:
            exc.show()
            sys.exit(1)
        except click.ClickException as exc:
            exc.show()
            sys.exit(exc.exit_code)
        except click.Abort:
            err_console.print("[red]Aborted.[/red]")
            sys.exit(1)
        except CryoBudgetError as exc:
            _report_error(exc)
            sys.exit(exc.exit_code)
        if isinstance(rv, int) and rv != 0:
            sys.exit(rv)
        return rv


def _report_error(exc: CryoBudgetError) -> None:
    where = ""
    if exc.path:
        where = f" ({exc.path}" + (f", line {exc.line}" if exc.line else "") + ")"
    err_console.print(f"[red]Error:[/red] {exc.message}{where}", highlight=False)
    typer.echo(json.dumps(exc.to_dict(), sort_keys=True), err=True)


app = typer.Typer(
    name="cryobudget",
    cls=ExitCodeGroup,
    help="Heat-load and thermal-noise budgets for cryogenic qubit wiring",
    rich_markup_mode="rich",
    no_args_is_help=True,
)


@dataclass
class State:
    out: Path


def _version_callback(value: bool) -> None:
    if value:
        console.print(f"cryobudget {__version__}")
        raise typer.Exit()


@app.callback()
def main_options(
    ctx: typer.Context,
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log debug messages to stderr"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for CSV and JSON output"),
    version: bool = typer.Option(
        False, "--version", callback=_version_callback, is_eager=True, help="Show the version and exit"
    ),
) -> None:
    """Heat-load and thermal-noise budgets for cryogenic qubit wiring."""
    configure_logging(verbose)
    settings = resolve_settings(out_dir=str(out) if out else None)
    ctx.obj = State(out=settings.out_dir)


def _out(ctx: typer.Context) -> Path:
    return ctx.obj.out if isinstance(ctx.obj, State) else Path(".")


def _project(
    config: Optional[Path], preset: Optional[str], catalog: Optional[Path] = None, frequency: Optional[float] = None
) -> Project:
    if config is None and preset is None:
        raise typer.BadParameter("give a config file or --preset")
    return load_project(config, preset=preset, catalog_path=catalog, frequency=frequency)


def parse_assignments(values: Optional[List[str]]) -> Dict[str, float]:
    """``["CP=0.05", "MXC=0.01,Still=0.01"]`` -> ``{"CP": 0.05, ...}``."""
    result: Dict[str, float] = {}
    for value in values or []:
        for item in value.split(","):
            item = item.strip()
            if not item:
                continue
            key, sep, number = item.partition("=")
            if not sep or not key.strip():
                raise typer.BadParameter(f"expected STAGE=VALUE, got '{item}'")
            try:
                result[key.strip()] = float(number)
            except ValueError:
                raise typer.BadParameter(f"'{number}' is not a number in '{item}'") from None
    return result


def parse_numbers(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise typer.BadParameter(f"expected comma-separated numbers, got '{value}'") from None


def _template_line(project: Project, name: Optional[str]) -> LineSpec:
    if name is not None:
        for line in project.inventory:
            if line.name == name:
                return line
        raise ConfigError(f"no line named '{name}' (lines: {', '.join(l.name for l in project.inventory)})")
    for line in project.inventory:
        if line.kind is LineKind.DRIVE:
            return line
    raise ConfigError("the project has no drive line; pick one with --line")


ConfigArg = typer.Argument(None, help="Project config file (JSON)", exists=True, dir_okay=False)
PresetOpt = typer.Option(None, "--preset", "-p", help="Start from a shipped preset")
CatalogOpt = typer.Option(None, "--catalog", help="Materials and cables catalog (JSON)")


@app.command()
def passive(
    ctx: typer.Context,
    config: Optional[Path] = ConfigArg,
    preset: Optional[str] = PresetOpt,
    catalog: Optional[Path] = CatalogOpt,
    bounds: bool = typer.Option(True, "--bounds/--no-bounds", help="Show lower and upper bounds"),
) -> None:
    """Passive heat load per line type and stage."""
    project = _project(config, preset, catalog)
    profiles = [line_passive_profile(line, project.fridge, project.assumption) for line in project.inventory]
    if profiles:
        console.print(passive_table(profiles, bounds))
    else:
        console.print("[yellow]The project has no lines.[/yellow]")
    path = write_csv(_out(ctx) / "passive.csv", STAGE_COLUMNS, passive_rows(profiles))
    console.print(f"[green]✓[/green] {path}")


@app.command()
def noise(
    ctx: typer.Context,
    config: Optional[Path] = ConfigArg,
    preset: Optional[str] = PresetOpt,
    catalog: Optional[Path] = CatalogOpt,
    freq: Optional[float] = typer.Option(None, "--freq", help="Signal frequency in Hz"),
    plan: Optional[str] = typer.Option(
        None, "--config", "-c", help="Attenuator plan: C1, C2, C3, C4 or 'custom' with --attenuation"
    ),
    attenuation: Optional[List[str]] = typer.Option(None, "--attenuation", "-a", help="STAGE=dB for a custom plan"),
    line_name: Optional[str] = typer.Option(None, "--line", help="Line whose chain is used (default: first drive)"),
    with_cable_loss: bool = typer.Option(False, "--with-cable-loss", help="Include cable attenuation"),
    dephasing: bool = typer.Option(False, "--dephasing", help="Also bound T2 from flux-line current noise"),
    flux_attenuation: str = typer.Option("0,10,20", "--flux-attenuation", help="Flux-line attenuations to compare, dB"),
    flux_stage: str = typer.Option("4K", "--flux-stage", help="Stage holding the flux-line attenuator"),
    mutual_inductance: float = typer.Option(0.5, "--mutual-inductance", help="Flux quanta per mA"),
    detuning: float = typer.Option(0.1, "--detuning", help="Fractional detuning from the sweet spot"),
    sweet_spot: float = typer.Option(5e9, "--sweet-spot", help="Sweet-spot qubit frequency, Hz"),
) -> None:
    """Thermal photon number along a drive line, optionally with flux-noise dephasing bounds."""
    project = _project(config, preset or ("basefridge" if config is None else None), catalog, freq)
    frequency = project.plan.noise_frequency

    stage_plan: Optional[Dict[str, float]] = None
    if plan == "custom":
        stage_plan = parse_assignments(attenuation)
        if not stage_plan:
            raise typer.BadParameter("--config custom needs --attenuation STAGE=dB")
    elif plan is not None:
        stage_plan = attenuation_plan(plan)

    if stage_plan is not None and not with_cable_loss and not project.inventory:
        chain = AttenuatorChain.from_plan(project.fridge, stage_plan)
    else:
        line = _template_line(project, line_name)
        if stage_plan is not None:
            line = with_attenuation(line, stage_plan)
        chain = chain_for_line(line, project.fridge, frequency, with_cable_loss)

    profile = cascade_photon_number(chain, frequency)
    console.print(photon_table(profile))
    references = reference_attenuations(project.fridge, frequency)
    console.print(
        "Reference attenuation: " + ", ".join(f"{name} {db:.1f} dB" for name, db in references.items()),
        highlight=False,
    )
    console.print(Panel(f"n_MXC = {profile.n_mxc:.4g}", title=plan or "line", border_style="cyan"))
    path = write_csv(_out(ctx) / "noise.csv", ["element", "n"], photon_rows(profile))
    console.print(f"[green]✓[/green] {path}")

    if dephasing:
        coupling = FluxCoupling(mutual_inductance, 2 * math.pi * sweet_spot, detuning_flux(detuning))
        table = dephasing_table(
            parse_numbers(flux_attenuation),
            coupling,
            T_RT=project.fridge.room_temperature,
            T_4K=project.fridge.temperature(flux_stage),
        )
        for db, bounds in table.items():
            if bounds.is_unbounded:
                console.print(f"{db:g} dB at {flux_stage}: no first-order flux dephasing", highlight=False)
            else:
                console.print(
                    f"{db:g} dB at {flux_stage}: T2* <= {bounds.t2_star * 1e6:.4g} µs, "
                    f"T2 echo <= {bounds.t2_echo * 1e6:.4g} µs",
                    highlight=False,
                )
        path = write_csv(_out(ctx) / "dephasing.csv", DEPHASING_COLUMNS, dephasing_rows(table))
        console.print(f"[green]✓[/green] {path}")


def _budget_document(project: Project, result, report: BudgetReport) -> dict:
    document = report.to_dict()
    document["preset"] = project.config.preset
    document["passive_source"] = project.config.passive_source.value
    if isinstance(result, ScenarioResult):
        document["diameter_scale"] = result.diameter_scale
    return document


@app.command()
def budget(
    ctx: typer.Context,
    config: Optional[Path] = ConfigArg,
    preset: Optional[str] = typer.Option(None, "--preset", "-p", help="fig9, asbuilt, outlook1000, scale047, ..."),
    catalog: Optional[Path] = CatalogOpt,
    freq: Optional[float] = typer.Option(None, "--freq", help="Frequency for the photon number, Hz"),
) -> None:
    """Full heat budget of a wiring inventory."""
    project = _project(config, preset, catalog, freq)
    result = project.run_budget()
    report = result.report if isinstance(result, ScenarioResult) else result

    console.print(budget_table(report))
    if report.n_mxc is not None:
        console.print(f"n_MXC (drive line): {report.n_mxc:.4g}")
    if report.predicted_temperatures:
        temps = ", ".join(f"{k} {v * 1e3:.1f} mK" if v < 1 else f"{k} {v:.3g} K"
                          for k, v in report.predicted_temperatures.items())
        console.print(f"Predicted plate temperatures: {temps}", highlight=False)
    if report.max_qubit_estimate is not None:
        console.print(Panel(f"Room for about {report.max_qubit_estimate} qubits", border_style="green"))

    out = _out(ctx)
    write_json(out / "budget.json", _budget_document(project, result, report))
    write_csv(out / "budget_stages.csv", STAGE_COLUMNS, budget_stage_rows(report))
    write_csv(out / "budget_lines.csv", STAGE_COLUMNS, budget_line_rows(report))
    write_csv(out / "budget_breakdown.csv", BREAKDOWN_COLUMNS, budget_breakdown_rows(report))
    write_csv(out / "budget_fractions.csv", FRACTION_COLUMNS, budget_fraction_rows(report))
    stages = [s.name for s in report.stages]
    write_csv(out / "budget_noise.csv", noise_header(stages), budget_noise_rows(report, stages))
    console.print(f"[green]✓[/green] report written to {out}")


@app.command()
def fit(
    ctx: typer.Context,
    files: List[Path] = typer.Argument(..., help="Measurement CSV files", exists=True, dir_okay=False),
    kind: str = typer.Option("reference", "--kind", "-k", help="reference or resistance"),
    window: float = typer.Option(DEFAULT_WINDOW, "--window", help="Largest relative temperature rise used"),
    output: Optional[Path] = typer.Option(None, "--output", help="Coefficients file (default: OUT/coefficients.json)"),
) -> None:
    """Fit response coefficients or an effective flux-line resistance."""
    target = output or _out(ctx) / "coefficients.json"
    if kind == "reference":
        series = [read_measurement_csv(path) for path in files]
        coeffs = fit_reference(series, window)
        for stage, value in coeffs.dP_dT.items():
            console.print(f"{stage}: dP/dT = {value:.4g} W/K", highlight=False)
        validity = still_flow_normalize(coeffs)
        console.print(f"[{'green' if validity.valid else 'yellow'}]{validity.message}[/]")
        write_json(target, coeffs.to_dict())
    elif kind == "resistance":
        points = [p for path in files for p in read_resistance_csv(path)]
        result = fit_effective_resistance(points)
        console.print(f"R_eff = {result.r_eff:.4g} Ω ± {result.std_error:.2g}", highlight=False)
        write_json(target, {"r_eff_ohm": result.r_eff, "std_error_ohm": result.std_error, "points": len(points)})
    else:
        raise typer.BadParameter(f"--kind must be 'reference' or 'resistance', got '{kind}'")
    console.print(f"[green]✓[/green] {target}")


def _search_context(project: Project, line_name: Optional[str], with_cable_loss: bool) -> SearchContext:
    line = _template_line(project, line_name)
    drive = project.plan.powers.get(line.kind) or PowerPlan(None)
    return SearchContext(
        fridge=project.fridge,
        line_template=line,
        line_count=line.count,
        drive_plan=drive,
        frequency=project.plan.noise_frequency,
        with_cable_loss=with_cable_loss,
    )


@app.command()
def optimize(
    ctx: typer.Context,
    config: Optional[Path] = ConfigArg,
    preset: Optional[str] = PresetOpt,
    catalog: Optional[Path] = CatalogOpt,
    line_name: Optional[str] = typer.Option(None, "--line", help="Line to place attenuators on"),
    total_db: float = typer.Option(60.0, "--total-db", help="Total attenuation to distribute"),
    allowed: str = typer.Option("0,10,20,30", "--allowed", help="Allowed attenuator values, dB"),
    max_fraction: Optional[List[str]] = typer.Option(
        None, "--max-fraction", help="STAGE=FRACTION limit on drive dissipation"
    ),
    max_attenuators: Optional[int] = typer.Option(None, "--max-attenuators", help="Most attenuators per line"),
    objective: Objective = typer.Option(Objective.MIN_N_MXC, "--objective", case_sensitive=False),
    count_penalty: bool = typer.Option(False, "--count-penalty", help="Prefer fewer attenuators on ties"),
    continuous: bool = typer.Option(False, "--continuous", help="Also refine with real-valued attenuations"),
    with_cable_loss: bool = typer.Option(False, "--with-cable-loss", help="Include cable attenuation in n_MXC"),
    top: int = typer.Option(10, "--top", help="Rows shown on the console"),
) -> None:
    """Rank attenuator placements by photon number under heat-load limits."""
    project = _project(config, preset, catalog)
    context = _search_context(project, line_name, with_cable_loss)
    constraints = SearchConstraints(
        total_dB=total_db,
        allowed_values=tuple(parse_numbers(allowed)),
        max_fraction=parse_assignments(max_fraction),
        max_attenuators=max_attenuators,
        objective=objective,
        count_penalty=count_penalty,
    )
    unknown = set(constraints.max_fraction) - set(project.fridge.stage_names)
    if unknown:
        raise ConfigError(f"--max-fraction names unknown stages: {sorted(unknown)}")

    candidates = enumerate_configs(constraints, context)
    stages = project.fridge.stage_names
    path = write_csv(
        _out(ctx) / "optimize.csv", candidate_header(context.stages, stages), candidate_rows(candidates, stages)
    )
    if not candidates:
        console.print("[yellow]No placement satisfies the constraints.[/yellow]")
    else:
        console.print(candidate_table(candidates, top))
        plans = attenuation_plans()
        best = candidates[0].config
        named = [name for name, p in plans.items() if all(abs(p.get(s, 0.0) - best[s]) < 1e-9 for s in best)]
        if named:
            console.print(f"Best placement matches plan {', '.join(named)}")
    if continuous:
        relaxed = relax_continuous(constraints, context)
        if relaxed is not None:
            placement = ", ".join(f"{s} {v:.2f} dB" for s, v in relaxed.config.items())
            console.print(f"Continuous optimum: {placement} (n_MXC {relaxed.n_mxc:.4g})", highlight=False)
    console.print(f"[green]✓[/green] {path}")


@app.command()
def sweep(
    ctx: typer.Context,
    config: Optional[Path] = ConfigArg,
    preset: Optional[str] = PresetOpt,
    catalog: Optional[Path] = CatalogOpt,
    stage: str = typer.Option(..., "--stage", "-s", help="Stage whose attenuation is varied"),
    start: float = typer.Option(0.0, "--from", help="First attenuation, dB"),
    stop: float = typer.Option(40.0, "--to", help="Last attenuation, dB"),
    step: float = typer.Option(1.0, "--step", help="Increment, dB"),
    fixed: Optional[List[str]] = typer.Option(
        None, "--fixed", help="STAGE=dB for the other stages (default: the line's own attenuators)"
    ),
    line_name: Optional[str] = typer.Option(None, "--line", help="Line to sweep (default: first drive)"),
    with_cable_loss: bool = typer.Option(False, "--with-cable-loss", help="Include cable attenuation in n_MXC"),
) -> None:
    """Photon number and drive heating as one stage's attenuation varies."""
    project = _project(config, preset, catalog)
    context = _search_context(project, line_name, with_cable_loss)
    others = context.line_template.attenuation_plan()
    others.update(parse_assignments(fixed))
    points = sweep_single_stage(stage, db_range(start, stop, step), others, context)
    stages = project.fridge.stage_names
    path = write_csv(
        _out(ctx) / f"sweep_{stage}.csv",
        ["attenuation_dB", "n_mxc"] + [f"fraction_{s}" for s in stages],
        sweep_rows(points, stages),
    )
    if points:
        console.print(
            f"{stage}: n_MXC {points[0].n_mxc:.4g} at {points[0].attenuation_dB:g} dB, "
            f"{points[-1].n_mxc:.4g} at {points[-1].attenuation_dB:g} dB",
            highlight=False,
        )
    console.print(f"[green]✓[/green] {path} ({len(points)} points)")


def main() -> None:
    app()


if __name__ == "__main__":
    main()
