"""Command line interface: scenario loading, single runs, parameter sweeps.

Scenario files are YAML documents carrying the simulation parameters plus
either an inline procedural layout or a grid-file path, an optional sweep
section (per-parameter value lists over walkers / drivers / obstruction),
and an optional seed list.  Every run directory receives the fully resolved
effective config so the run can be reproduced from it exactly.
"""
from __future__ import annotations

import dataclasses
import itertools
import multiprocessing
import shutil
import statistics
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import click
import yaml

from .engine import SimConfig, SimulationResult, run
from .environment import (
    GridMap,
    LayoutSpec,
    generate_layout,
    parse_grid,
    parse_obstacle_list,
    serialize_grid,
    serialize_obstacle_list,
)
from .metrics import export_run
from .planner import BehaviorProfile, plan as plan_route

SWEEPABLE = ("walkers", "drivers", "obstruction")

_SCENARIO_KEYS = {
    "steps", "walkers", "drivers", "obstruction", "spawn_mode",
    "walker_rate", "driver_rate", "profiles", "walker_speed_cap",
    "collision_countdown", "sensing", "accel", "decel", "reactivation_prob",
    "seed", "layout", "grid", "obstacles", "sweep", "seeds",
}
_PROFILE_KEYS = {"w", "alpha", "max_speed"}
_SENSING_KEYS = {"lookahead", "radius", "yield_radius"}
_LAYOUT_KEYS = {"blocks_x", "blocks_y", "block_side", "building_side", "lanes_per_direction"}


class ConfigError(ValueError):
    """Scenario file failed validation; message names the offending field."""


@dataclass
class Scenario:
    sim: SimConfig
    layout: LayoutSpec | None
    grid_path: Path | None
    obstacles_path: Path | None
    sweep: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)


def _as_range(value, name: str) -> tuple:
    if isinstance(value, (int, float)):
        return (value, value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return (value[0], value[1])
    raise ConfigError(f"{name}: expected a number or a [low, high] pair")


def load_config(path) -> Scenario:
    """Load and validate a scenario file, applying documented defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("scenario file must be a mapping")
    for key in raw:
        if key not in _SCENARIO_KEYS:
            raise ConfigError(f"unknown scenario field {key!r}")

    kwargs: dict = {}
    for name in ("steps", "walkers", "drivers", "collision_countdown", "seed"):
        if name in raw:
            kwargs[name] = int(raw[name])
    for name in (
        "obstruction", "walker_rate", "driver_rate", "accel", "decel",
        "reactivation_prob",
    ):
        if name in raw:
            kwargs[name] = float(raw[name])
    if "spawn_mode" in raw:
        kwargs["spawn_mode"] = str(raw["spawn_mode"])
    if "walker_speed_cap" in raw:
        cap = raw["walker_speed_cap"]
        kwargs["walker_speed_cap"] = None if cap is None else float(cap)

    profiles = raw.get("profiles", {}) or {}
    if not isinstance(profiles, dict):
        raise ConfigError("profiles: expected a mapping")
    for kind in profiles:
        if kind not in ("walker", "driver"):
            raise ConfigError(f"profiles: unknown agent kind {kind!r}")
        section = profiles[kind] or {}
        for key in section:
            if key not in _PROFILE_KEYS:
                raise ConfigError(f"profiles.{kind}: unknown field {key!r}")
        if "w" in section:
            lo, hi = _as_range(section["w"], f"profiles.{kind}.w")
            kwargs[f"{kind}_w"] = (int(lo), int(hi))
        if "alpha" in section:
            lo, hi = _as_range(section["alpha"], f"profiles.{kind}.alpha")
            kwargs[f"{kind}_alpha"] = (float(lo), float(hi))
        if "max_speed" in section:
            kwargs[f"{kind}_max_speed"] = float(section["max_speed"])

    sensing = raw.get("sensing", {}) or {}
    if not isinstance(sensing, dict):
        raise ConfigError("sensing: expected a mapping")
    for key in sensing:
        if key not in _SENSING_KEYS:
            raise ConfigError(f"sensing: unknown field {key!r}")
    if "lookahead" in sensing:
        kwargs["lookahead"] = int(sensing["lookahead"])
    if "radius" in sensing:
        kwargs["sense_radius"] = float(sensing["radius"])
    if "yield_radius" in sensing:
        kwargs["yield_radius"] = float(sensing["yield_radius"])

    try:
        sim = SimConfig(**kwargs)
        sim.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    has_layout = "layout" in raw
    has_grid = "grid" in raw
    if has_layout == has_grid:
        raise ConfigError("exactly one of 'layout' or 'grid' must be present")
    layout = None
    grid_path = None
    obstacles_path = None
    if has_layout:
        section = raw["layout"] or {}
        if not isinstance(section, dict):
            raise ConfigError("layout: expected a mapping")
        for key in section:
            if key not in _LAYOUT_KEYS:
                raise ConfigError(f"layout: unknown field {key!r}")
        try:
            layout = LayoutSpec(
                blocks_x=int(section.get("blocks_x", 1)),
                blocks_y=int(section.get("blocks_y", 1)),
                block_side=int(section.get("block_side", 15)),
                building_side=int(section.get("building_side", 13)),
                lanes_per_direction=int(section.get("lanes_per_direction", 2)),
            )
            layout.validate()
        except ValueError as exc:
            raise ConfigError(f"layout: {exc}") from None
        if "obstacles" in raw:
            raise ConfigError("'obstacles' requires a 'grid' file, not a layout")
    else:
        grid_path = (path.parent / str(raw["grid"])).resolve()
        if not grid_path.is_file():
            raise ConfigError(f"grid file not found: {grid_path}")
        if "obstacles" in raw:
            obstacles_path = (path.parent / str(raw["obstacles"])).resolve()
            if not obstacles_path.is_file():
                raise ConfigError(f"obstacle list not found: {obstacles_path}")

    sweep = raw.get("sweep", {}) or {}
    if not isinstance(sweep, dict):
        raise ConfigError("sweep: expected a mapping")
    for key, values in sweep.items():
        if key not in SWEEPABLE:
            raise ConfigError(f"sweep: unknown parameter {key!r}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{key}: expected a non-empty list")

    seeds = raw.get("seeds", [])
    if seeds and (not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds)):
        raise ConfigError("seeds: expected a list of integers")

    return Scenario(
        sim=sim,
        layout=layout,
        grid_path=grid_path,
        obstacles_path=obstacles_path,
        sweep={k: list(v) for k, v in sweep.items()},
        seeds=list(seeds),
    )


def build_grid(scenario: Scenario) -> GridMap:
    """Base map for a scenario; run-time obstruction is applied by the engine."""
    if scenario.layout is not None:
        return generate_layout(scenario.layout)
    grid = parse_grid(scenario.grid_path.read_text(encoding="utf-8"))
    if scenario.obstacles_path is not None:
        coords = parse_obstacle_list(scenario.obstacles_path.read_text(encoding="utf-8"))
        grid = grid.with_obstacles(grid.obstacles | coords)
    return grid


def effective_config_dict(scenario: Scenario, sim: SimConfig) -> dict:
    """Fully resolved single-run scenario, reloadable by load_config."""
    doc = {
        "steps": sim.steps,
        "walkers": sim.walkers,
        "drivers": sim.drivers,
        "obstruction": sim.obstruction,
        "spawn_mode": sim.spawn_mode,
        "walker_rate": sim.walker_rate,
        "driver_rate": sim.driver_rate,
        "profiles": {
            "walker": {
                "w": list(sim.walker_w),
                "alpha": list(sim.walker_alpha),
                "max_speed": sim.walker_max_speed,
            },
            "driver": {
                "w": list(sim.driver_w),
                "alpha": list(sim.driver_alpha),
                "max_speed": sim.driver_max_speed,
            },
        },
        "walker_speed_cap": sim.walker_speed_cap,
        "collision_countdown": sim.collision_countdown,
        "sensing": {
            "lookahead": sim.lookahead,
            "radius": sim.sense_radius,
            "yield_radius": sim.yield_radius,
        },
        "accel": sim.accel,
        "decel": sim.decel,
        "reactivation_prob": sim.reactivation_prob,
        "seed": sim.seed,
    }
    if scenario.layout is not None:
        doc["layout"] = {
            "blocks_x": scenario.layout.blocks_x,
            "blocks_y": scenario.layout.blocks_y,
            "block_side": scenario.layout.block_side,
            "building_side": scenario.layout.building_side,
            "lanes_per_direction": scenario.layout.lanes_per_direction,
        }
    else:
        doc["grid"] = "map.grid"
        if scenario.obstacles_path is not None:
            doc["obstacles"] = "obstacles.txt"
    return doc


def _echo_config(scenario: Scenario, sim: SimConfig, out_dir: Path) -> None:
    doc = effective_config_dict(scenario, sim)
    if scenario.grid_path is not None:
        shutil.copyfile(scenario.grid_path, out_dir / "map.grid")
        if scenario.obstacles_path is not None:
            shutil.copyfile(scenario.obstacles_path, out_dir / "obstacles.txt")
    (out_dir / "config.yaml").write_text(
        yaml.safe_dump(doc, sort_keys=True, default_flow_style=False),
        encoding="utf-8",
    )


def execute_run(
    scenario: Scenario,
    out_dir,
    seed: int | None = None,
    steps: int | None = None,
    overrides: dict | None = None,
) -> SimulationResult:
    """Run one scenario point and write its outputs under out_dir."""
    sim = scenario.sim
    changes: dict = dict(overrides or {})
    if seed is not None:
        changes["seed"] = seed
    if steps is not None:
        changes["steps"] = steps
    if changes:
        sim = dataclasses.replace(sim, **changes)
    sim.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = build_grid(scenario)
    result = run(sim, grid)
    export_run(result, out)
    _echo_config(scenario, sim, out)
    return result


def point_label(point: dict, sim: SimConfig) -> str:
    walkers = point.get("walkers", sim.walkers)
    drivers = point.get("drivers", sim.drivers)
    obstruction = point.get("obstruction", sim.obstruction)
    pct = format(obstruction * 100, "g")
    return f"w{walkers}_d{drivers}_o{pct}"


def sweep_points(scenario: Scenario) -> list[dict]:
    """Cartesian product of the sweep value lists, in declaration order."""
    keys = [k for k in SWEEPABLE if k in scenario.sweep]
    if not keys:
        return [{}]
    products = itertools.product(*(scenario.sweep[k] for k in keys))
    return [dict(zip(keys, combo)) for combo in products]


@dataclass
class RunTask:
    scenario: Scenario
    point: dict
    seed: int
    out_dir: str
    steps: int | None


@dataclass
class TaskOutcome:
    point: dict
    seed: int
    ok: bool
    error: str = ""
    mean_driver_speed: float | None = None
    jaywalk_entries: int = 0
    collisions_vv: int = 0
    runovers: int = 0


def _run_task(task: RunTask) -> TaskOutcome:
    out = Path(task.out_dir)
    try:
        result = execute_run(
            task.scenario, out, seed=task.seed, steps=task.steps, overrides=task.point
        )
        return TaskOutcome(
            point=task.point,
            seed=task.seed,
            ok=True,
            mean_driver_speed=result.mean_driver_speed,
            jaywalk_entries=result.total_jaywalk_entries,
            collisions_vv=result.total_collisions_vv,
            runovers=result.total_runovers,
        )
    except Exception as exc:  # noqa: BLE001 - the sweep must keep going
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.txt").write_text(
            f"{exc}\n\n{traceback.format_exc()}", encoding="utf-8"
        )
        return TaskOutcome(point=task.point, seed=task.seed, ok=False, error=str(exc))


def _mean_std(values: list) -> tuple[str, str]:
    if not values:
        return "", ""
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return repr(float(mean)), repr(float(std))


def render_summary_csv(scenario: Scenario, points: list, outcomes: list) -> str:
    header = (
        "walkers,drivers,obstruction,seeds,"
        "mean_driver_speed_mean,mean_driver_speed_std,"
        "jaywalk_entries_mean,jaywalk_entries_std,"
        "collisions_vv_mean,collisions_vv_std,"
        "runovers_mean,runovers_std"
    )
    lines = [header]
    sim = scenario.sim
    for point in points:
        ok_runs = [o for o in outcomes if o.point == point and o.ok]
        walkers = point.get("walkers", sim.walkers)
        drivers = point.get("drivers", sim.drivers)
        obstruction = point.get("obstruction", sim.obstruction)
        speed_m, speed_s = _mean_std(
            [o.mean_driver_speed for o in ok_runs if o.mean_driver_speed is not None]
        )
        jay_m, jay_s = _mean_std([float(o.jaywalk_entries) for o in ok_runs])
        col_m, col_s = _mean_std([float(o.collisions_vv) for o in ok_runs])
        run_m, run_s = _mean_std([float(o.runovers) for o in ok_runs])
        lines.append(
            f"{walkers},{drivers},{format(obstruction, 'g')},{len(ok_runs)},"
            f"{speed_m},{speed_s},{jay_m},{jay_s},{col_m},{col_s},{run_m},{run_s}"
        )
    return "\n".join(lines) + "\n"


def execute_sweep(
    scenario: Scenario,
    out_dir,
    seeds: list | None = None,
    parallel: int = 1,
    steps: int | None = None,
) -> tuple[list, list]:
    """Run the sweep product x seeds; returns (points, outcomes)."""
    seeds = list(seeds) if seeds else (scenario.seeds or [scenario.sim.seed])
    out = Path(out_dir)
    points = sweep_points(scenario)
    tasks = [
        RunTask(
            scenario=scenario,
            point=point,
            seed=seed,
            out_dir=str(out / point_label(point, scenario.sim) / f"seed{seed}"),
            steps=steps,
        )
        for point in points
        for seed in seeds
    ]
    if parallel > 1:
        with multiprocessing.Pool(parallel) as pool:
            outcomes = pool.map(_run_task, tasks)
    else:
        outcomes = [_run_task(t) for t in tasks]
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(
        render_summary_csv(scenario, points, outcomes), encoding="utf-8", newline="\n"
    )
    return points, outcomes


# -- command line -------------------------------------------------------------


@click.group()
def main():
    """Deterministic urban mobility simulator on a grid-encoded city."""


def _load_or_exit(config_path) -> Scenario:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--steps", type=int, default=None, help="Override the step count.")
@click.option("--out", "out_dir", type=click.Path(), default="out", show_default=True)
def run_command(config_path, seed, steps, out_dir):
    """Execute a single scenario and write metrics, events and heatmaps."""
    scenario = _load_or_exit(config_path)
    try:
        result = execute_run(scenario, out_dir, seed=seed, steps=steps)
    except Exception as exc:  # noqa: BLE001
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(1)
    click.echo(
        f"completed {result.config.steps} steps; "
        f"jaywalk entries {result.total_jaywalk_entries}, "
        f"collisions {result.total_collisions_vv}, runovers {result.total_runovers}"
    )
    for warning in result.warnings[:5]:
        click.echo(f"warning: {warning}", err=True)


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seeds", "seeds_csv", default=None, help="Comma-separated seed list.")
@click.option("--steps", type=int, default=None, help="Override the step count.")
@click.option("--out", "out_dir", type=click.Path(), default="sweep_out", show_default=True)
@click.option("--parallel", type=int, default=1, show_default=True)
def sweep_command(config_path, seeds_csv, steps, out_dir, parallel):
    """Execute the scenario's sweep grid across seeds and summarize."""
    scenario = _load_or_exit(config_path)
    seeds = None
    if seeds_csv:
        try:
            seeds = [int(s) for s in seeds_csv.split(",") if s.strip()]
        except ValueError:
            click.echo("config error: --seeds must be comma-separated integers", err=True)
            sys.exit(2)
    points, outcomes = execute_sweep(
        scenario, out_dir, seeds=seeds, parallel=parallel, steps=steps
    )
    failures = [o for o in outcomes if not o.ok]
    click.echo(
        f"{len(points)} sweep points, {len(outcomes)} runs, {len(failures)} failed"
    )
    for failure in failures:
        click.echo(
            f"failed: {point_label(failure.point, scenario.sim)} seed {failure.seed}: "
            f"{failure.error}",
            err=True,
        )
    if failures:
        sys.exit(1)


@main.command("gen-map")
@click.option("--blocks-x", type=int, required=True)
@click.option("--blocks-y", type=int, required=True)
@click.option("--block-side", type=int, default=15, show_default=True)
@click.option("--building-side", type=int, default=13, show_default=True)
@click.option("--lanes", type=int, default=2, show_default=True)
@click.option("--obstruction", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def gen_map_command(blocks_x, blocks_y, block_side, building_side, lanes,
                    obstruction, seed, out_path):
    """Generate a block layout and write it as a grid file."""
    spec = LayoutSpec(
        blocks_x=blocks_x,
        blocks_y=blocks_y,
        block_side=block_side,
        building_side=building_side,
        lanes_per_direction=lanes,
        obstruction_fraction=obstruction,
        seed=seed,
    )
    try:
        grid = generate_layout(spec)
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(serialize_grid(grid), encoding="utf-8", newline="\n")
    click.echo(f"wrote {grid.width}x{grid.height} grid to {out}")
    if grid.obstacles:
        sidecar = out.with_suffix(out.suffix + ".obstacles")
        sidecar.write_text(
            serialize_obstacle_list(grid.obstacles), encoding="utf-8", newline="\n"
        )
        click.echo(f"wrote {len(grid.obstacles)} obstacles to {sidecar}")


@main.command("plan-debug")
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--grid", "grid_path", default=None, type=click.Path())
@click.option("--kind", type=click.Choice(["walker", "driver"]), required=True)
@click.option("--start", "start_s", required=True, help="x,y")
@click.option("--goal", "goal_s", required=True, help="x,y")
@click.option("-w", "--weight", type=float, default=1.0, show_default=True)
@click.option("--alpha", type=float, default=0.0, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="Trace CSV destination (stdout when omitted).")
def plan_debug_command(config_path, grid_path, kind, start_s, goal_s, weight,
                       alpha, out_path):
    """Plan one route and dump the expanded-node trace as CSV."""
    if (config_path is None) == (grid_path is None):
        click.echo("config error: give exactly one of --config or --grid", err=True)
        sys.exit(2)
    if config_path is not None:
        scenario = _load_or_exit(config_path)
        grid = build_grid(scenario)
    else:
        p = Path(grid_path)
        if not p.is_file():
            click.echo(f"config error: grid file not found: {p}", err=True)
            sys.exit(2)
        grid = parse_grid(p.read_text(encoding="utf-8"))

    def parse_coord(text, name):
        parts = text.split(",")
        if len(parts) != 2:
            click.echo(f"config error: {name} must be 'x,y'", err=True)
            sys.exit(2)
        return (int(parts[0]), int(parts[1]))

    start = parse_coord(start_s, "--start")
    goal = parse_coord(goal_s, "--goal")
    profile = BehaviorProfile(kind=kind, w=weight, alpha=alpha)
    trace: list = []
    try:
        route = plan_route(grid, start, goal, profile, trace=trace)
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    lines = ["step,x,y,g,h,r,f"]
    for step, x, y, g, h, r, f in trace:
        lines.append(f"{step},{x},{y},{g!r},{h},{r!r},{f!r}")
    content = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(content, encoding="utf-8", newline="\n")
        click.echo(f"wrote {len(trace)} expansions to {out_path}")
    else:
        click.echo(content, nl=False)
    if route is None:
        click.echo("no route found", err=True)
        sys.exit(1)
    click.echo(
        f"route: {len(route)} cells, cost {route.total_cost!r}, "
        f"risk {route.risk_total!r}, {route.expansions} expansions",
        err=True,
    )


if __name__ == "__main__":
    main()
