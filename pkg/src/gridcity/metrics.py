"""Per-step performance indicators, per-cell heatmap layers, CSV export.

Jaywalking is tracked two ways: entry events (a walker's cell switching from
non-road to road ground this step) and occupancy (walkers currently on road
ground).  Road ground for this purpose is road, turn, left-turn and pothole
cells; zebras and parking lots are lawful pedestrian area.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agents import Status
from .environment import Coord, GridMap, ROAD_FAMILY

METRICS_COLUMNS = (
    "step",
    "active_walkers",
    "active_drivers",
    "mean_driver_speed",
    "jaywalk_entries",
    "walkers_on_road",
    "collisions_vv",
    "runovers",
)

EVENT_COLUMNS = ("step", "event_type", "agent_a", "agent_b", "x", "y")

HEATMAP_KINDS = ("driver_occupancy", "driver_speed", "walker_occupancy", "jaywalk")


def cell_of(position: tuple[float, float]) -> Coord:
    return (int(math.floor(position[0])), int(math.floor(position[1])))


@dataclass(frozen=True)
class MetricsFrame:
    """One step's aggregate indicators."""

    step: int
    active_walkers: int
    active_drivers: int
    mean_driver_speed: float | None  # absent (None) when no driver is active
    jaywalk_entries: int
    walkers_on_road: int
    collisions_vv: int
    runovers: int


class HeatmapLayer:
    """Per-cell accumulator for one spatial metric.

    The driver-speed layer keeps (sum, count) pairs so the per-cell mean is
    exact; all other layers are plain counts.
    """

    def __init__(self, kind: str, width: int, height: int):
        if kind not in HEATMAP_KINDS:
            raise ValueError(f"unknown heatmap kind {kind!r}")
        self.kind = kind
        self.width = width
        self.height = height
        if kind == "driver_speed":
            self.sums = np.zeros((height, width), dtype=np.float64)
            self.counts = np.zeros((height, width), dtype=np.int64)
        else:
            self.counts = np.zeros((height, width), dtype=np.int64)
            self.sums = None

    def add(self, cell: Coord, value: float = 1.0) -> None:
        x, y = cell
        if self.sums is not None:
            self.sums[y, x] += value
            self.counts[y, x] += 1
        else:
            self.counts[y, x] += int(value)

    def value_at(self, cell: Coord) -> float:
        x, y = cell
        if self.sums is not None:
            n = self.counts[y, x]
            return float(self.sums[y, x] / n) if n else 0.0
        return float(self.counts[y, x])

    def total(self) -> float:
        if self.sums is not None:
            return float(self.sums.sum())
        return float(self.counts.sum())


@dataclass
class HeatmapSet:
    driver_occupancy: HeatmapLayer
    driver_speed: HeatmapLayer
    walker_occupancy: HeatmapLayer
    jaywalk: HeatmapLayer

    @classmethod
    def create(cls, grid: GridMap) -> "HeatmapSet":
        w, h = grid.width, grid.height
        return cls(
            driver_occupancy=HeatmapLayer("driver_occupancy", w, h),
            driver_speed=HeatmapLayer("driver_speed", w, h),
            walker_occupancy=HeatmapLayer("walker_occupancy", w, h),
            jaywalk=HeatmapLayer("jaywalk", w, h),
        )

    def layers(self) -> dict:
        return {
            "driver_occupancy": self.driver_occupancy,
            "driver_speed": self.driver_speed,
            "walker_occupancy": self.walker_occupancy,
            "jaywalk": self.jaywalk,
        }


def build_frame(step, agents, pre_cells, events, grid) -> tuple[MetricsFrame, list[int]]:
    """Aggregate one step; also returns the ids of walkers that entered road
    ground this step (for event logging)."""
    active_walkers = 0
    active_drivers = 0
    speed_sum = 0.0
    on_road = 0
    entries: list[int] = []
    for agent in agents.values():
        if agent.status is not Status.ACTIVE:
            continue
        if agent.kind == "driver":
            active_drivers += 1
            speed_sum += agent.speed
            continue
        active_walkers += 1
        now = agent.cell()
        now_road = grid.ground_at(now) in ROAD_FAMILY
        if now_road:
            on_road += 1
            before = pre_cells.get(agent.id)
            if before is not None and grid.ground_at(before) not in ROAD_FAMILY:
                entries.append(agent.id)
    collisions_vv = sum(1 for e in events if e.kind == "collision_vv")
    runovers = sum(1 for e in events if e.kind == "runover")
    frame = MetricsFrame(
        step=step,
        active_walkers=active_walkers,
        active_drivers=active_drivers,
        mean_driver_speed=(speed_sum / active_drivers) if active_drivers else None,
        jaywalk_entries=len(entries),
        walkers_on_road=on_road,
        collisions_vv=collisions_vv,
        runovers=runovers,
    )
    return frame, entries


def accumulate_heatmaps(layers: HeatmapSet, agents, grid: GridMap) -> HeatmapSet:
    """Add one step's active-agent occupancy and speed samples to the layers."""
    for layer in layers.layers().values():
        if layer.width != grid.width or layer.height != grid.height:
            raise ValueError(
                f"heatmap layer {layer.kind} is {layer.width}x{layer.height}, "
                f"grid is {grid.width}x{grid.height}"
            )
    for agent in agents.values():
        if agent.status is not Status.ACTIVE:
            continue
        cell = agent.cell()
        if agent.kind == "driver":
            layers.driver_occupancy.add(cell)
            layers.driver_speed.add(cell, agent.speed)
        else:
            layers.walker_occupancy.add(cell)
            if grid.ground_at(cell) in ROAD_FAMILY:
                layers.jaywalk.add(cell)
    return layers


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_metrics_csv(frames) -> str:
    lines = [",".join(METRICS_COLUMNS)]
    for f in frames:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    f.step,
                    f.active_walkers,
                    f.active_drivers,
                    f.mean_driver_speed,
                    f.jaywalk_entries,
                    f.walkers_on_road,
                    f.collisions_vv,
                    f.runovers,
                )
            )
        )
    return "\n".join(lines) + "\n"


def render_events_csv(events) -> str:
    lines = [",".join(EVENT_COLUMNS)]
    for e in events:
        a = e.agents[0] if len(e.agents) > 0 else ""
        b = e.agents[1] if len(e.agents) > 1 else ""
        lines.append(f"{e.step},{e.kind},{a},{b},{_fmt(e.x)},{_fmt(e.y)}")
    return "\n".join(lines) + "\n"


def render_heatmap_csv(layer: HeatmapLayer) -> str:
    lines = ["x,y,value"]
    for y in range(layer.height):
        for x in range(layer.width):
            if layer.sums is not None:
                n = layer.counts[y, x]
                value = repr(float(layer.sums[y, x] / n)) if n else "0.0"
            else:
                value = str(int(layer.counts[y, x]))
            lines.append(f"{x},{y},{value}")
    return "\n".join(lines) + "\n"


def export_run(result, out_dir) -> list[Path]:
    """Write metrics.csv, events.csv and one heatmap CSV per layer.

    Output bytes are a pure function of the result, so re-exporting the same
    run reproduces identical files.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = []

    def write(name: str, content: str) -> None:
        path = out / name
        try:
            path.write_text(content, encoding="utf-8", newline="\n")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        paths.append(path)

    write("metrics.csv", render_metrics_csv(result.frames))
    write("events.csv", render_events_csv(result.events))
    for kind, layer in result.heatmaps.layers().items():
        write(f"heatmap_{kind}.csv", render_heatmap_csv(layer))
    return paths
