"""Shared test fixtures: random grids, tiny hand-written maps, agent factories."""
from __future__ import annotations

import math
import random

from gridcity.environment import (
    CellCode,
    DIRECTION_ORDER,
    FLOW_GROUNDS,
    GridMap,
    GroundType,
    parse_grid,
)
from gridcity.agents import AgentState, Status
from gridcity.planner import BehaviorProfile, Plan, PlanStep, Action

_GROUND_WEIGHTS = [
    (GroundType.ROAD, 0.30),
    (GroundType.SIDEWALK, 0.22),
    (GroundType.BUILDING, 0.10),
    (GroundType.ZEBRA, 0.08),
    (GroundType.PARKING, 0.05),
    (GroundType.TURN, 0.05),
    (GroundType.LEFT_TURN, 0.03),
    (GroundType.POTHOLE, 0.07),
    (GroundType.OBSTACLE, 0.10),
]


def random_grid(rng: random.Random, width: int = 15, height: int = 15) -> GridMap:
    """Mixed-ground random grid with valid flow annotations."""
    grounds = [g for g, _ in _GROUND_WEIGHTS]
    weights = [w for _, w in _GROUND_WEIGHTS]
    rows = []
    for _ in range(height):
        row = []
        for _ in range(width):
            ground = rng.choices(grounds, weights=weights, k=1)[0]
            if ground in FLOW_GROUNDS:
                count = 1 if rng.random() < 0.8 else 2
                flow = frozenset(rng.sample(DIRECTION_ORDER, count))
            else:
                flow = frozenset()
            row.append(CellCode(ground, flow))
        rows.append(row)
    return GridMap.build(rows)


def traversable_cells(grid: GridMap, kind: str) -> list:
    cost = grid.walker_cost_at if kind == "walker" else grid.driver_cost_at
    return [
        (x, y)
        for y in range(grid.height)
        for x in range(grid.width)
        if cost((x, y)) != math.inf
    ]


def random_instance(rng: random.Random, kind: str, width: int = 15, height: int = 15):
    """(grid, start, goal) with distinct traversable endpoints for the kind."""
    while True:
        grid = random_grid(rng, width, height)
        cells = traversable_cells(grid, kind)
        if len(cells) < 2:
            continue
        start = rng.choice(cells)
        goal = rng.choice(cells)
        if start != goal:
            return grid, start, goal


def grid_of(*rows: str) -> GridMap:
    """Build a grid from rows of space-separated tokens."""
    width = len(rows[0].split())
    text = f"{width} {len(rows)}\n" + "\n".join(rows) + "\n"
    return parse_grid(text)


def straight_plan(cells, kind: str = "walker") -> Plan:
    """Hand-built plan through the given cells (costs left at zero)."""
    action = Action.STEP if kind == "walker" else Action.FORWARD
    steps = [PlanStep(cells[0], None)]
    steps += [PlanStep(c, action) for c in cells[1:]]
    return Plan(tuple(steps), 0.0, 0.0, 0.0, 0)


def make_agent(
    agent_id: int,
    kind: str,
    position,
    plan: Plan | None = None,
    cursor: int = 1,
    speed: float = 0.0,
    heading=None,
    status: Status = Status.ACTIVE,
    max_speed: float = 2.0,
    goal=None,
    w: float = 1.0,
    alpha: float = 0.0,
) -> AgentState:
    profile = BehaviorProfile(kind=kind, w=w, alpha=alpha, max_speed=max_speed)
    if goal is None and plan is not None:
        goal = plan.steps[-1].cell
    return AgentState(
        id=agent_id,
        kind=kind,
        profile=profile,
        position=position,
        heading=heading,
        speed=speed,
        plan=plan,
        cursor=cursor,
        status=status,
        goal=goal,
    )
