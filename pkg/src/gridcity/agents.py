"""Walker and driver behavior: sensing, reaction rules, and kinematics.

Agents follow their planned route cell-center to cell-center.  Each step they
perceive a window around their next few route cells, pick exactly one decision
(stop, yield, decelerate, accelerate, replan, proceed), and move by their
current speed along the plan polyline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .environment import Coord, Direction, DIRECTION_ORDER, GridMap, GroundType
from .planner import BehaviorProfile, Plan, replan


class Status(Enum):
    ACTIVE = "active"
    PARKED = "parked"
    COLLIDED = "collided"
    DONE = "done"


class Decision(Enum):
    PROCEED = "proceed"
    STOP = "stop"
    DECELERATE = "decelerate"
    ACCELERATE = "accelerate"
    YIELD = "yield"
    REPLAN = "replan"


@dataclass
class AgentState:
    """Kinematic and lifecycle state of one walker or driver."""

    id: int
    kind: str  # 'walker' | 'driver'
    profile: BehaviorProfile
    position: tuple[float, float]
    heading: Direction | None
    speed: float
    plan: Plan | None
    cursor: int  # index of the next plan cell to reach
    status: Status = Status.ACTIVE
    countdown: int = 0
    goal: Coord | None = None

    def cell(self) -> Coord:
        return (int(math.floor(self.position[0])), int(math.floor(self.position[1])))


@dataclass(frozen=True)
class AgentView:
    """Read-only snapshot of another agent, as exposed to sensing."""

    id: int
    kind: str
    position: tuple[float, float]
    speed: float
    active: bool
    cell: Coord


def view_of(agent: AgentState) -> AgentView:
    return AgentView(
        id=agent.id,
        kind=agent.kind,
        position=agent.position,
        speed=agent.speed,
        active=agent.status is Status.ACTIVE,
        cell=agent.cell(),
    )


@dataclass(frozen=True)
class Perception:
    """What one agent saw this step within its sensing window."""

    nearby: tuple  # AgentView entries within the window
    vehicle_conflict: bool  # an active driver is inside the window
    agent_ahead: bool  # any active agent is inside the window
    conflict_index: int | None  # window slot (0 = next cell) of the nearest active agent
    pedestrian_near_zebra: bool  # walker within yield radius of an upcoming zebra
    blocked_cells: frozenset  # upcoming plan cells occupied by inactive agents


def sense(
    agent: AgentState,
    others,
    grid: GridMap,
    lookahead: int = 4,
    radius: float = 1.0,
    yield_radius: float = 1.5,
) -> Perception:
    """Perceive agents near the next ``lookahead`` plan cells.

    An entity belongs to the window when its distance to some upcoming route
    cell center is strictly below ``radius``.  Zebra yield checks scan all
    active walkers (sidewalk-adjacent ones included) within ``yield_radius``
    of an upcoming zebra cell.
    """
    window_cells: list[Coord] = []
    if agent.plan is not None:
        steps = agent.plan.steps
        window_cells = [
            steps[i].cell for i in range(agent.cursor, min(agent.cursor + lookahead, len(steps)))
        ]
    centers = [grid.center(c) for c in window_cells]
    window_set = frozenset(window_cells)
    r2 = radius * radius

    nearby = []
    blocked = set()
    conflict_index: int | None = None
    if centers:
        # cheap bounding-box rejection before per-cell distance checks; the
        # margin keeps any agent standing on a window cell inside the box
        margin = radius if radius > 1.0 else 1.0
        min_x = min(c[0] for c in centers) - margin
        max_x = max(c[0] for c in centers) + margin
        min_y = min(c[1] for c in centers) - margin
        max_y = max(c[1] for c in centers) + margin
        my_id = agent.id
        for other in others:
            ox, oy = other.position
            if ox < min_x or ox > max_x or oy < min_y or oy > max_y:
                continue
            if other.id == my_id:
                continue
            for slot, (cx, cy) in enumerate(centers):
                dx, dy = ox - cx, oy - cy
                if dx * dx + dy * dy < r2:
                    nearby.append(other)
                    if other.active and (conflict_index is None or slot < conflict_index):
                        conflict_index = slot
                    break
            if not other.active and other.cell in window_set:
                blocked.add(other.cell)

    vehicle_conflict = any(v.kind == "driver" and v.active for v in nearby)
    agent_ahead = any(v.active for v in nearby)

    pedestrian_near_zebra = False
    if agent.kind == "driver":
        y2 = yield_radius * yield_radius
        zebra_centers = [
            grid.center(c) for c in window_cells if grid.ground_at(c) is GroundType.ZEBRA
        ]
        if zebra_centers:
            for other in others:
                if other.kind != "walker" or not other.active or other.id == agent.id:
                    continue
                ox, oy = other.position
                for cx, cy in zebra_centers:
                    dx, dy = ox - cx, oy - cy
                    if dx * dx + dy * dy < y2:
                        pedestrian_near_zebra = True
                        break
                if pedestrian_near_zebra:
                    break

    return Perception(
        nearby=tuple(nearby),
        vehicle_conflict=vehicle_conflict,
        agent_ahead=agent_ahead,
        conflict_index=conflict_index,
        pedestrian_near_zebra=pedestrian_near_zebra,
        blocked_cells=frozenset(blocked),
    )


def react_walker(agent: AgentState, perception: Perception, grid: GridMap) -> Decision:
    """Stop for active vehicles, except on a zebra where the walker has
    right-of-way; replan around inactive blockers; otherwise proceed."""
    on_zebra = grid.ground_at(agent.cell()) is GroundType.ZEBRA
    if on_zebra:
        return Decision.REPLAN if perception.blocked_cells else Decision.PROCEED
    if perception.vehicle_conflict:
        return Decision.STOP
    if perception.blocked_cells:
        return Decision.REPLAN
    return Decision.PROCEED


def react_driver(agent: AgentState, perception: Perception) -> Decision:
    """Yield at upcoming zebras with pedestrians nearby, brake for agents
    inside the braking window, replan around inactive blockers, else
    accelerate to max speed.

    The braking window scales with the current speed (stopping distance plus
    one cell), so sensed-but-distant agents do not freeze traffic.
    """
    if perception.pedestrian_near_zebra:
        return Decision.YIELD
    if perception.conflict_index is not None:
        if perception.conflict_index <= math.ceil(agent.speed):
            return Decision.DECELERATE
    if perception.blocked_cells:
        return Decision.REPLAN
    return Decision.ACCELERATE


def act(
    agent: AgentState,
    decision: Decision,
    grid: GridMap,
    blocked: frozenset | set = frozenset(),
    accel: float = 1.0,
    decel: float = 1.0,
) -> bool:
    """Apply the decision's speed update, then advance along the plan.

    Returns True when the decision replaced the plan (successful replan).
    A failed replan leaves the old plan in place and waits this step.
    """
    replanned = False
    if decision in (Decision.STOP, Decision.YIELD):
        agent.speed = 0.0
    elif decision is Decision.DECELERATE:
        agent.speed = max(0.0, agent.speed - decel)
    elif decision is Decision.ACCELERATE:
        agent.speed = min(agent.profile.max_speed, agent.speed + accel)
    elif decision is Decision.PROCEED:
        if agent.kind == "walker":
            agent.speed = agent.profile.max_speed
    elif decision is Decision.REPLAN:
        new_plan = None
        if agent.goal is not None:
            new_plan = replan(
                grid,
                agent.cell(),
                agent.goal,
                agent.profile,
                blocked=frozenset(blocked) - {agent.cell()},
                heading=agent.heading,
            )
        if new_plan is None:
            agent.speed = 0.0
        else:
            agent.plan = new_plan
            agent.cursor = 1 if len(new_plan) > 1 else len(new_plan)
            replanned = True
            if agent.kind == "walker":
                agent.speed = agent.profile.max_speed
            else:
                agent.speed = min(agent.profile.max_speed, agent.speed + accel)
    _advance(agent, grid)
    return replanned


def _direction_between(a: Coord, b: Coord) -> Direction | None:
    dx, dy = b[0] - a[0], b[1] - a[1]
    for d in DIRECTION_ORDER:
        if (d.dx, d.dy) == (dx, dy):
            return d
    return None


def _advance(agent: AgentState, grid: GridMap) -> None:
    """Move by the current speed along the plan polyline of cell centers."""
    if agent.plan is None:
        return
    steps = agent.plan.steps
    budget = agent.speed
    x, y = agent.position
    while budget > 1e-12 and agent.cursor < len(steps):
        tx, ty = grid.center(steps[agent.cursor].cell)
        dx, dy = tx - x, ty - y
        dist = math.hypot(dx, dy)
        if dist <= budget + 1e-12:
            x, y = tx, ty
            budget -= dist
            if agent.kind == "driver" and agent.cursor >= 1:
                d = _direction_between(
                    steps[agent.cursor - 1].cell, steps[agent.cursor].cell
                )
                if d is not None:
                    agent.heading = d
            agent.cursor += 1
        else:
            x += dx / dist * budget
            y += dy / dist * budget
            if agent.kind == "driver":
                if abs(dx) >= abs(dy):
                    agent.heading = Direction.EAST if dx > 0 else Direction.WEST
                else:
                    agent.heading = Direction.SOUTH if dy > 0 else Direction.NORTH
            budget = 0.0
    agent.position = (x, y)
