"""gridcity: deterministic multi-agent urban mobility simulation."""

from .environment import (
    CellCode,
    Coord,
    Direction,
    DIRECTION_ORDER,
    FLOW_GROUNDS,
    GridMap,
    GridParseError,
    GroundType,
    LayoutError,
    LayoutSpec,
    ROAD_FAMILY,
    driver_cost,
    generate_layout,
    parse_grid,
    parse_obstacle_list,
    place_obstacles,
    serialize_grid,
    serialize_obstacle_list,
    walker_cost,
)
from .planner import (
    Action,
    BehaviorProfile,
    Plan,
    PlanStep,
    classify_action,
    default_heading,
    driver_risk,
    manhattan,
    plan,
    replan,
    walker_risk,
)
from .agents import (
    AgentState,
    AgentView,
    Decision,
    Perception,
    Status,
    act,
    react_driver,
    react_walker,
    sense,
    view_of,
)
from .engine import (
    Event,
    CollisionEvent,
    RUNOVER_DIST,
    SimConfig,
    SimulationResult,
    StepRecord,
    VEHICLE_VEHICLE_DIST,
    VEHICLE_RADIUS,
    WALKER_RADIUS,
    World,
    detect_collisions,
    run,
)
from .metrics import (
    HeatmapLayer,
    HeatmapSet,
    MetricsFrame,
    accumulate_heatmaps,
    build_frame,
    cell_of,
    export_run,
)

__version__ = "0.1.0"
