import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridcity.agents import (
    Decision,
    Status,
    act,
    react_driver,
    react_walker,
    sense,
    view_of,
)
from gridcity.environment import Direction
from helpers import grid_of, make_agent, straight_plan

N, E = Direction.NORTH, Direction.EAST


def road_strip(length=10, token="rE-"):
    return grid_of(" ".join([token] * length))


def walking_strip(length=10):
    return grid_of(" ".join(["s--"] * length))


def eastbound_driver(agent_id, x, grid, speed=0.0, length=None):
    length = length if length is not None else grid.width
    cells = [(i, 0) for i in range(int(x), length)]
    agent = make_agent(
        agent_id, "driver", (x + 0.5, 0.5), straight_plan(cells, "driver"),
        heading=E, speed=speed,
    )
    return agent


# -- sensing -------------------------------------------------------------------


def test_sense_empty_world():
    grid = walking_strip()
    walker = make_agent(1, "walker", (0.5, 0.5), straight_plan([(i, 0) for i in range(6)]))
    p = sense(walker, [], grid)
    assert p.nearby == ()
    assert not p.vehicle_conflict
    assert not p.agent_ahead
    assert p.blocked_cells == frozenset()


def test_sense_head_on_vehicles_both_in_conflict():
    grid = grid_of("rE- rE- rW- rW-")
    a = make_agent(1, "driver", (0.5, 0.5), straight_plan([(0, 0), (1, 0), (2, 0)], "driver"), heading=E)
    b = make_agent(
        2, "driver", (1.4, 0.5),
        straight_plan([(1, 0), (0, 0)], "driver"), heading=Direction.WEST,
    )
    pa = sense(a, [view_of(b)], grid)
    pb = sense(b, [view_of(a)], grid)
    assert pa.vehicle_conflict and pb.vehicle_conflict
    assert math.dist(a.position, b.position) == pytest.approx(0.9)


def test_sense_off_route_pedestrian_not_perceived():
    grid = grid_of(*[" ".join(["s--"] * 10)] * 5)
    walker = make_agent(1, "walker", (0.5, 0.5), straight_plan([(i, 0) for i in range(8)]))
    # 3 cells off the route with lookahead 4 and radius 1
    bystander = make_agent(2, "walker", (2.5, 3.5), None)
    p = sense(walker, [view_of(bystander)], grid, lookahead=4, radius=1.0)
    assert p.nearby == ()
    assert not p.agent_ahead


def test_sense_blocked_cells_lists_inactive_agents_on_route():
    grid = road_strip()
    driver = eastbound_driver(1, 0, grid)
    wreck = make_agent(2, "driver", (2.5, 0.5), None, status=Status.COLLIDED)
    parked = make_agent(3, "driver", (3.5, 0.5), None, status=Status.PARKED)
    far = make_agent(4, "driver", (8.5, 0.5), None, status=Status.PARKED)
    p = sense(driver, [view_of(wreck), view_of(parked), view_of(far)], grid, lookahead=4)
    assert p.blocked_cells == frozenset({(2, 0), (3, 0)})


def test_sense_window_respects_lookahead():
    grid = road_strip()
    driver = eastbound_driver(1, 0, grid)
    ahead = make_agent(2, "driver", (6.5, 0.5), None, speed=0.0)
    assert not sense(driver, [view_of(ahead)], grid, lookahead=4).agent_ahead
    assert sense(driver, [view_of(ahead)], grid, lookahead=7).agent_ahead


# -- walker reactions ------------------------------------------------------------


def test_walker_stops_for_active_vehicle_on_road():
    grid = grid_of("s-- rN- s--")
    walker = make_agent(1, "walker", (0.5, 0.5), straight_plan([(0, 0), (1, 0), (2, 0)]))
    vehicle = make_agent(2, "driver", (1.5, 0.5), None, heading=N, speed=1.0)
    p = sense(walker, [view_of(vehicle)], grid)
    assert p.vehicle_conflict
    assert react_walker(walker, p, grid) is Decision.STOP


def test_walker_proceeds_on_zebra_despite_vehicle():
    grid = grid_of("s-- zN- rN- s--")
    walker = make_agent(1, "walker", (1.5, 0.5), straight_plan([(1, 0), (2, 0), (3, 0)]))
    vehicle = make_agent(2, "driver", (2.5, 0.5), None, heading=N, speed=1.0)
    p = sense(walker, [view_of(vehicle)], grid)
    assert p.vehicle_conflict
    assert react_walker(walker, p, grid) is Decision.PROCEED


def test_walker_on_zebra_replans_around_static_obstacle():
    grid = grid_of("s-- zN- zN- s--")
    walker = make_agent(1, "walker", (1.5, 0.5), straight_plan([(1, 0), (2, 0), (3, 0)]))
    wreck = make_agent(2, "driver", (2.5, 0.5), None, status=Status.COLLIDED)
    p = sense(walker, [view_of(wreck)], grid)
    assert react_walker(walker, p, grid) is Decision.REPLAN


def test_walker_replans_for_parked_vehicle_on_route():
    grid = grid_of("s-- s-- pN- s--")
    walker = make_agent(1, "walker", (0.5, 0.5), straight_plan([(0, 0), (1, 0), (2, 0), (3, 0)]))
    parked = make_agent(2, "driver", (2.5, 0.5), None, status=Status.PARKED)
    p = sense(walker, [view_of(parked)], grid)
    assert react_walker(walker, p, grid) is Decision.REPLAN


def test_walker_clear_path_proceeds():
    grid = walking_strip()
    walker = make_agent(1, "walker", (0.5, 0.5), straight_plan([(i, 0) for i in range(5)]))
    assert react_walker(walker, sense(walker, [], grid), grid) is Decision.PROCEED


# -- driver reactions --------------------------------------------------------------


def test_driver_yields_for_pedestrian_on_upcoming_zebra():
    grid = grid_of("rE- rE- zE- rE-")
    driver = eastbound_driver(1, 0, grid)
    walker = make_agent(2, "walker", (2.5, 0.5), None, max_speed=1.0)
    p = sense(driver, [view_of(walker)], grid)
    assert p.pedestrian_near_zebra
    assert react_driver(driver, p) is Decision.YIELD


def test_driver_yields_for_sidewalk_pedestrian_near_zebra():
    grid = grid_of("rE- rE- zE- rE-", "s-- s-- s-- s--")
    driver = eastbound_driver(1, 0, grid, length=4)
    # on the sidewalk one cell south of the zebra: distance 1.0 < 1.5
    walker = make_agent(2, "walker", (2.5, 1.5), None, max_speed=1.0)
    p = sense(driver, [view_of(walker)], grid)
    assert p.pedestrian_near_zebra
    assert react_driver(driver, p) is Decision.YIELD


def test_driver_decelerates_behind_agent():
    grid = road_strip()
    driver = eastbound_driver(1, 0, grid, speed=2.0)
    leader = make_agent(2, "driver", (2.5, 0.5), None, speed=1.0)
    p = sense(driver, [view_of(leader)], grid)
    assert p.agent_ahead and not p.pedestrian_near_zebra
    assert react_driver(driver, p) is Decision.DECELERATE


def test_driver_replans_for_inactive_blocker():
    grid = road_strip()
    driver = eastbound_driver(1, 0, grid)
    wreck = make_agent(2, "driver", (3.5, 0.5), None, status=Status.COLLIDED)
    p = sense(driver, [view_of(wreck)], grid)
    assert not p.agent_ahead
    assert react_driver(driver, p) is Decision.REPLAN


def test_driver_clear_road_accelerates():
    grid = road_strip()
    driver = eastbound_driver(1, 0, grid)
    assert react_driver(driver, sense(driver, [], grid)) is Decision.ACCELERATE


def test_zebra_right_of_way_pairing():
    # joint invariant: the walker on the zebra proceeds, the driver gives way
    grid = grid_of("rE- rE- zE- rE-", "s-- s-- s-- s--")
    driver = eastbound_driver(1, 0, grid, length=4)
    walker = make_agent(
        2, "walker", (2.5, 0.5), straight_plan([(2, 0), (2, 1)]), max_speed=1.0
    )
    dp = sense(driver, [view_of(walker)], grid)
    wp = sense(walker, [view_of(driver)], grid)
    assert react_driver(driver, dp) in (Decision.YIELD, Decision.DECELERATE)
    assert react_walker(walker, wp, grid) is Decision.PROCEED


# -- kinematics ---------------------------------------------------------------------


def test_act_stop_keeps_position():
    grid = walking_strip()
    walker = make_agent(1, "walker", (0.5, 0.5), straight_plan([(0, 0), (1, 0)]), speed=1.0)
    act(walker, Decision.STOP, grid)
    assert walker.position == (0.5, 0.5)
    assert walker.speed == 0.0


def test_act_unit_speed_advances_one_cell():
    grid = walking_strip()
    walker = make_agent(
        1, "walker", (0.5, 0.5), straight_plan([(i, 0) for i in range(5)]),
        max_speed=1.0,
    )
    act(walker, Decision.PROCEED, grid)
    assert walker.position == (1.5, 0.5)
    assert walker.cursor == 2


def test_act_accelerate_clamps_at_max_speed():
    grid = road_strip()
    driver = eastbound_driver(1, 0, grid, speed=2.0)
    act(driver, Decision.ACCELERATE, grid)
    assert driver.speed == 2.0
    assert driver.position == (2.5, 0.5)


def test_act_decelerate_floors_at_zero():
    grid = road_strip()
    driver = eastbound_driver(1, 0, grid, speed=0.5)
    act(driver, Decision.DECELERATE, grid)
    assert driver.speed == 0.0
    assert driver.position == (0.5, 0.5)


def test_act_heading_follows_turns():
    grid = grid_of("s-- s--", "s-- s--")
    driver = make_agent(
        1, "driver", (0.5, 0.5),
        straight_plan([(0, 0), (1, 0), (1, 1)], "driver"),
        heading=E, max_speed=2.0, speed=2.0,
    )
    act(driver, Decision.PROCEED, grid)
    assert driver.position == (1.5, 1.5)
    assert driver.heading is Direction.SOUTH


def test_act_replan_swaps_route_before_moving():
    grid = grid_of(
        "s-- s-- s-- s-- s--",
        "s-- b-- b-- b-- s--",
        "s-- s-- s-- s-- s--",
    )
    walker = make_agent(
        1, "walker",
        (0.5, 0.5), straight_plan([(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)]),
        max_speed=1.0, goal=(4, 0),
    )
    replanned = act(walker, Decision.REPLAN, grid, blocked={(1, 0)})
    assert replanned
    assert (1, 0) not in walker.plan.cells
    assert walker.position == (0.5, 1.5)  # moved along the detour already


def test_act_failed_replan_waits_in_place():
    grid = grid_of("s-- s-- s--")
    walker = make_agent(
        1, "walker", (0.5, 0.5), straight_plan([(0, 0), (1, 0), (2, 0)]),
        max_speed=1.0, goal=(2, 0),
    )
    old_plan = walker.plan
    replanned = act(walker, Decision.REPLAN, grid, blocked={(1, 0)})
    assert not replanned
    assert walker.plan is old_plan
    assert walker.position == (0.5, 0.5)
    assert walker.speed == 0.0


def test_act_position_stays_on_polyline():
    grid = road_strip()
    cells = [(i, 0) for i in range(grid.width)]
    driver = make_agent(
        1, "driver", (0.5, 0.5), straight_plan(cells, "driver"),
        heading=E, max_speed=0.7,
    )
    xs = []
    for _ in range(12):
        act(driver, Decision.ACCELERATE, grid)
        xs.append(driver.position)
    for x, y in xs:
        assert y == pytest.approx(0.5)
        assert 0.5 <= x <= 9.5 + 1e-9


@settings(max_examples=60, deadline=None)
@given(
    speed=st.floats(min_value=0.0, max_value=3.0, allow_nan=False),
    decision=st.sampled_from(
        [Decision.PROCEED, Decision.STOP, Decision.ACCELERATE, Decision.DECELERATE,
         Decision.YIELD]
    ),
)
def test_act_speed_clamped_and_no_teleport(speed, decision):
    grid = walking_strip(12)
    walker = make_agent(
        1, "walker", (0.5, 0.5), straight_plan([(i, 0) for i in range(12)]),
        max_speed=1.0, speed=min(speed, 1.0),
    )
    before = walker.position
    act(walker, decision, grid)
    assert 0.0 <= walker.speed <= walker.profile.max_speed
    assert math.dist(before, walker.position) <= walker.speed + 1e-9
