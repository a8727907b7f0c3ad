import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridcity.environment import (
    CellCode,
    DIRECTION_ORDER,
    Direction,
    FLOW_GROUNDS,
    GridMap,
    GridParseError,
    GroundType,
    LayoutError,
    LayoutSpec,
    driver_cost,
    generate_layout,
    parse_grid,
    parse_obstacle_list,
    place_obstacles,
    serialize_grid,
    serialize_obstacle_list,
    walker_cost,
)
from helpers import grid_of, random_grid


# -- cell codec ---------------------------------------------------------------


def test_ground_chars_bijective():
    chars = [g.value for g in GroundType]
    assert sorted(chars) == sorted("rsbpztloh")
    for g in GroundType:
        assert GroundType.from_char(g.value) is g


@pytest.mark.parametrize(
    "token,ground,flow",
    [
        ("rN-", GroundType.ROAD, {Direction.NORTH}),
        ("b--", GroundType.BUILDING, set()),
        ("s--", GroundType.SIDEWALK, set()),
        ("zNE", GroundType.ZEBRA, {Direction.NORTH, Direction.EAST}),
        ("tSW", GroundType.TURN, {Direction.SOUTH, Direction.WEST}),
        ("hE-", GroundType.POTHOLE, {Direction.EAST}),
    ],
)
def test_token_decode(token, ground, flow):
    cell = CellCode.from_token(token)
    assert cell.ground is ground
    assert cell.flow == frozenset(flow)
    assert cell.token() == token


@pytest.mark.parametrize(
    "token",
    ["rNX", "rNN", "r-N", "sN-", "r--", "xN-", "r", "rNSE", "o-S"],
)
def test_token_rejects_malformed(token):
    with pytest.raises(GridParseError):
        CellCode.from_token(token)


def test_token_canonical_direction_order():
    cell = CellCode(GroundType.ROAD, frozenset({Direction.WEST, Direction.NORTH}))
    assert cell.token() == "rNW"


def test_cellcode_invariants():
    with pytest.raises(ValueError):
        CellCode(GroundType.SIDEWALK, frozenset({Direction.NORTH}))
    with pytest.raises(ValueError):
        CellCode(GroundType.ROAD, frozenset())
    with pytest.raises(ValueError):
        CellCode(GroundType.ROAD, frozenset(DIRECTION_ORDER[:3]))


# -- grid parsing -------------------------------------------------------------


def test_parse_minimal_grid():
    grid = grid_of("rN- b--", "s-- zE-")
    assert grid.width == 2 and grid.height == 2
    assert grid.ground_at((0, 0)) is GroundType.ROAD
    assert grid.flow_at((1, 1)) == frozenset({Direction.EAST})


def test_parse_error_names_position():
    text = "2 2\nrN- b--\ns-- rNX\n"
    with pytest.raises(GridParseError, match=r"row 1, column 1"):
        parse_grid(text)


def test_parse_ragged_row():
    with pytest.raises(GridParseError, match=r"row 1"):
        parse_grid("2 2\nrN- b--\ns--\n")


def test_parse_wrong_row_count():
    with pytest.raises(GridParseError, match="expected 3 rows"):
        parse_grid("2 3\nrN- b--\ns-- s--\n")


def test_parse_bad_header():
    with pytest.raises(GridParseError, match="header"):
        parse_grid("two 2\nrN- b--\n")


def test_parse_ignores_comments_and_blank_lines():
    text = "# city map\n2 1\n\nrN- rN-\n# trailing note\n"
    grid = parse_grid(text)
    assert grid.width == 2 and grid.height == 1


def test_roundtrip_generated_layout():
    grid = generate_layout(LayoutSpec(blocks_x=2, blocks_y=1))
    again = parse_grid(serialize_grid(grid))
    assert again.cells == grid.cells
    assert serialize_grid(again) == serialize_grid(grid)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_roundtrip_random_grids(seed):
    grid = random_grid(random.Random(seed), width=6, height=5)
    assert parse_grid(serialize_grid(grid)).cells == grid.cells


def test_obstacle_list_roundtrip():
    coords = frozenset({(3, 4), (0, 0), (7, 2)})
    assert parse_obstacle_list(serialize_obstacle_list(coords)) == coords


def test_obstacle_list_rejects_garbage():
    with pytest.raises(GridParseError):
        parse_obstacle_list("1 2 3\n")


# -- procedural layout --------------------------------------------------------


def test_layout_dimensions_and_counts_5x5():
    grid = generate_layout(LayoutSpec(blocks_x=5, blocks_y=5))
    assert grid.width == 5 * 15 + 6 * 4
    assert grid.height == 99
    counts = grid.ground_counts()
    assert counts[GroundType.BUILDING] == 25 * 13 * 13
    assert counts[GroundType.SIDEWALK] == 25 * (4 * 15 - 4)
    assert counts[GroundType.TURN] + counts[GroundType.LEFT_TURN] == 6 * 6 * 16


def test_layout_single_block_sidewalk_ring():
    grid = generate_layout(LayoutSpec(blocks_x=1, blocks_y=1))
    assert grid.ground_counts()[GroundType.SIDEWALK] == 4 * 15 - 4


def test_layout_zebra_band_count():
    bx, by, lanes = 2, 3, 2
    grid = generate_layout(LayoutSpec(blocks_x=bx, blocks_y=by, lanes_per_direction=lanes))
    sw = 2 * lanes
    expected = (2 * by * (bx + 1) + 2 * bx * (by + 1)) * sw
    assert grid.ground_counts()[GroundType.ZEBRA] == expected


def test_layout_interior_street_has_two_lanes_per_direction():
    grid = generate_layout(LayoutSpec(blocks_x=2, blocks_y=1, lanes_per_direction=2))
    # interior vertical corridor sits right of the first block
    x0 = 4 + 15
    y = 4 + 7  # a block row, plain street
    dirs = [grid.flow_at((x0 + i, y)) for i in range(4)]
    assert dirs[0] == dirs[1] == frozenset({Direction.SOUTH})
    assert dirs[2] == dirs[3] == frozenset({Direction.NORTH})


def test_layout_road_lanes_single_direction_and_opposing_adjacent():
    grid = generate_layout(LayoutSpec(blocks_x=2, blocks_y=2))
    for y in range(grid.height):
        for x in range(grid.width):
            cell = grid.cell_at((x, y))
            if cell.ground is GroundType.ROAD:
                assert len(cell.flow) == 1
    # opposing halves of every corridor touch at the centerline
    sw, pitch = 4, 19
    for k in range(3):
        x_left = k * pitch + 1  # last southbound lane
        x_right = k * pitch + 2  # first northbound lane
        y = sw + 7
        assert grid.flow_at((x_left, y)) == frozenset({Direction.SOUTH})
        assert grid.flow_at((x_right, y)) == frozenset({Direction.NORTH})


def test_layout_turn_cells_advertise_both_lane_directions():
    grid = generate_layout(LayoutSpec(blocks_x=1, blocks_y=1, lanes_per_direction=1))
    for y in range(grid.height):
        for x in range(grid.width):
            cell = grid.cell_at((x, y))
            if cell.ground in (GroundType.TURN, GroundType.LEFT_TURN):
                assert len(cell.flow) == 2
                axes = {d in (Direction.NORTH, Direction.SOUTH) for d in cell.flow}
                assert axes == {True, False}


@pytest.mark.parametrize(
    "kwargs",
    [
        {"blocks_x": 0, "blocks_y": 1},
        {"blocks_x": 1, "blocks_y": 1, "block_side": 15, "building_side": 14},
        {"blocks_x": 1, "blocks_y": 1, "lanes_per_direction": 0},
        {"blocks_x": 1, "blocks_y": 1, "obstruction_fraction": 1.5},
    ],
)
def test_layout_rejects_bad_spec(kwargs):
    with pytest.raises(LayoutError):
        generate_layout(LayoutSpec(**kwargs))


# -- obstacles ----------------------------------------------------------------


def test_place_obstacles_zero_fraction_is_identity():
    grid = generate_layout(LayoutSpec(blocks_x=1, blocks_y=1))
    assert place_obstacles(grid, 0.0, random.Random(1)) is grid


def test_place_obstacles_exact_count():
    grid = generate_layout(LayoutSpec(blocks_x=2, blocks_y=2))
    sidewalks = grid.ground_counts()[GroundType.SIDEWALK]
    for fraction in (0.05, 0.33, 1.0):
        obstructed = place_obstacles(grid, fraction, random.Random(9))
        assert len(obstructed.obstacles) == round(fraction * sidewalks)


def test_place_obstacles_deterministic_and_on_sidewalks_only():
    grid = generate_layout(LayoutSpec(blocks_x=2, blocks_y=1))
    a = place_obstacles(grid, 0.1, random.Random(42))
    b = place_obstacles(grid, 0.1, random.Random(42))
    assert a.obstacles == b.obstacles
    for coord in a.obstacles:
        assert grid.ground_at(coord) is GroundType.SIDEWALK


def test_place_obstacles_rejects_bad_fraction():
    grid = generate_layout(LayoutSpec(blocks_x=1, blocks_y=1))
    with pytest.raises(ValueError):
        place_obstacles(grid, -0.1, random.Random(0))


def test_with_obstacles_validation():
    grid = generate_layout(LayoutSpec(blocks_x=1, blocks_y=1))
    with pytest.raises(ValueError, match="outside"):
        grid.with_obstacles({(-1, 0)})
    # find a building cell
    building = next(
        (x, y)
        for y in range(grid.height)
        for x in range(grid.width)
        if grid.ground_at((x, y)) is GroundType.BUILDING
    )
    with pytest.raises(ValueError, match="building"):
        grid.with_obstacles({building})


# -- costs --------------------------------------------------------------------


def test_walker_cost_table():
    expected = {
        GroundType.SIDEWALK: 1,
        GroundType.ZEBRA: 1,
        GroundType.ROAD: 5,
        GroundType.TURN: 10,
        GroundType.LEFT_TURN: 10,
        GroundType.PARKING: 5,
        GroundType.POTHOLE: 1,
        GroundType.BUILDING: math.inf,
        GroundType.OBSTACLE: math.inf,
    }
    for ground, value in expected.items():
        flow = frozenset({Direction.NORTH}) if ground in FLOW_GROUNDS else frozenset()
        assert walker_cost(CellCode(ground, flow)) == value


def test_driver_cost_table():
    expected = {
        GroundType.ROAD: 1,
        GroundType.ZEBRA: 1,
        GroundType.PARKING: 5,
        GroundType.POTHOLE: 5,
        GroundType.TURN: 1,
        GroundType.LEFT_TURN: 1,
        GroundType.SIDEWALK: math.inf,
        GroundType.BUILDING: math.inf,
        GroundType.OBSTACLE: math.inf,
    }
    for ground, value in expected.items():
        flow = frozenset({Direction.NORTH}) if ground in FLOW_GROUNDS else frozenset()
        assert driver_cost(CellCode(ground, flow)) == value


def test_cost_overlay_infinite():
    grid = generate_layout(LayoutSpec(blocks_x=1, blocks_y=1))
    site = grid.walker_spawns[0]
    obstructed = grid.with_obstacles({site})
    assert grid.walker_cost_at(site) == 1
    assert obstructed.walker_cost_at(site) == math.inf
    assert obstructed.driver_cost_at(site) == math.inf


# -- spawn sites --------------------------------------------------------------


def test_walker_spawn_sites_are_building_adjacent_sidewalks():
    grid = generate_layout(LayoutSpec(blocks_x=2, blocks_y=2))
    assert grid.walker_spawns
    for x, y in grid.walker_spawns:
        assert grid.ground_at((x, y)) is GroundType.SIDEWALK
        neighbors = [
            grid.ground_at((x + d.dx, y + d.dy))
            for d in DIRECTION_ORDER
            if grid.in_bounds((x + d.dx, y + d.dy))
        ]
        assert GroundType.BUILDING in neighbors


def test_driver_spawn_sites_are_road_cells_with_flow():
    grid = generate_layout(LayoutSpec(blocks_x=2, blocks_y=2))
    assert grid.driver_spawns
    for (x, y), heading in grid.driver_spawns:
        cell = grid.cell_at((x, y))
        assert cell.ground is GroundType.ROAD
        assert cell.flow
        assert heading in cell.flow


def test_driver_exits_on_boundary():
    grid = generate_layout(LayoutSpec(blocks_x=2, blocks_y=2))
    assert grid.driver_exits
    for x, y in grid.driver_exits:
        assert x in (0, grid.width - 1) or y in (0, grid.height - 1)


def test_lane_center():
    grid = generate_layout(LayoutSpec(blocks_x=1, blocks_y=1))
    assert grid.center((3, 7)) == (3.5, 7.5)


def test_grid_map_rejects_ragged_rows():
    cell = CellCode(GroundType.SIDEWALK)
    with pytest.raises(ValueError):
        GridMap.build([[cell, cell], [cell]])
