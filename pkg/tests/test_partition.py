import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SEED3_POSITIONS
from fieldnet.errors import InvalidArgument, InvalidScenario
from fieldnet.field import UNIT_SQUARE
from fieldnet.partition import (
    PartitionGraph,
    adjacency_laplacian,
    adjacency_matrix,
    assign_centres,
    build_outbranching,
    build_partition,
    laplacian_from_adjacency,
    point_in_convex,
    polygon_area,
    polygon_centroid,
    voronoi_cells,
    voronoi_partition,
    write_cells_csv,
)
from fieldnet.presets import REFERENCE_CENTRES, reference_basis
from fieldnet.rbf import KernelBasis

QUADRANTS = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])


def test_two_generators_split_at_bisector():
    cells = voronoi_cells(np.array([[0.25, 0.5], [0.75, 0.5]]), UNIT_SQUARE)
    assert np.max(cells[0][:, 0]) == pytest.approx(0.5)
    assert np.min(cells[1][:, 0]) == pytest.approx(0.5)
    assert polygon_area(cells[0]) == pytest.approx(0.5)


def test_single_generator_owns_box():
    (cell,) = voronoi_cells(np.array([[0.3, 0.6]]), UNIT_SQUARE)
    assert polygon_area(cell) == pytest.approx(1.0)
    np.testing.assert_allclose(polygon_centroid(cell), [0.5, 0.5])


def test_generator_validation():
    with pytest.raises(InvalidArgument):
        voronoi_cells(np.array([[0.5, 0.5], [0.5, 0.5]]), UNIT_SQUARE)
    with pytest.raises(InvalidArgument):
        voronoi_cells(np.array([[1.5, 0.5]]), UNIT_SQUARE)
    with pytest.raises(InvalidArgument):
        voronoi_cells(np.array([0.5, 0.5]), UNIT_SQUARE)


def _check_tiling(gens, cells):
    assert sum(polygon_area(c) for c in cells) == pytest.approx(1.0, abs=1e-9)
    for c in cells:
        assert polygon_area(c) > 0  # counter-clockwise
        for v in c:
            d = np.sort(np.linalg.norm(gens - v, axis=1))
            on_box = min(v[0], v[1], 1 - v[0], 1 - v[1]) < 1e-9
            assert on_box or d[1] - d[0] < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_random_tilings(seed, n):
    gens = np.random.default_rng(seed).uniform(0.01, 0.99, size=(n, 2))
    d = np.linalg.norm(gens[:, None] - gens[None], axis=-1)
    if d[np.triu_indices(n, 1)].min() < 1e-3:
        return
    _check_tiling(gens, voronoi_cells(gens, UNIT_SQUARE))


def test_cells_match_nearest_generator_classification():
    gens = SEED3_POSITIONS
    cells = voronoi_cells(gens, UNIT_SQUARE)
    _check_tiling(gens, cells)
    xs = (np.arange(500) + 0.5) / 500
    gx, gy = np.meshgrid(xs, xs)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    nearest = np.argmin(np.linalg.norm(pts[:, None] - gens[None], axis=-1), axis=1)
    # every 37th sample keeps this brute force quick; point_in_convex is scalar
    for q, owner in zip(pts[::37], nearest[::37]):
        assert point_in_convex(cells[owner], q, tol=1e-12)
    areas = np.bincount(nearest, minlength=4) / len(pts)
    np.testing.assert_allclose(areas, [polygon_area(c) for c in cells], atol=5e-3)


def test_centre_ownership_and_tie_break():
    part = voronoi_partition(QUADRANTS, UNIT_SQUARE)
    basis = KernelBasis([[0.7, 0.8], [0.5, 0.25], [0.1, 0.1]], 0.1)
    owner, blocks = assign_centres(part, basis)
    assert owner.tolist() == [3, 0, 0]  # (0.5, 0.25) is on the 0/1 boundary, lowest index wins
    assert [b.tolist() for b in blocks] == [[1, 2], [], [], [0]]


def test_reference_centres_by_quadrant():
    part = voronoi_partition(QUADRANTS, UNIT_SQUARE)
    owner, _ = assign_centres(part, reference_basis())
    brute = [int(np.argmin(np.linalg.norm(QUADRANTS - c, axis=1))) for c in REFERENCE_CENTRES]
    assert owner.tolist() == brute
    quadrant = [int(c[0] > 0.5) + 2 * int(c[1] > 0.5) for c in REFERENCE_CENTRES]
    assert owner.tolist() == quadrant


def test_two_cell_laplacian():
    part = voronoi_partition(np.array([[0.25, 0.5], [0.75, 0.5]]), UNIT_SQUARE)
    np.testing.assert_array_equal(adjacency_laplacian(part, weight=2.0), [[2, -2], [-2, 2]])


def test_quadrants_corner_contact_is_not_adjacency():
    part = voronoi_partition(QUADRANTS, UNIT_SQUARE)
    adj = adjacency_matrix(part)
    assert not adj[0, 3] and not adj[1, 2]
    assert adj.sum(axis=1).tolist() == [2, 2, 2, 2]


def test_laplacian_null_space_and_connectivity():
    part = voronoi_partition(SEED3_POSITIONS, UNIT_SQUARE)
    lap = adjacency_laplacian(part)
    np.testing.assert_allclose(lap @ np.ones(4), 0.0, atol=1e-15)
    np.testing.assert_array_equal(lap, lap.T)
    ev = np.linalg.eigvalsh(lap)
    assert abs(ev[0]) < 1e-12 and ev[1] > 0


def test_disconnected_graph_is_rejected():
    part = PartitionGraph(np.array([[0.0, 0.0], [1.0, 1.0]]), UNIT_SQUARE,
                          [np.array([[0, 0], [0.1, 0], [0, 0.1]]), np.array([[1, 1], [0.9, 1], [1, 0.9]])])
    with pytest.raises(InvalidScenario):
        adjacency_laplacian(part)
    with pytest.raises(InvalidArgument):
        adjacency_laplacian(part, weight=0.0)


def test_outbranching_path_and_star():
    path = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert build_outbranching(path, 0).edges() == [(0, 1), (1, 2)]
    star = np.zeros((4, 4), dtype=int)
    star[0, 1:] = star[1:, 0] = 1
    assert build_outbranching(star, 0).edges() == [(0, 1), (0, 2), (0, 3)]


def test_quadrant_outbranchings_reach_everyone():
    part = build_partition(QUADRANTS, UNIT_SQUARE, reference_basis())
    for j, tree in enumerate(part.outbranchings):
        assert tree.root == j
        assert tree.reachable() == {0, 1, 2, 3}
        assert tree.depth() <= 2
    table = part.parent_table()
    assert np.all(np.diag(table) == -1)
    assert np.all(table[~np.eye(4, dtype=bool)] >= 0)


def test_directed_consensus_spectrum():
    part = build_partition(SEED3_POSITIONS, UNIT_SQUARE, reference_basis())
    for tree in part.outbranchings:
        n = part.n_agents
        # dynamics of non-root copies: db_i = -(b_i - b_parent(i))
        a = np.zeros((n, n))
        for child, par in tree.parent.items():
            a[child, child] = -1.0
            a[child, par] = 1.0
        keep = [i for i in range(n) if i != tree.root]
        ev = np.linalg.eigvals(-a[np.ix_(keep, keep)])
        assert np.all(ev.real > 0)


def test_laplacian_helper():
    adj = np.array([[0, 1], [1, 0]], dtype=bool)
    np.testing.assert_array_equal(laplacian_from_adjacency(adj, 3.0), [[3, -3], [-3, 3]])


def test_cells_csv(tmp_path):
    cells = voronoi_cells(QUADRANTS, UNIT_SQUARE)
    path = tmp_path / "cells.csv"
    write_cells_csv(path, cells)
    lines = path.read_text().splitlines()
    assert lines[0] == "agent_id,vertex_index,x,y"
    assert len(lines) == 1 + sum(len(c) for c in cells)
