"""Voronoi partitions of a box, with centre ownership and the sensor graphs.

Cells are built by clipping the box against one perpendicular-bisector
half-plane per other generator.  Every cell is a convex polygon stored as a
counter-clockwise ``(k, 2)`` vertex array.
"""

import csv
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, InvalidScenario
from .field import Box

log = logging.getLogger(__name__)

SHARED_EDGE_TOL = 1e-9
_ON_LINE_TOL = 1e-10


def clip_halfplane(poly, normal, offset):
    """Keep the part of a convex polygon with ``normal . q <= offset``."""
    if len(poly) == 0:
        return poly
    out = []
    vals = poly @ normal - offset
    k = len(poly)
    for idx in range(k):
        cur, nxt = poly[idx], poly[(idx + 1) % k]
        vc, vn = vals[idx], vals[(idx + 1) % k]
        if vc <= 0.0:
            out.append(cur)
        if (vc < 0.0 < vn) or (vn < 0.0 < vc):
            t = vc / (vc - vn)
            out.append(cur + t * (nxt - cur))
    if len(out) < 3:
        return np.empty((0, 2))
    return _dedupe(np.array(out))


def _dedupe(poly, tol=1e-14):
    keep = [poly[0]]
    for v in poly[1:]:
        if np.linalg.norm(v - keep[-1]) > tol:
            keep.append(v)
    if len(keep) > 1 and np.linalg.norm(keep[0] - keep[-1]) <= tol:
        keep.pop()
    return np.array(keep)


def polygon_area(poly):
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(poly):
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def point_in_convex(poly, q, tol=1e-12):
    """True if ``q`` is inside or on the boundary of a CCW convex polygon."""
    edges = np.roll(poly, -1, axis=0) - poly
    rel = q - poly
    cross = edges[:, 0] * rel[:, 1] - edges[:, 1] * rel[:, 0]
    return bool(np.all(cross >= -tol))


def voronoi_cells(positions, box: Box):
    """Bounded Voronoi cells of ``positions`` clipped to ``box``."""
    pts = np.asarray(positions, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidArgument("generators must be an (N, 2) array")
    n = len(pts)
    for i in range(n):
        if not box.contains(pts[i]):
            raise InvalidArgument(f"generator {i} lies outside the domain")
        for j in range(i):
            if np.linalg.norm(pts[i] - pts[j]) <= 1e-12:
                raise InvalidArgument(f"generators {j} and {i} coincide")
    cells = []
    for i in range(n):
        poly = box.corners().astype(float)
        for j in range(n):
            if j == i:
                continue
            normal = pts[j] - pts[i]
            offset = 0.5 * (pts[j] @ pts[j] - pts[i] @ pts[i])
            poly = clip_halfplane(poly, normal, offset)
        cells.append(poly)
    return cells


def shared_edge_length(cells, generators, i, j):
    """Length of the common boundary of cells ``i`` and ``j``."""
    normal = generators[j] - generators[i]
    offset = 0.5 * (generators[j] @ generators[j] - generators[i] @ generators[i])
    scale = np.linalg.norm(normal)
    on_line = [v for v in cells[i] if abs(v @ normal - offset) <= _ON_LINE_TOL * max(1.0, scale)]
    if len(on_line) < 2:
        return 0.0
    pts = np.array(on_line)
    return float(max(np.linalg.norm(a - b) for a in pts for b in pts))


@dataclass
class PartitionGraph:
    """Permanent assignment of regions and kernels to agents, with the graph structure."""

    generators: np.ndarray
    box: Box
    cells: list
    owner_of_centre: np.ndarray = None
    blocks: list = None
    laplacian: np.ndarray = None
    outbranchings: list = field(default_factory=list)

    @property
    def n_agents(self):
        return len(self.generators)

    def parent_table(self):
        """``parent[j, i]``: in-neighbour of ``i`` in the tree rooted at ``j``."""
        n = self.n_agents
        table = np.full((n, n), -1, dtype=np.int64)
        for j, tree in enumerate(self.outbranchings):
            for child, par in tree.parent.items():
                table[j, child] = par
        return table


def voronoi_partition(positions, box: Box):
    pts = np.array(positions, dtype=float)
    return PartitionGraph(generators=pts, box=box, cells=voronoi_cells(pts, box))


def assign_centres(partition: PartitionGraph, basis):
    """Give each kernel centre to the agent whose cell contains it.

    Ties on a shared boundary go to the lowest agent index.  Agents that end
    up with no centres are logged; they contribute an empty block.
    """
    gens = partition.generators
    owner = np.empty(basis.p, dtype=np.int64)
    for k, c in enumerate(basis.centres):
        d = np.linalg.norm(gens - c, axis=1)
        owner[k] = int(np.flatnonzero(d <= d.min() + 1e-12)[0])
    blocks = [np.flatnonzero(owner == i) for i in range(partition.n_agents)]
    for i, b in enumerate(blocks):
        if len(b) == 0:
            log.warning("agent %d owns no kernel centres; it contributes no block", i)
    partition.owner_of_centre = owner
    partition.blocks = blocks
    return owner, blocks


def adjacency_matrix(partition: PartitionGraph):
    n = partition.n_agents
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            length = shared_edge_length(partition.cells, partition.generators, i, j)
            if length > SHARED_EDGE_TOL:
                adj[i, j] = adj[j, i] = True
    return adj


def laplacian_from_adjacency(adj, weight=1.0):
    w = weight * adj.astype(float)
    return np.diag(w.sum(axis=1)) - w


def is_connected(adj):
    n = len(adj)
    if n == 0:
        return True
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if v not in seen:
                seen.add(int(v))
                queue.append(int(v))
    return len(seen) == n


def adjacency_laplacian(partition: PartitionGraph, weight=1.0):
    """Graph Laplacian of the cell-adjacency graph with uniform edge weight."""
    if weight <= 0:
        raise InvalidArgument("edge weight must be positive")
    adj = adjacency_matrix(partition)
    if not is_connected(adj):
        raise InvalidScenario("cell adjacency graph is disconnected")
    partition.laplacian = laplacian_from_adjacency(adj, weight)
    return partition.laplacian


@dataclass
class Outbranching:
    """Directed spanning tree; ``parent[child] = parent_agent`` for every non-root node."""

    root: int
    parent: dict
    weight: float = 1.0

    def edges(self):
        return sorted((p, c) for c, p in self.parent.items())

    def depth(self):
        def level(node):
            d = 0
            while node != self.root:
                node = self.parent[node]
                d += 1
            return d

        return max([level(c) for c in self.parent] + [0])

    def reachable(self):
        children = {}
        for c, p in self.parent.items():
            children.setdefault(p, []).append(c)
        seen = {self.root}
        stack = [self.root]
        while stack:
            u = stack.pop()
            for v in children.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen


def build_outbranching(adj, root, weight=1.0):
    """Breadth-first tree from ``root``; neighbours are visited in index order."""
    adj = np.asarray(adj) != 0
    n = len(adj)
    parent = {}
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in range(n):
            if adj[u, v] and v not in seen:
                seen.add(v)
                parent[v] = u
                queue.append(v)
    return Outbranching(root=root, parent=parent, weight=weight)


def build_partition(positions, box: Box, basis, weight=1.0, cross_weight=1.0):
    """Partition with centre ownership, Laplacian and one outbranching per root."""
    part = voronoi_partition(positions, box)
    assign_centres(part, basis)
    adjacency_laplacian(part, weight)
    adj = part.laplacian < 0
    part.outbranchings = [build_outbranching(adj, j, cross_weight) for j in range(part.n_agents)]
    return part


def write_cells_csv(path, cells):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "vertex_index", "x", "y"])
        for i, poly in enumerate(cells):
            for k, (x, y) in enumerate(poly):
                w.writerow([i, k, repr(float(x)), repr(float(y))])
