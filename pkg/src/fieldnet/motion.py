"""Single-integrator agents on waypoint tours, with excitation monitoring.

Agents track waypoints with the stable proportional law
``dx/dt = -gain * (x - goal)``, integrated by classical RK4 on the shared
simulation clock.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .partition import point_in_convex, polygon_centroid, voronoi_cells
from .rbf import DominanceSet, in_dominance_set, satisfies_sufficient_condition

REACH_RULES = ("radius", "dominance", "sufficient")


def rk4_stage_positions(x, goal, gain, dt):
    """Positions at the four RK4 stages and after the step.

    ``x`` and ``goal`` may be ``(2,)`` or batched ``(N, 2)``; ``gain`` a scalar
    or ``(N,)``.  Returns ``(stages, x_new)`` with ``stages`` shaped
    ``(4,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    gain = np.asarray(gain, dtype=float)
    if gain.ndim:
        gain = gain[:, None]

    def f(y):
        return -gain * (y - goal)

    k1 = f(x)
    x2 = x + 0.5 * dt * k1
    k2 = f(x2)
    x3 = x + 0.5 * dt * k2
    k3 = f(x3)
    x4 = x + dt * k3
    k4 = f(x4)
    x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return np.stack([x, x2, x3, x4]), x_new


@dataclass
class Tour:
    """Cyclic waypoint list: kernel indices and the target points."""

    indices: np.ndarray
    points: np.ndarray
    rule: str = "radius"
    epsilon: float = 0.5

    def __len__(self):
        return len(self.indices)


def plan_tour(cell, owned_centres, start, indices=None, mode="radius", epsilon=0.5):
    """Order the owned centres by greedy nearest-neighbour from ``start``.

    ``mode`` names the reach rule used later: ``radius`` (pass through the
    centre), ``dominance`` (enter the dominance set of the centre), or
    ``sufficient`` (meet the kernel-space sufficient condition).
    """
    if mode not in REACH_RULES:
        raise InvalidArgument(f"unknown tour mode {mode!r}")
    pts = np.asarray(owned_centres, dtype=float).reshape(-1, 2)
    idx = np.arange(len(pts)) if indices is None else np.asarray(indices, dtype=int)
    if cell is not None and len(cell):
        for c in pts:
            if not point_in_convex(cell, c, tol=1e-9):
                raise InvalidArgument(f"centre {c.tolist()} lies outside the agent's cell")
    order = []
    remaining = list(range(len(pts)))
    here = np.asarray(start, dtype=float)
    while remaining:
        d = [np.linalg.norm(pts[r] - here) for r in remaining]
        nxt = remaining.pop(int(np.argmin(d)))
        order.append(nxt)
        here = pts[nxt]
    order = np.array(order, dtype=int)
    return Tour(indices=idx[order] if len(order) else idx[:0],
                points=pts[order] if len(order) else pts[:0], rule=mode, epsilon=epsilon)


@dataclass
class AgentMotion:
    position: np.ndarray
    gain: float
    tour: Tour
    reach_radius: float = 0.01
    current: int = 0
    visits: list = field(default_factory=list)
    laps: int = 0

    @property
    def goal(self):
        if len(self.tour) == 0:
            return self.position
        return self.tour.points[self.current]

    def target_index(self):
        return int(self.tour.indices[self.current]) if len(self.tour) else -1

    def reached(self, basis=None):
        if len(self.tour) == 0:
            return False
        rule = self.tour.rule
        if rule == "radius":
            return bool(np.linalg.norm(self.position - self.goal) < self.reach_radius)
        j = self.target_index()
        if rule == "dominance":
            return in_dominance_set(DominanceSet(self.tour.epsilon, basis), self.position, j)
        return satisfies_sufficient_condition(basis, self.tour.epsilon, j, self.position)

    def advance(self, t):
        self.visits.append((t, self.target_index()))
        self.current += 1
        if self.current == len(self.tour):
            self.current = 0
            self.laps += 1


def control_step(motion: AgentMotion, dt, t=0.0, basis=None):
    """One RK4 step of proportional tracking, then the waypoint switch check."""
    if dt <= 0:
        raise InvalidArgument("dt must be positive")
    if len(motion.tour):
        _, motion.position = rk4_stage_positions(motion.position, motion.goal, motion.gain, dt)
        if motion.reached(basis):
            motion.advance(t + dt)
    return motion.position


_RK4_W = np.array([1.0, 2.0, 2.0, 1.0])


class ExcitationMonitor:
    """Running integral of ``k k^T`` with a minimum-eigenvalue threshold.

    The eigenvalue check runs on the first update and every
    ``check_interval`` updates after that.  ``achieved_time`` is set the
    first time the smallest eigenvalue reaches ``threshold``.
    """

    def __init__(self, size, threshold=1e-4, check_interval=10):
        if threshold <= 0:
            raise InvalidArgument("excitation threshold must be positive")
        self.matrix = np.zeros((size, size))
        self.threshold = threshold
        self.check_interval = max(1, int(check_interval))
        self.steps = 0
        self.min_eig = np.inf if size == 0 else 0.0
        self.achieved_time = 0.0 if size == 0 else None

    @property
    def achieved(self):
        return self.achieved_time is not None

    def _after_update(self, t):
        self.steps += 1
        if (self.steps - 1) % self.check_interval == 0:
            self.recheck(t)

    def recheck(self, t):
        if self.matrix.shape[0] == 0:
            return
        self.min_eig = float(np.linalg.eigvalsh(self.matrix)[0])
        if self.achieved_time is None and self.min_eig >= self.threshold:
            self.achieved_time = t

    def update(self, k_sample, dt, t):
        k = np.asarray(k_sample, dtype=float)
        self.matrix += dt * np.outer(k, k)
        self._after_update(t)
        return self

    def accumulate_stages(self, k_stages, dt):
        """RK4 quadrature of ``k k^T`` from four stage samples ``(4, m)``, without a check."""
        k = np.asarray(k_stages, dtype=float)
        self.matrix += (dt / 6.0) * np.einsum("s,si,sj->ij", _RK4_W, k, k)

    def update_stages(self, k_stages, dt, t):
        """Accumulate from four stage samples, then run the scheduled check."""
        self.accumulate_stages(k_stages, dt)
        self._after_update(t)
        return self


def update_excitation(monitor: ExcitationMonitor, k_sample, dt, t=0.0):
    if dt <= 0:
        raise InvalidArgument("dt must be positive")
    return monitor.update(k_sample, dt, t)


@dataclass
class LloydResult:
    positions: np.ndarray
    converged: bool
    iterations: int
    cells: list


def lloyd_uniform_coverage(positions, box, iterations=500, tol=1e-6):
    """Move every generator to the centroid of its cell until the largest step is below ``tol``."""
    x = np.array(positions, dtype=float)
    cells = voronoi_cells(x, box)
    for it in range(1, iterations + 1):
        cent = np.array([polygon_centroid(c) for c in cells])
        step = float(np.max(np.linalg.norm(cent - x, axis=1)))
        x = cent
        cells = voronoi_cells(x, box)
        if step < tol:
            return LloydResult(x, True, it, cells)
    return LloydResult(x, False, iterations, cells)
