"""Ground-truth scalar fields and reconstruction error metrics."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, OutOfDomain
from .rbf import KernelBasis

DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle ``[lower, upper]``."""

    lower: tuple = (0.0, 0.0)
    upper: tuple = (1.0, 1.0)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or any(h <= l for l, h in zip(lo, hi)):
            raise InvalidArgument("box needs upper > lower on every axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def area(self):
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, q, tol=DOMAIN_TOL):
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= np.asarray(self.lower) - tol) and np.all(q <= np.asarray(self.upper) + tol))

    def clamp(self, q):
        return np.clip(q, self.lower, self.upper)

    def corners(self):
        (x0, y0), (x1, y1) = self.lower, self.upper
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])


UNIT_SQUARE = Box()


class FieldModel:
    """Common interface: ``values(points)`` on an ``(m, n)`` batch."""

    domain: Box = UNIT_SQUARE

    def values(self, points):
        raise NotImplementedError

    def measure(self, q):
        """Noise-free field value at a single point inside the domain."""
        q = np.asarray(q, dtype=float)
        if not self.domain.contains(q):
            raise OutOfDomain(f"point {q.tolist()} lies outside the field domain")
        return float(self.values(q.reshape(1, -1))[0])


class ExactField(FieldModel):
    """Field that is exactly a weighted sum of the kernels of ``basis``."""

    def __init__(self, basis: KernelBasis, a, domain: Box = UNIT_SQUARE, a_max=None):
        a = np.array(a, dtype=float)
        if a.shape != (basis.p,):
            raise InvalidArgument(f"parameter vector must have length {basis.p}")
        self.basis = basis
        self.a = a
        self.a.setflags(write=False)
        self.domain = domain
        bound = float(np.max(np.abs(a))) if a_max is None else float(a_max)
        if np.any(np.abs(a) > bound + 1e-15):
            raise InvalidArgument("a parameter exceeds the declared a_max")
        self.a_max = bound

    def values(self, points):
        return self.basis.kernel_vector(np.atleast_2d(points)) @ self.a


class AnalyticField(FieldModel):
    """Closed-form fields identified by name.

    ``constant``: coefficients ``[c]``.
    ``gaussian_bumps``: rows of ``(amplitude, x_power, centre_x, centre_y, spread)``,
    each term ``amplitude * x**x_power * exp(-|q - centre|^2 / spread)``.
    """

    FORMULAS = ("constant", "gaussian_bumps")

    def __init__(self, formula: str, coefficients, domain: Box = UNIT_SQUARE):
        if formula not in self.FORMULAS:
            raise InvalidArgument(f"unknown formula {formula!r}; expected one of {self.FORMULAS}")
        coeffs = np.array(coefficients, dtype=float)
        if formula == "constant" and coeffs.size != 1:
            raise InvalidArgument("constant field takes exactly one coefficient")
        if formula == "gaussian_bumps":
            if coeffs.size == 0 or coeffs.size % 5:
                raise InvalidArgument("gaussian_bumps takes rows of five coefficients")
            coeffs = coeffs.reshape(-1, 5)
            if np.any(coeffs[:, 4] <= 0):
                raise InvalidArgument("bump spreads must be positive")
        self.formula = formula
        self.coefficients = coeffs
        self.domain = domain

    def values(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.formula == "constant":
            return np.full(pts.shape[0], float(self.coefficients.ravel()[0]))
        x, y = pts[:, 0], pts[:, 1]
        out = np.zeros(pts.shape[0])
        for amp, power, cx, cy, spread in self.coefficients:
            out += amp * x**power * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / spread)
        return out


@dataclass
class NoisyField(FieldModel):
    """Wraps a field with additive Gaussian measurement noise (off by default)."""

    inner: FieldModel
    std: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.domain = self.inner.domain
        self._rng = np.random.default_rng(self.seed)

    def values(self, points):
        clean = self.inner.values(points)
        if self.std == 0.0:
            return clean
        return clean + self._rng.normal(0.0, self.std, size=clean.shape)


@dataclass(frozen=True)
class RegularGrid:
    """``nx`` by ``ny`` nodes spanning the box, endpoints included."""

    nx: int
    ny: int
    box: Box = UNIT_SQUARE

    def nodes(self):
        xs = np.linspace(self.box.lower[0], self.box.upper[0], self.nx)
        ys = np.linspace(self.box.lower[1], self.box.upper[1], self.ny)
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        return np.column_stack([gx.ravel(), gy.ravel()])


def midpoints(box: Box, resolution: int):
    if resolution < 2:
        raise InvalidArgument("integration resolution must be at least 2 per axis")
    (x0, y0), (x1, y1) = box.lower, box.upper
    hx = (x1 - x0) / resolution
    hy = (y1 - y0) / resolution
    xs = x0 + (np.arange(resolution) + 0.5) * hx
    ys = y0 + (np.arange(resolution) + 0.5) * hy
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([gx.ravel(), gy.ravel()]), hx * hy


def reconstruct(basis: KernelBasis, a_hat, grid: RegularGrid):
    """Estimated field on the grid nodes, shape ``(ny, nx)`` (rows are y)."""
    a_hat = np.asarray(a_hat, dtype=float)
    if a_hat.shape != (basis.p,):
        raise InvalidArgument(f"estimate must have length {basis.p}")
    vals = basis.kernel_vector(grid.nodes()) @ a_hat
    return vals.reshape(grid.ny, grid.nx)


def integral_error(field_model: FieldModel, basis: KernelBasis, a_hat, resolution=200, norm="l1"):
    """Midpoint-rule integral of the reconstruction error over the field domain.

    ``norm="l1"`` integrates ``|phi - K^T a_hat|``; ``norm="l2"`` returns the
    square root of the integrated squared error.
    """
    pts, cell = midpoints(field_model.domain, resolution)
    err = field_model.values(pts) - basis.kernel_vector(pts) @ np.asarray(a_hat, dtype=float)
    if norm == "l1":
        return float(np.sum(np.abs(err)) * cell)
    if norm == "l2":
        return float(np.sqrt(np.sum(err * err) * cell))
    raise InvalidArgument(f"unknown norm {norm!r}")


def check_nonnegative(field_model: FieldModel, resolution=50):
    """Smallest sampled field value; raises when the field dips below zero."""
    pts, _ = midpoints(field_model.domain, resolution)
    lo = float(field_model.values(pts).min())
    if lo < 0.0:
        raise InvalidArgument(f"field takes negative value {lo:.3g} on the domain")
    return lo
