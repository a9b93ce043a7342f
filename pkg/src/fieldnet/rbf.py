"""Gaussian radial basis functions and the excitation geometry built on them.

A :class:`KernelBasis` holds ``p`` centres in ``R^n`` with one width each.
The kernel vector at ``q`` has components ``exp(-|c_i - q|^2 / sigma_i^2)``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.spatial

from . import _backend
from .errors import ConditioningError, InvalidArgument

MIN_CENTRE_SEPARATION = 1e-6
MAX_CONDITION = 1e12


class KernelBasis:
    """Immutable set of Gaussian kernels.

    Args:
        centres: array of shape ``(p, n)``.
        widths: scalar (shared width) or array of shape ``(p,)``.
    """

    def __init__(self, centres, widths):
        centres = np.array(centres, dtype=float, ndmin=2)
        if centres.ndim != 2 or centres.shape[0] < 1 or centres.shape[1] < 1:
            raise InvalidArgument("centres must be a non-empty (p, n) array")
        p = centres.shape[0]
        widths = np.broadcast_to(np.asarray(widths, dtype=float), (p,)).copy()
        if not np.all(np.isfinite(centres)):
            raise InvalidArgument("centres must be finite")
        if not np.all(widths > 0) or not np.all(np.isfinite(widths)):
            raise InvalidArgument("all kernel widths must be positive and finite")
        if p > 1:
            d = scipy.spatial.distance.pdist(centres)
            if d.min() <= MIN_CENTRE_SEPARATION:
                raise InvalidArgument(
                    f"centres must be pairwise distinct (min separation {d.min():.3g})"
                )
        centres.setflags(write=False)
        widths.setflags(write=False)
        self._centres = centres
        self._widths = widths
        self._inv_sigma2 = np.ascontiguousarray(1.0 / widths**2)

    @property
    def centres(self):
        return self._centres

    @property
    def widths(self):
        return self._widths

    @property
    def p(self):
        return self._centres.shape[0]

    @property
    def dim(self):
        return self._centres.shape[1]

    def __repr__(self):
        return f"KernelBasis(p={self.p}, dim={self.dim})"

    def kernel_vector(self, q):
        """Kernel vector at one point ``(n,)`` or a batch ``(m, n)``."""
        q = np.asarray(q, dtype=float)
        single = q.ndim == 1
        pts = np.ascontiguousarray(q.reshape(1, -1) if single else q)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise InvalidArgument(
                f"point dimension {pts.shape[-1]} does not match basis dimension {self.dim}"
            )
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("query point must be finite")
        out = _backend.gaussian_kernels(pts, np.ascontiguousarray(self._centres), self._inv_sigma2)
        return out[0] if single else out

    @cached_property
    def micchelli(self):
        """``K[i, j]`` = kernel ``i`` evaluated at centre ``j``."""
        m = self.kernel_vector(self._centres).T
        m.setflags(write=False)
        return m

    @cached_property
    def _lu(self):
        k = self.micchelli
        inv = np.linalg.inv(k)
        cond = np.linalg.norm(k, 1) * np.linalg.norm(inv, 1)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise ConditioningError("kernel matrix is numerically singular", cond)
        return scipy.linalg.lu_factor(k), inv, cond

    @property
    def condition(self):
        return self._lu[2]

    @property
    def micchelli_inverse(self):
        return self._lu[1]

    def interpolation_coords(self, q):
        """``K^{-1} K(q)`` via the cached LU factorization."""
        kq = self.kernel_vector(q)
        return scipy.linalg.lu_solve(self._lu[0], kq.T).T

    def subset(self, indices):
        idx = np.asarray(indices, dtype=int)
        return KernelBasis(self._centres[idx], self._widths[idx])


def kernel_vector(basis, q):
    return basis.kernel_vector(q)


def micchelli_matrix(basis):
    return np.array(basis.micchelli)


def interpolation_coords(basis, q):
    return basis.interpolation_coords(q)


SIGMA_CONVENTIONS = ("std", "width")


def kernel_width(sigma, convention="std"):
    """Kernel width for a scenario-level ``sigma``.

    ``std`` reads ``sigma`` as the standard deviation of the Gaussian bump,
    i.e. ``exp(-r^2 / (2 sigma^2))``, so the width is ``sqrt(2) * sigma``.
    ``width`` passes ``sigma`` through unchanged.
    """
    if convention not in SIGMA_CONVENTIONS:
        raise InvalidArgument(f"unknown sigma convention {convention!r}")
    sigma = np.asarray(sigma, dtype=float)
    return np.sqrt(2.0) * sigma if convention == "std" else sigma


def grid_basis(p, sigma, lower=(0.0, 0.0), upper=(1.0, 1.0)):
    """Square grid of ``p`` centres, offset half a cell from the box edges."""
    side = int(round(np.sqrt(p)))
    if side * side != p:
        raise InvalidArgument(f"grid basis needs a perfect square p, got {p}")
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    ticks = [(np.arange(side) + 0.5) / side * (hi[k] - lo[k]) + lo[k] for k in range(2)]
    gx, gy = np.meshgrid(ticks[0], ticks[1], indexing="xy")
    return KernelBasis(np.column_stack([gx.ravel(), gy.ravel()]), sigma)


@dataclass(frozen=True)
class DominanceSet:
    epsilon: float
    basis: KernelBasis

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidArgument("epsilon must lie in (0, 1)")


def dominance_margins(basis, q):
    """Per-index margins ``|X^j| - sum_{i != j} |X^i|`` at ``q``."""
    x = np.abs(basis.interpolation_coords(q))
    return 2.0 * x - x.sum(axis=-1, keepdims=True)


def dominance_margin(dom, q):
    """Largest dominance margin at ``q`` and the index attaining it.

    ``q`` lies in the dominance set of that index iff the margin exceeds
    ``dom.epsilon``; no other index can qualify, since at most one
    component can outweigh all the others.
    """
    margins = dominance_margins(dom.basis, q)
    j = int(np.argmax(margins))
    return float(margins[j]), j


def in_dominance_set(dom, q, j):
    return bool(dominance_margins(dom.basis, q)[j] > dom.epsilon)


def sufficient_neighborhood_radius(basis, epsilon, j=0):
    """Kernel-space sup-norm radius around ``K(c_j)`` that guarantees membership.

    Any ``x`` with ``|K(x) - K(c_j)|_inf`` below the returned value lies in
    the dominance set of ``j``.  The threshold is the same for every ``j``.
    """
    if basis.p < 2:
        raise InvalidArgument("the sufficient condition needs at least two kernels")
    if not 0.0 < epsilon < 1.0:
        raise InvalidArgument("epsilon must lie in (0, 1)")
    if not 0 <= j < basis.p:
        raise InvalidArgument(f"kernel index {j} out of range")
    inv_norm = np.linalg.norm(basis.micchelli_inverse, np.inf)
    return (1.0 - epsilon) / (2.0 * (basis.p - 1) * inv_norm)


def satisfies_sufficient_condition(basis, epsilon, j, x):
    radius = sufficient_neighborhood_radius(basis, epsilon, j)
    gap = np.abs(basis.kernel_vector(x) - basis.micchelli[:, j])
    return bool(gap.max() < radius)


def gaussian_lipschitz(sigma):
    """Largest slope of ``r -> exp(-r^2 / sigma^2)``, attained at ``r = sigma / sqrt(2)``."""
    return np.sqrt(2.0) / sigma * np.exp(-0.5)
