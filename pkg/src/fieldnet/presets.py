"""Reference fields used by the bundled scenarios."""

import numpy as np

from .field import UNIT_SQUARE, AnalyticField, ExactField
from .rbf import KernelBasis, kernel_width

REFERENCE_CENTRES = np.array([
    [0.20, 0.25],
    [0.35, 0.26],
    [0.60, 0.18],
    [0.85, 0.30],
    [0.70, 0.75],
    [0.75, 0.90],
    [0.15, 0.75],
    [0.35, 0.60],
])
REFERENCE_WEIGHTS = np.array([2.0, 1.0, 1.5, 1.8, 1.2, 1.6, 2.5, 1.1])
# standard deviation of each bump; see kernel_width
REFERENCE_SIGMA = 0.1

# amplitude, x power, centre x, centre y, spread
THREE_BUMP_TERMS = np.array([
    [3.0, 2.0, 0.7, 0.7, 0.05],
    [1.0, 0.0, 0.4, 0.4, 0.06],
    [1.0 / 3.0, 0.0, 0.2, 0.2, 0.08],
])


def reference_basis(convention="std"):
    return KernelBasis(REFERENCE_CENTRES, kernel_width(REFERENCE_SIGMA, convention))


def reference_field(convention="std"):
    """Eight Gaussian bumps of standard deviation 0.1 on the unit square.

    ``convention="width"`` uses 0.1 as the kernel width instead.
    """
    return ExactField(reference_basis(convention), REFERENCE_WEIGHTS, UNIT_SQUARE)


def three_bump_field():
    """Smooth field outside any finite Gaussian span, used for reconstruction sweeps."""
    return AnalyticField("gaussian_bumps", THREE_BUMP_TERMS, UNIT_SQUARE)
