import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldnet.errors import ConditioningError, InvalidArgument
from fieldnet.presets import REFERENCE_CENTRES, reference_basis
from fieldnet.rbf import (
    DominanceSet,
    KernelBasis,
    dominance_margin,
    dominance_margins,
    gaussian_lipschitz,
    grid_basis,
    in_dominance_set,
    interpolation_coords,
    kernel_vector,
    kernel_width,
    micchelli_matrix,
    satisfies_sufficient_condition,
    sufficient_neighborhood_radius,
)

# smallest eigenvalue of the reference kernel matrix, from scipy.linalg.eigh on
# a matrix assembled with math.exp
REF_MIN_EIG_WIDTH_01 = 0.8956445507969251
REF_MIN_EIG_STD_01 = 0.6754049852034295


def _random_basis(rng, p, lo=0.03, hi=0.3):
    while True:
        c = rng.uniform(0, 1, size=(p, 2))
        d = np.linalg.norm(c[:, None] - c[None], axis=-1)
        if p == 1 or d[np.triu_indices(p, 1)].min() > 0.05:
            return KernelBasis(c, rng.uniform(lo, hi, size=p))


def test_kernel_is_one_at_own_centre():
    b = reference_basis()
    for j, c in enumerate(REFERENCE_CENTRES):
        assert b.kernel_vector(c)[j] == 1.0


def test_reference_kernel_values_width_reading():
    b = reference_basis("width")
    k = b.kernel_vector([0.20, 0.25])
    assert k[0] == 1.0
    assert k[1] == pytest.approx(math.exp(-(0.15**2 + 0.01**2) / 0.01), rel=1e-14)


def test_single_kernel_unit_width():
    b = KernelBasis([[0.0, 0.0]], 1.0)
    np.testing.assert_allclose(b.kernel_vector([1.0, 0.0]), [math.exp(-1.0)], rtol=1e-15)


def test_batch_matches_single_points(rng):
    b = reference_basis()
    q = rng.uniform(0, 1, size=(7, 2))
    batch = b.kernel_vector(q)
    for m in range(7):
        np.testing.assert_array_equal(batch[m], b.kernel_vector(q[m]))


def test_kernel_vector_rejects_bad_points():
    b = reference_basis()
    with pytest.raises(InvalidArgument):
        b.kernel_vector([0.1, 0.2, 0.3])
    with pytest.raises(InvalidArgument):
        b.kernel_vector([np.nan, 0.2])


def test_basis_validation():
    with pytest.raises(InvalidArgument):
        KernelBasis(np.empty((0, 2)), 0.1)
    with pytest.raises(InvalidArgument):
        KernelBasis([[0.0, 0.0], [1.0, 1.0]], [0.1, -0.1])
    with pytest.raises(InvalidArgument):
        KernelBasis([[0.0, 0.0], [0.0, 0.0]], 0.1)


def test_micchelli_single_kernel():
    np.testing.assert_array_equal(micchelli_matrix(KernelBasis([[0.3, 0.3]], 0.2)), [[1.0]])


def test_micchelli_two_kernels_closed_form():
    d, w = 0.13, 0.2
    b = KernelBasis([[0.2, 0.5], [0.2 + d, 0.5]], w)
    e = math.exp(-(d**2) / w**2)
    m = micchelli_matrix(b)
    np.testing.assert_allclose(m, [[1.0, e], [e, 1.0]], rtol=1e-14)
    np.testing.assert_allclose(np.linalg.eigvalsh(m), [1 - e, 1 + e], rtol=1e-12)


def test_micchelli_reference_regression():
    m = micchelli_matrix(reference_basis("width"))
    np.testing.assert_array_equal(np.diag(m), np.ones(8))
    assert np.linalg.eigvalsh(m)[0] == pytest.approx(REF_MIN_EIG_WIDTH_01, rel=1e-12)
    m = micchelli_matrix(reference_basis())
    assert np.linalg.eigvalsh(m)[0] == pytest.approx(REF_MIN_EIG_STD_01, rel=1e-12)


def test_micchelli_nonsingular_over_random_widths(rng):
    for _ in range(200):
        p = int(rng.integers(1, 16))
        m = micchelli_matrix(_random_basis(rng, p))
        # unequal widths make K non-symmetric; definiteness is checked on the symmetric part
        if np.allclose(m, m.T):
            assert np.linalg.eigvalsh(m)[0] > 0
        assert abs(np.linalg.det(m)) > 0


def test_micchelli_pd_equal_widths(rng):
    for _ in range(200):
        p = int(rng.integers(2, 16))
        b = _random_basis(rng, p)
        b = KernelBasis(b.centres, float(rng.uniform(0.03, 0.3)))
        assert np.linalg.eigvalsh(micchelli_matrix(b))[0] > 0


def test_near_singular_basis_is_reported():
    c = np.array([[0.5, 0.5], [0.5 + 2e-6, 0.5], [0.5, 0.5 + 2e-6]])
    b = KernelBasis(c, 1.0)
    with pytest.raises(ConditioningError):
        b.interpolation_coords([0.4, 0.4])


def test_interpolation_delta_property():
    b = reference_basis()
    for j, c in enumerate(b.centres):
        np.testing.assert_allclose(interpolation_coords(b, c), np.eye(8)[j], atol=1e-8)


def test_interpolation_single_kernel():
    b = KernelBasis([[0.5, 0.5]], 0.3)
    q = np.array([0.6, 0.45])
    np.testing.assert_allclose(b.interpolation_coords(q), kernel_vector(b, q), rtol=1e-14)


def test_interpolation_two_routes_agree():
    b = reference_basis()
    q = np.array([0.5, 0.5])
    via_inverse = np.linalg.inv(micchelli_matrix(b)) @ kernel_vector(b, q)
    via_solve = scipy.linalg.solve(micchelli_matrix(b), kernel_vector(b, q))
    np.testing.assert_allclose(b.interpolation_coords(q), via_inverse, atol=1e-10)
    np.testing.assert_allclose(b.interpolation_coords(q), via_solve, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_interpolation_reproduces_kernel_vector(x, y):
    b = reference_basis()
    q = np.array([x, y])
    np.testing.assert_allclose(micchelli_matrix(b) @ b.interpolation_coords(q), b.kernel_vector(q), atol=1e-12)


def test_dominance_margin_at_centre_is_one():
    dom = DominanceSet(0.5, reference_basis())
    for j, c in enumerate(REFERENCE_CENTRES):
        margin, idx = dominance_margin(dom, c)
        assert idx == j
        assert margin == pytest.approx(1.0, abs=1e-8)
        assert in_dominance_set(dom, c, j)


def test_dominance_symmetric_midpoint():
    b = KernelBasis([[0.3, 0.5], [0.7, 0.5]], 0.3)
    m = dominance_margins(b, [0.5, 0.5])
    assert m[0] == pytest.approx(m[1], abs=1e-14)
    dom = DominanceSet(0.99, b)
    assert not in_dominance_set(dom, [0.5, 0.5], 0)
    assert not in_dominance_set(dom, [0.5, 0.5], 1)


def test_dominance_membership_map_brute_force():
    b = reference_basis()
    dom = DominanceSet(0.5, b)
    kinv = np.linalg.inv(micchelli_matrix(b))
    xs = (np.arange(50) + 0.5) / 50
    for x in xs:
        for y in xs:
            q = np.array([x, y])
            coords = np.abs(kinv @ np.exp(-np.sum((b.centres - q) ** 2, axis=1) / b.widths**2))
            for j in range(b.p):
                expected = coords[j] - (coords.sum() - coords[j]) > 0.5
                assert in_dominance_set(dom, q, j) == expected


def test_dominance_spec_rejects_bad_epsilon():
    with pytest.raises(InvalidArgument):
        DominanceSet(1.0, reference_basis())
    with pytest.raises(InvalidArgument):
        DominanceSet(0.0, reference_basis())


def test_sufficient_radius_closed_forms():
    b = reference_basis()
    assert sufficient_neighborhood_radius(b, 1 - 1e-12) < 1e-12
    # p = 2 with ||K^-1||_inf = 1 is only reachable in the limit of far-apart
    # kernels; there the formula gives (1 - eps) / 2
    far = KernelBasis([[0.0, 0.0], [1.0, 1.0]], 0.01)
    assert np.linalg.norm(far.micchelli_inverse, np.inf) == pytest.approx(1.0, abs=1e-12)
    assert sufficient_neighborhood_radius(far, 0.5) == pytest.approx(0.25, abs=1e-12)


def test_sufficient_radius_validation():
    with pytest.raises(InvalidArgument):
        sufficient_neighborhood_radius(KernelBasis([[0.5, 0.5]], 0.1), 0.5)
    with pytest.raises(InvalidArgument):
        sufficient_neighborhood_radius(reference_basis(), 0.5, j=8)


def _sufficient_points(rng, basis, eps, j, count):
    """Points passing the sufficient test for kernel j, by rejection around c_j."""
    radius = sufficient_neighborhood_radius(basis, eps, j)
    # |K(x) - K(c)| <= |x - c| * lipschitz, so this disc always contains passing points
    reach = 4.0 * radius / gaussian_lipschitz(basis.widths.min())
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        assert tries < 200 * count
        q = basis.centres[j] + rng.uniform(-reach, reach, size=2)
        if satisfies_sufficient_condition(basis, eps, j, q):
            out.append(q)
    return np.array(out)


def test_sufficient_condition_implies_dominance_reference(rng):
    b = reference_basis()
    dom = DominanceSet(0.5, b)
    for q in _sufficient_points(rng, b, 0.5, 0, 1000):
        assert dominance_margins(b, q)[0] > 0.5


def test_sufficient_condition_implies_dominance_random_bases(rng):
    violations = 0
    for _ in range(20):
        b = _random_basis(rng, int(rng.integers(2, 10)), lo=0.05, hi=0.2)
        eps = float(rng.uniform(0.1, 0.9))
        j = int(rng.integers(0, b.p))
        for q in _sufficient_points(rng, b, eps, j, 1000):
            violations += not dominance_margins(b, q)[j] > eps
    assert violations == 0


def test_kernel_width_conventions():
    assert kernel_width(0.1, "width") == 0.1
    assert kernel_width(0.1) == pytest.approx(math.sqrt(2) * 0.1, rel=1e-15)
    b = KernelBasis([[0.0, 0.0]], kernel_width(0.1))
    # standard-deviation reading: exp(-r^2 / (2 sigma^2))
    assert b.kernel_vector([0.1, 0.0])[0] == pytest.approx(math.exp(-0.5), rel=1e-14)
    with pytest.raises(InvalidArgument):
        kernel_width(0.1, "variance")


def test_grid_basis_layout():
    b = grid_basis(4, 0.2)
    np.testing.assert_allclose(sorted(map(tuple, b.centres)),
                               [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)])
    assert grid_basis(100, 0.05).p == 100
    with pytest.raises(InvalidArgument):
        grid_basis(10, 0.05)


def test_gaussian_lipschitz_matches_numeric_slope():
    for w in (0.05, 0.1, 0.3):
        r = np.linspace(0, 5 * w, 200001)
        slope = np.max(np.abs(np.gradient(np.exp(-(r**2) / w**2), r)))
        assert gaussian_lipschitz(w) == pytest.approx(slope, rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.5, 1.5), st.floats(-0.5, 1.5))
def test_kernel_values_in_unit_interval(x, y):
    k = reference_basis().kernel_vector(np.array([x, y]))
    assert np.all(k > 0) and np.all(k <= 1)
    for j in np.flatnonzero(k == 1.0):
        assert np.linalg.norm(REFERENCE_CENTRES[j] - [x, y]) < 1e-7
