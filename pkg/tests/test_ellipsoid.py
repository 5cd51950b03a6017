from math import pi, sqrt

import numpy as np
import pytest
from scipy import optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from symbarrier.ellipsoid import (
    Ellipsoid,
    gauge,
    grid_approximation_inflation,
    membership,
    slice_area,
    slice_area_monte_carlo,
    slice_area_scan,
    slice_area_sup,
    support,
    support_many,
    width_min,
    width_min_direction,
)
from symbarrier.embedding import sample_ellipsoid
from symbarrier.errors import DimensionError, DomainError, ValidationError
from symbarrier.linalg import polterovich_matrix, scaling_map

EXAMPLE = Ellipsoid(scaling_map(2, 2) @ polterovich_matrix(0.5))


def slice_reference(alpha):
    # zero slice of M_alpha B^4: restricting |M^{-1} x|^2 to z_2 = 0 gives an
    # ellipse with det = (1 + alpha^2) / alpha^2
    return pi * alpha / sqrt(alpha**2 + 1)


def unit_vectors(rng, k, d=4):
    u = rng.standard_normal((k, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def test_generator_is_read_only():
    E = Ellipsoid(np.eye(4))
    with pytest.raises(ValueError):
        E.generator[0, 0] = 2.0


def test_odd_dimension_rejected():
    with pytest.raises(DimensionError):
        Ellipsoid(np.eye(3))


def test_volume():
    E = Ellipsoid(np.diag([2.0, 1.0, 1.0, 0.5]))
    assert E.volume() == pytest.approx(pi**2 / 2)


def test_json_round_trip():
    E = Ellipsoid.from_json(EXAMPLE.to_json())
    assert np.array_equal(E.generator, EXAMPLE.generator)


def test_support_ball(rng):
    for u in unit_vectors(rng, 5):
        assert support(Ellipsoid.ball(2), u) == pytest.approx(1.0)


def test_support_diagonal():
    assert support(Ellipsoid(np.diag([2.0, 1, 1, 1])), [1.0, 0, 0, 0]) == 2.0


def test_support_requires_unit_vector():
    with pytest.raises(ValidationError):
        support(Ellipsoid.ball(2), [1.0, 1.0, 0, 0])


def test_support_equals_width_at_minimizer():
    u = width_min_direction(EXAMPLE)
    assert support(EXAMPLE, u) == pytest.approx(width_min(EXAMPLE), abs=1e-12)


def test_width_values():
    assert width_min(Ellipsoid.ball(2)) == pytest.approx(1.0)
    assert width_min(Ellipsoid(np.diag([3.0, 0.5, 1, 1]))) == pytest.approx(0.5)
    assert width_min(EXAMPLE) == pytest.approx(0.4849, abs=1e-3)


def test_width_rejects_singular():
    with pytest.raises(ValidationError):
        width_min(Ellipsoid(np.diag([1.0, 1.0, 1.0, 0.0])))


def test_width_below_support(rng):
    U = unit_vectors(rng, 10**4)
    assert np.all(width_min(EXAMPLE) <= support_many(EXAMPLE, U) + 1e-15)


def test_width_matches_dense_sphere_sample(rng):
    # The raw minimum over 1e5 uniform points sits about 1e-3 above the true
    # value (angular spacing ~0.05 rad on S^3), so the best sample is
    # polished with a derivative-free search that only evaluates support.
    U = unit_vectors(rng, 10**5)
    h = support_many(EXAMPLE, U)
    assert np.all(h >= width_min(EXAMPLE) - 1e-15)
    start = U[np.argmin(h)]
    res = optimize.minimize(
        lambda v: support(EXAMPLE, v / np.linalg.norm(v)), start, method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000},
    )
    assert abs(res.fun - width_min(EXAMPLE)) < 1e-4


def test_support_is_supremum(rng):
    x = sample_ellipsoid(EXAMPLE, 20000, rng)
    for u in unit_vectors(rng, 20):
        assert np.max(x @ u) <= support(EXAMPLE, u) + 1e-12


def test_membership_examples(rng):
    u = unit_vectors(rng, 1)[0]
    edge = EXAMPLE.generator @ u
    assert membership(EXAMPLE, np.zeros(4))
    assert gauge(EXAMPLE, edge) == pytest.approx(1.0)
    assert membership(EXAMPLE, edge * (1 - 1e-12))
    assert not membership(EXAMPLE, 1.01 * edge)
    assert membership(EXAMPLE, 1.01 * edge, slack=0.02)


def test_membership_vectorized(rng):
    x = rng.standard_normal((100, 4))
    flags = membership(EXAMPLE, x)
    assert flags.shape == (100,)
    assert np.array_equal(flags, [membership(EXAMPLE, p) for p in x])


def test_slice_area_ball():
    B = Ellipsoid.ball(2)
    assert slice_area(B, (0.0, 0.0)) == pytest.approx(pi)
    assert slice_area(B, (1.0, 0.0)) == 0.0
    assert slice_area(B, (0.8, 0.8)) == 0.0
    assert slice_area(B, (0.6, 0.0)) == pytest.approx(pi * 0.64)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 2.0])
def test_slice_area_closed_form(alpha):
    E = Ellipsoid(polterovich_matrix(alpha))
    assert slice_area(E, (0.0, 0.0)) == pytest.approx(slice_reference(alpha), rel=1e-12)


def test_slice_area_frozen_value():
    assert slice_area(Ellipsoid(polterovich_matrix(0.5)), (0, 0)) == pytest.approx(
        1.404962946208145, rel=1e-12
    )


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_slice_area_monte_carlo_oracle(alpha):
    E = Ellipsoid(polterovich_matrix(alpha))
    for b in [(0.0, 0.0), (0.1, -0.05)]:
        exact = slice_area(E, b)
        mc = slice_area_monte_carlo(E, b, samples=10**7, seed=7)
        assert mc == pytest.approx(exact, rel=1e-2)


def test_monte_carlo_independent_of_workers():
    E = Ellipsoid(polterovich_matrix(0.5))
    one = slice_area_monte_carlo(E, (0, 0), samples=10**6, seed=3, chunk=10**5)
    four = slice_area_monte_carlo(E, (0, 0), samples=10**6, seed=3, chunk=10**5, workers=4)
    assert one == four


def test_slice_sup_ball():
    best = slice_area_sup(Ellipsoid.ball(2))
    assert best.area == pytest.approx(pi)
    assert np.allclose(best.offset, 0.0, atol=1e-6)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_slice_sup_at_zero_offset(alpha):
    E = Ellipsoid(polterovich_matrix(alpha))
    best = slice_area_sup(E)
    assert np.allclose(best.offset, 0.0, atol=1e-6)
    assert best.area == pytest.approx(slice_area(E, (0, 0)), rel=1e-12)


def test_slice_sup_monotone_in_alpha():
    areas = [slice_area_sup(Ellipsoid(polterovich_matrix(a))).area for a in (0.25, 0.5)]
    assert areas[0] < areas[1]


def test_slice_area_vanishes_as_alpha_shrinks():
    areas = [slice_area(Ellipsoid(polterovich_matrix(10.0**-k)), (0, 0)) for k in (1, 2, 3)]
    assert areas[0] > areas[1] > areas[2]
    assert areas[2] < pi * 1.001e-3


def test_slice_scan_rows():
    rows = slice_area_scan(Ellipsoid(polterovich_matrix(0.5)), grid=5)
    assert len(rows) == 25
    assert max(r[2] for r in rows) == pytest.approx(slice_reference(0.5))


def test_inflation_limits():
    D = Ellipsoid(polterovich_matrix(0.5))
    assert 1.0 < grid_approximation_inflation(1e-8, 2, D) < 1 + 1e-6
    assert grid_approximation_inflation(0.0, 2, D) == 1.0
    assert grid_approximation_inflation(1.0, 2, D) - 1 == pytest.approx(5.8335, abs=1e-3)


@given(st.floats(min_value=1e-6, max_value=10.0))
def test_inflation_affine(eps):
    D = Ellipsoid(polterovich_matrix(0.5))
    one = grid_approximation_inflation(eps, 2, D) - 1
    two = grid_approximation_inflation(2 * eps, 2, D) - 1
    assert two == pytest.approx(2 * one, rel=1e-12)


def test_inflation_domain():
    with pytest.raises(DomainError):
        grid_approximation_inflation(-1.0, 2, EXAMPLE)
    with pytest.raises(DomainError):
        grid_approximation_inflation(0.1, 0.5, EXAMPLE)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([0.1, 0.03, 0.01]), st.sampled_from([1.0, 2.0, 4.0]),
       st.integers(0, 2**16))
def test_grid_approximation_contained(eps, L, seed):
    # moving z_2 anywhere within its eps-square stays inside inflation * A^L D
    rng = np.random.default_rng(seed)
    D = Ellipsoid(polterovich_matrix(0.5))
    target = Ellipsoid(grid_approximation_inflation(eps, L, D) * scaling_map(L, 2) @ D.generator)
    x = sample_ellipsoid(D, 5000, rng)
    m = np.floor(x[:, 2:] / eps + 0.5)
    x[:, 2:] = eps * (m + rng.uniform(-0.5, 0.5, (5000, 2)))
    assert np.all(membership(target, x @ scaling_map(L, 2).T, slack=1e-12))
