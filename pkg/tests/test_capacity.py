import json
from math import pi

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symbarrier.capacity import (
    BarrierCertificate,
    barrier_bound,
    ellipsoid_capacity,
    find_barrier,
    inflation_coefficient,
    stretched_domain,
)
from symbarrier.ellipsoid import Ellipsoid
from symbarrier.embedding import EmbeddingMap, verify_embedding
from symbarrier.errors import DomainError, SearchError, ValidationError
from symbarrier.gridflow import LemmaMap
from symbarrier.linalg import polterovich_matrix, random_symplectic


def test_capacity_ball():
    assert ellipsoid_capacity(Ellipsoid.ball(2)) == pytest.approx(pi)
    assert ellipsoid_capacity(Ellipsoid.ball(3, 0.5)) == pytest.approx(pi / 4)


def test_capacity_anchor():
    assert ellipsoid_capacity(stretched_domain(0.5, 2)) == pytest.approx(
        pi * 0.7423**2, abs=pi * 1e-3
    )


def test_capacity_frozen():
    # min symplectic eigenvalue of (A^2 M_0.5)(A^2 M_0.5)^T
    assert ellipsoid_capacity(stretched_domain(0.5, 2)) / pi == pytest.approx(
        0.5510228717036485, rel=1e-10
    )


def test_capacity_rejects_singular():
    with pytest.raises(ValidationError):
        ellipsoid_capacity(Ellipsoid(np.diag([1.0, 1.0, 0.0, 1.0])))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_capacity_symplectic_invariance(seed):
    T = random_symplectic(2, np.random.default_rng(seed))
    E = stretched_domain(0.5, 2)
    assert ellipsoid_capacity(E.transformed(T)) == pytest.approx(
        ellipsoid_capacity(E), rel=1e-8
    )


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.5, 1.0])
def test_capacity_nonincreasing_in_L(alpha):
    caps = [ellipsoid_capacity(stretched_domain(alpha, L)) for L in (1, 2, 4, 8, 16)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(caps, caps[1:]))


def test_inflation_coefficient_anchor():
    assert inflation_coefficient(0.5, 2) == pytest.approx(5.8335, abs=1e-3)


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 0.1])
def test_bound_formula(eps):
    expected = pi * (1 + 5.8335 * eps) ** 2 * 0.7423**2
    assert barrier_bound(0.5, 2, eps) == pytest.approx(expected, rel=1e-3)


def test_bound_eps_zero_equals_capacity():
    assert barrier_bound(0.5, 2, 0.0) == ellipsoid_capacity(stretched_domain(0.5, 2))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(1.0, 32.0), st.floats(1e-8, 1.0))
def test_bound_dominates_capacity_and_increases(alpha, L, eps):
    b = barrier_bound(alpha, L, eps)
    assert b >= ellipsoid_capacity(stretched_domain(alpha, L))
    assert barrier_bound(alpha, L, 1.5 * eps) > b


def test_example_parameters_valid_for_three_quarters():
    cert = BarrierCertificate(0.5, 2.0, 1e-3, barrier_bound(0.5, 2, 1e-3), 0.75, 0)
    assert cert.valid
    assert 0.7423 * (1 + 5.8335e-3) < 0.75


def test_search_three_quarters():
    cert = find_barrier(0.75)
    assert cert.valid and not cert.trivial
    assert 0 < cert.alpha <= 1 and 1 <= cert.L <= 64
    assert cert.bound_value < pi * 0.5625
    assert abs(cert.recompute() - cert.bound_value) < 1e-9
    assert cert.plane_count > 0


@pytest.mark.parametrize("delta", [0.5, 0.3, 0.1])
def test_search_smaller_delta(delta):
    cert = find_barrier(delta)
    assert cert.valid
    assert abs(cert.recompute() - cert.bound_value) < 1e-9


def test_search_deterministic():
    assert find_barrier(0.5) == find_barrier(0.5)


def test_search_trivial_above_one():
    cert = find_barrier(1.5)
    assert cert.trivial and cert.valid and cert.plane_count == 0
    assert len(cert.planes()) == 0


def test_search_domain():
    with pytest.raises(DomainError):
        find_barrier(0.0)


def test_search_budget_exhausted_reports_best():
    with pytest.raises(SearchError) as info:
        find_barrier(0.1, L_max=2.0, alpha_steps=4)
    best = info.value.best
    assert best is not None and best["bound"] >= pi * 0.01 * 0.95


def test_certificate_json():
    cert = find_barrier(0.75)
    doc = json.loads(cert.to_json(config_hash="abc"))
    assert doc["valid"] and doc["config_hash"] == "abc"
    assert doc["family"] == "A^L M_alpha"
    assert "plane_offsets" not in doc


def test_certificate_planes_match_count():
    cert = BarrierCertificate(0.5, 2.0, 0.05, barrier_bound(0.5, 2, 0.05), 0.9, 0)
    planes = cert.planes()
    from symbarrier.embedding import relevant_plane_count

    assert len(planes) == relevant_plane_count(cert.grid(), Ellipsoid.ball(2))


def test_certificate_consistent_with_embedding(coarse_cell_field):
    # the bound certifies the image of D minus the grid under the embedding
    cert = find_barrier(0.75)
    D = Ellipsoid(polterovich_matrix(cert.alpha))
    emb = EmbeddingMap(D, LemmaMap(cert.epsilon, cert.L, coarse_cell_field))
    report = verify_embedding(emb, samples=20_000, jacobian_points=200, seed=0)
    assert report["failures"] == 0
    cap = ellipsoid_capacity(stretched_domain(cert.alpha, cert.L))
    assert report["max_gauge"] ** 2 * cap <= cert.bound_value * (1 + 1e-12)
