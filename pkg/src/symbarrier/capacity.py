"""Ellipsoid capacities, the grid-barrier upper bound, and certificate search."""

import json
from dataclasses import asdict, dataclass
from math import pi, sqrt

import numpy as np

from . import __version__
from .ellipsoid import Ellipsoid, grid_approximation_inflation, width_min
from .embedding import GridHyperplanes, relevant_plane_count, relevant_planes
from .errors import DomainError, SearchError
from .linalg import polterovich_matrix, scaling_map, symplectic_spectrum


def ellipsoid_capacity(E):
    """pi times the smallest symplectic eigenvalue of ``G G^T``.

    On ellipsoids every normalised capacity takes this value; in particular
    the Gromov width and the cylindrical capacity agree.
    """
    width_min(E)  # rejects singular generators
    return pi * float(symplectic_spectrum(E.gram())[0])


def stretched_domain(alpha, L):
    """``A^L M_alpha B^4(1)``."""
    return Ellipsoid(scaling_map(L, 2) @ polterovich_matrix(alpha))


def barrier_bound(alpha, L, epsilon):
    """Upper bound on the capacity of ``B^4(1)`` minus ``M_alpha^{-1}`` of the eps-grid.

    ``epsilon = 0`` gives the limiting value, the capacity of the stretched
    domain.
    """
    D = Ellipsoid(polterovich_matrix(alpha))
    inflation = grid_approximation_inflation(epsilon, L, D)
    return inflation**2 * ellipsoid_capacity(stretched_domain(alpha, L))


def inflation_coefficient(alpha, L):
    """``sqrt(2) L / width_min(A^L M_alpha B)``: the slope of the inflation in eps."""
    return sqrt(2.0) * L / width_min(stretched_domain(alpha, L))


@dataclass(frozen=True)
class BarrierCertificate:
    alpha: float
    L: float
    epsilon: float
    bound_value: float
    target_delta: float
    plane_count: int
    trivial: bool = False

    @property
    def valid(self):
        return self.bound_value < pi * self.target_delta**2

    def recompute(self):
        if self.trivial:
            return pi
        return barrier_bound(self.alpha, self.L, self.epsilon)

    def grid(self):
        return GridHyperplanes(self.epsilon, polterovich_matrix(self.alpha))

    def planes(self):
        if self.trivial:
            return np.empty((0, 2))
        return relevant_planes(self.grid(), Ellipsoid.ball(2))

    def to_dict(self, config_hash=None, emit_planes=False):
        out = asdict(self)
        out["valid"] = self.valid
        out["target_value"] = pi * self.target_delta**2
        out["family"] = "A^L M_alpha"
        out["version"] = __version__
        out["config_hash"] = config_hash
        if emit_planes:
            out["plane_offsets"] = self.planes().tolist()
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(**kwargs), indent=2, sort_keys=True)


def _smallest_L(alpha, threshold, L_max, rel_tol=1e-6):
    # capacity is nonincreasing in L, so bisect for the first L below threshold
    cap = lambda L: ellipsoid_capacity(stretched_domain(alpha, L))
    if cap(L_max) >= threshold:
        return None
    if cap(1.0) < threshold:
        return 1.0
    lo, hi = 1.0, float(L_max)
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if cap(mid) < threshold:
            hi = mid
        else:
            lo = mid
    return hi


def _epsilon_for(alpha, L, target, exponents):
    for k in exponents:
        eps = 10.0**-k
        if barrier_bound(alpha, L, eps) < target:
            return eps
    return None


def find_barrier(delta, margin=0.05, L_max=64.0, alpha_steps=64, exponents=range(1, 9)):
    """Search the ``A^L M_alpha`` family for a grid barrier below ``pi delta^2``.

    alpha runs down the grid ``2^{-j/4}``; for each alpha the smallest L in
    ``[1, L_max]`` bringing the stretched capacity below
    ``(1 - margin) pi delta^2`` is found by bisection, and eps is the largest
    power of ten whose bound still beats ``pi delta^2``.  The first success
    is returned.
    """
    if not delta > 0:
        raise DomainError("delta must be positive")
    target = pi * delta**2
    if delta > 1:
        # the empty barrier: c(B) = pi < pi delta^2
        return BarrierCertificate(1.0, 1.0, 1.0, pi, float(delta), 0, trivial=True)
    threshold = (1.0 - margin) * target
    best = None
    for j in range(alpha_steps + 1):
        alpha = 2.0 ** (-j / 4)
        L = _smallest_L(alpha, threshold, L_max)
        if L is None:
            cap = ellipsoid_capacity(stretched_domain(alpha, L_max))
            if best is None or cap < best["bound"]:
                best = {"alpha": alpha, "L": L_max, "epsilon": 0.0, "bound": cap}
            continue
        eps = _epsilon_for(alpha, L, target, exponents)
        if eps is None:
            continue
        bound = barrier_bound(alpha, L, eps)
        count = relevant_plane_count(
            GridHyperplanes(eps, polterovich_matrix(alpha)), Ellipsoid.ball(2)
        )
        cert = BarrierCertificate(alpha, L, eps, bound, float(delta), count)
        if not cert.valid:
            continue
        return cert
    raise SearchError(
        f"no certificate for delta={delta} within alpha >= 2^-{alpha_steps / 4:g}, "
        f"L <= {L_max:g}",
        best=best,
    )
