"""Linear images of the unit ball: support function, minimal width, slices."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import gamma, pi, sqrt
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .errors import DomainError, ValidationError
from .linalg import half_dimension, matrix_from_json, matrix_to_json, scaling_map

_SINGULAR_RCOND = 1e-12


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """``generator @ B^{2n}(1)``, centred at the origin."""

    generator: np.ndarray

    def __post_init__(self):
        G = np.array(self.generator, dtype=float)
        half_dimension(G)
        if not np.all(np.isfinite(G)):
            raise ValidationError("generator entries must be finite")
        G.setflags(write=False)
        object.__setattr__(self, "generator", G)

    @classmethod
    def ball(cls, n, radius=1.0):
        return cls(radius * np.eye(2 * n))

    @property
    def n(self):
        return self.generator.shape[0] // 2

    @property
    def dim(self):
        return self.generator.shape[0]

    def gram(self):
        """``G G^T``; the ellipsoid is ``{x : x^T (G G^T)^{-1} x <= 1}``."""
        return self.generator @ self.generator.T

    def transformed(self, T):
        return Ellipsoid(np.asarray(T, dtype=float) @ self.generator)

    def scaled(self, factor):
        return Ellipsoid(factor * self.generator)

    def volume(self):
        d = self.dim
        return abs(np.linalg.det(self.generator)) * pi ** (d / 2) / gamma(d / 2 + 1)

    def to_json(self):
        return matrix_to_json(self.generator)

    @classmethod
    def from_json(cls, obj):
        return cls(matrix_from_json(obj))


def _require_invertible(E):
    s = np.linalg.svd(E.generator, compute_uv=False)
    if s[-1] <= _SINGULAR_RCOND * max(s[0], 1.0):
        raise ValidationError("ellipsoid generator is singular")
    return s


def support(E, u, tol=1e-9):
    """Support function ``sup <x, u>`` over E, for a unit vector u."""
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > tol:
        raise ValidationError("support direction must be a unit vector")
    return float(np.linalg.norm(E.generator.T @ u))


def support_many(E, U):
    """Vectorised support function for rows of U (assumed unit)."""
    return np.linalg.norm(np.asarray(U, dtype=float) @ E.generator, axis=-1)


def width_min(E):
    """Minimum of the support function over the unit sphere.

    For an ellipsoid this is the smallest singular value of the generator.
    """
    return float(_require_invertible(E)[-1])


def width_min_direction(E):
    """Unit direction attaining ``width_min``."""
    _require_invertible(E)
    U, _, _ = np.linalg.svd(E.generator)
    return U[:, -1]


def membership(E, x, slack=0.0):
    """True where ``|G^{-1} x| <= 1 + slack``; x may be a single point or rows."""
    x = np.asarray(x, dtype=float)
    y = np.linalg.solve(E.generator, x.T).T
    inside = np.linalg.norm(y, axis=-1) <= 1.0 + slack
    return bool(inside) if inside.ndim == 0 else inside


def gauge(E, x):
    """``|G^{-1} x|``: the smallest s with x in s*E."""
    x = np.asarray(x, dtype=float)
    return np.linalg.norm(np.linalg.solve(E.generator, x.T).T, axis=-1)


def _unit_ball_volume(k):
    return pi ** (k / 2) / gamma(k / 2 + 1)


def slice_area(E, b):
    """Area of the slice ``E ∩ {z_n = b}`` (volume of the slice when n > 2).

    The quadratic form ``x -> |G^{-1} x|^2`` is restricted to the affine
    plane and the square completed; the slice is an ellipse
    ``{(w - w0)^T A (w - w0) <= 1 - q_min}`` with area
    ``pi (1 - q_min) / sqrt(det A)``.
    """
    _require_invertible(E)
    b = np.asarray(b, dtype=float).reshape(2)
    Ginv = np.linalg.inv(E.generator)
    Q = Ginv.T @ Ginv
    k = E.dim - 2
    A = Q[:k, :k]
    B = Q[:k, k:]
    C = Q[k:, k:]
    schur = C - B.T @ np.linalg.solve(A, B)
    q_min = float(b @ schur @ b)
    if q_min >= 1.0:
        return 0.0
    return _unit_ball_volume(k) * (1.0 - q_min) ** (k / 2) / sqrt(np.linalg.det(A))


def offset_bounds(E):
    """Half-widths of the projection of E onto the z_n plane."""
    P = E.gram()
    return np.sqrt(np.diag(P)[-2:])


def slice_area_monte_carlo(E, b, samples=10**7, seed=0, chunk=10**6, workers=1):
    """Rejection-sampling estimate of ``slice_area`` for n = 2.

    Points are drawn uniformly in the bounding box of the projection of E to
    the first complex coordinate.  Chunks use spawned seeds so the estimate
    does not depend on ``workers``.
    """
    if E.n != 2:
        raise DomainError("Monte Carlo slice oracle is implemented for n = 2")
    b = np.asarray(b, dtype=float).reshape(2)
    half = np.sqrt(np.diag(E.gram())[:2])
    box_area = 4.0 * half[0] * half[1]
    Ginv = np.linalg.inv(E.generator)
    sizes = [chunk] * (samples // chunk)
    if samples % chunk:
        sizes.append(samples % chunk)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def count(args):
        size, ss = args
        rng = np.random.default_rng(ss)
        w = rng.uniform(-half, half, size=(size, 2))
        x = np.column_stack([w, np.broadcast_to(b, (size, 2))])
        y = x @ Ginv.T
        return int(np.count_nonzero(np.einsum("ij,ij->i", y, y) <= 1.0))

    jobs = list(zip(sizes, seeds))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            hits = sum(pool.map(count, jobs))
    else:
        hits = sum(map(count, jobs))
    return box_area * hits / samples


class SliceMaximum(NamedTuple):
    area: float
    offset: np.ndarray


def slice_area_sup(E, grid=41, sweeps=4):
    """Supremum of ``slice_area`` over offsets b in the z_n plane.

    A coarse grid over the bounding box of the projection locates the best
    offset, which is then refined by coordinatewise golden-section search.
    """
    if E.n != 2:
        raise DomainError("slice_area_sup is defined for n = 2")
    hx, hy = offset_bounds(E)
    xs = np.linspace(-hx, hx, grid)
    ys = np.linspace(-hy, hy, grid)
    values = np.array([[slice_area(E, (x, y)) for y in ys] for x in xs])
    i, j = np.unravel_index(np.argmax(values), values.shape)
    best = np.array([xs[i], ys[j]])
    steps = np.array([xs[1] - xs[0], ys[1] - ys[0]])
    for _ in range(sweeps):
        for axis in range(2):
            lo, hi = best[axis] - steps[axis], best[axis] + steps[axis]

            def neg(v, axis=axis):
                trial = best.copy()
                trial[axis] = v
                return -slice_area(E, trial)

            res = optimize.minimize_scalar(
                neg, bracket=(lo, best[axis], hi), method="golden", tol=1e-10
            )
            if lo <= res.x <= hi and -res.fun >= slice_area(E, best):
                best[axis] = res.x
        steps = steps / 4
    return SliceMaximum(slice_area(E, best), best)


def slice_area_scan(E, grid=41):
    """Rows ``(b_x, b_y, area)`` over the projection bounding box."""
    hx, hy = offset_bounds(E)
    rows = []
    for x in np.linspace(-hx, hx, grid):
        for y in np.linspace(-hy, hy, grid):
            rows.append((float(x), float(y), slice_area(E, (x, y))))
    return rows


def grid_approximation_inflation(eps, L, E):
    """Factor ``1 + sqrt(2) eps L / width_min(A^L E)``.

    The cell-wise outer approximation of ``A^L E`` by grid squares of side
    ``L eps`` lies within this multiple of ``A^L E``.
    """
    if not eps >= 0:
        raise DomainError(f"grid pitch must be nonnegative, got {eps!r}")
    AL = Ellipsoid(scaling_map(L, E.n) @ E.generator)
    return 1.0 + sqrt(2.0) * eps * L / width_min(AL)
