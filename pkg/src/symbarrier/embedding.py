"""Barrier grids, the embedding Id x ... x Id x psi, and the displacement flow.

A grid is the family of affine planes ``{x : pi_n(T x) = p}``, ``p`` in the
lattice ``eps Z^2``, where ``pi_n`` projects to the last complex coordinate
and ``T`` is symplectic.  With ``T = I`` these are the planes
``C^{n-1} x {p}``.
"""

from dataclasses import dataclass
from math import ceil, sqrt

import numpy as np
from scipy.integrate import solve_ivp

from .ellipsoid import Ellipsoid, grid_approximation_inflation, gauge
from .errors import DomainError, ValidationError
from .gridflow import LemmaMap, cell_decompose, fd_steps, lemma_map
from .linalg import complex_structure, half_dimension, is_symplectic, omega, scaling_map
from .linalg import standard_form_matrix
from .numerics import fd_jacobian, symplectic_defect


@dataclass(frozen=True, eq=False)
class GridHyperplanes:
    epsilon: float
    transform: np.ndarray = None
    n: int = 2

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("grid pitch must be positive")
        T = np.eye(2 * self.n) if self.transform is None else np.array(self.transform, float)
        if half_dimension(T) != self.n:
            raise ValidationError("transform does not match the half-dimension")
        if not is_symplectic(T, tol=1e-9):
            raise ValidationError("grid transform must be symplectic")
        T.setflags(write=False)
        object.__setattr__(self, "transform", T)

    @property
    def projection(self):
        """The 2 x 2n matrix ``pi_n T``."""
        return self.transform[-2:, :]

    def plane_basis(self):
        """Columns spanning the common direction space of all planes."""
        _, _, Vt = np.linalg.svd(self.projection)
        return Vt[2:].T

    def plane_point(self, p):
        """Point of the plane with offset p nearest to the origin."""
        A = self.projection
        return A.T @ np.linalg.solve(A @ A.T, np.asarray(p, dtype=float))


def nearest_plane(grid, x):
    """Offsets of the nearest planes and the distances to them."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    A = grid.projection
    M = np.linalg.inv(A @ A.T)
    eps = grid.epsilon
    w = x @ A.T
    ev = np.linalg.eigvalsh(M)
    k = int(ceil(sqrt(ev[-1] / ev[0] / 2.0))) + 1
    base = np.round(w / eps)
    span = np.arange(-k, k + 1)
    cand = np.stack(np.meshgrid(span, span, indexing="ij"), -1).reshape(-1, 2)
    # (N, C, 2) residuals w - p for every candidate offset
    diff = w[:, None, :] - eps * (base[:, None, :] + cand[None])
    d2 = np.einsum("nci,ij,ncj->nc", diff, M, diff)
    best = np.argmin(d2, axis=1)
    offsets = eps * (base + cand[best])
    dist = np.sqrt(np.maximum(d2[np.arange(len(best)), best], 0.0))
    return offsets, dist


def nearest_plane_distance(grid, x):
    """Euclidean distance from x (one point or rows) to the union of planes."""
    _, dist = nearest_plane(grid, x)
    return float(dist[0]) if np.ndim(x) == 1 else dist


def distance_to_plane(grid, x, p):
    """Distance from a point to one plane by explicit orthogonal projection."""
    x = np.asarray(x, dtype=float)
    base = grid.plane_point(p)
    N = grid.plane_basis()
    coeffs, *_ = np.linalg.lstsq(N, x - base, rcond=None)
    return float(np.linalg.norm(x - base - N @ coeffs))


def _projected_ellipse(grid, E):
    K = grid.projection @ E.generator
    return np.linalg.inv(K @ K.T), np.sqrt(np.diag(K @ K.T))


def _lattice_rows(grid, E):
    Q, half = _projected_ellipse(grid, E)
    eps = grid.epsilon
    a, b, c = Q[0, 0], Q[0, 1], Q[1, 1]
    jmax = int(np.floor(half[1] / eps * (1 + 1e-12)))
    j = np.arange(-jmax, jmax + 1)
    y = j * eps
    # a x^2 + 2 b x y + c y^2 <= 1
    disc = b * b * y * y - a * (c * y * y - 1.0)
    ok = disc >= -1e-12
    root = np.sqrt(np.maximum(disc[ok], 0.0))
    lo = np.ceil((-b * y[ok] - root) / (a * eps) - 1e-9).astype(np.int64)
    hi = np.floor((-b * y[ok] + root) / (a * eps) + 1e-9).astype(np.int64)
    return j[ok], lo, hi


def relevant_planes(grid, E):
    """Offsets p whose plane meets the (closed) ellipsoid E, as an (N, 2) array."""
    rows, lo, hi = _lattice_rows(grid, E)
    parts = [
        np.column_stack([np.arange(l, h + 1), np.full(max(h - l + 1, 0), r)])
        for r, l, h in zip(rows, lo, hi)
        if h >= l
    ]
    if not parts:
        return np.empty((0, 2))
    return grid.epsilon * np.concatenate(parts).astype(float)


def relevant_plane_count(grid, E):
    """Number of planes meeting E, without listing them."""
    _, lo, hi = _lattice_rows(grid, E)
    return int(np.sum(np.maximum(hi - lo + 1, 0)))


def plane_is_symplectic(basis, tol=1e-9):
    """Whether omega restricted to span(basis) is nondegenerate.

    ``basis`` holds the spanning vectors as columns.
    """
    B = np.asarray(basis, dtype=float)
    if np.linalg.matrix_rank(B, tol=1e-10 * max(1.0, np.abs(B).max())) < B.shape[1]:
        raise ValidationError("plane basis is linearly dependent")
    n = B.shape[0] // 2
    gram = B.T @ standard_form_matrix(n) @ B
    return bool(np.linalg.svd(gram, compute_uv=False)[-1] > tol)


@dataclass(frozen=True, eq=False)
class EmbeddingMap:
    """``Id x ... x Id x psi`` on ``D`` minus the standard eps-grid."""

    domain: Ellipsoid
    lemma_map: LemmaMap

    @property
    def n(self):
        return self.domain.n

    @property
    def grid(self):
        return GridHyperplanes(self.lemma_map.epsilon, n=self.n)

    def target(self):
        """``inflation * A^L D``, the set the image must lie in."""
        L = self.lemma_map.L
        infl = grid_approximation_inflation(self.lemma_map.epsilon, L, self.domain)
        return Ellipsoid(infl * scaling_map(L, self.n) @ self.domain.generator)

    def __call__(self, x):
        return embed(self, x)


def embed(emb, x):
    """Apply the embedding to points off the standard grid."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if np.any(nearest_plane_distance(emb.grid, pts) == 0.0):
        raise DomainError("embedding is undefined on the grid planes")
    out = pts.copy()
    out[:, -2:] = lemma_map(emb.lemma_map, pts[:, -2:])
    return out[0] if single else out


def embed_jacobian(emb, x, h=1e-5, relative=1e-4):
    """Finite-difference Jacobian of the embedding, steps scaled to the cell."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _, u = cell_decompose(x[:, -2:], emb.lemma_map.epsilon)
    steps = emb.lemma_map.epsilon * fd_steps(np.hypot(u[:, 0], u[:, 1]), h, relative)
    return fd_jacobian(emb, x, steps)


def sample_ellipsoid(E, size, rng):
    """Uniform samples of E (image of uniform samples of the unit ball)."""
    d = E.dim
    g = rng.standard_normal((size, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= rng.random((size, 1)) ** (1.0 / d)
    return g @ E.generator.T


def sample_off_grid(E, grid, size, rng, min_distance=1e-6, batch=None):
    """Rejection samples of E minus the grid planes."""
    out = []
    have = 0
    batch = batch or max(1024, size)
    while have < size:
        pts = sample_ellipsoid(E, batch, rng)
        pts = pts[nearest_plane_distance(grid, pts) > min_distance]
        out.append(pts)
        have += len(pts)
    return np.concatenate(out)[:size]


def verify_embedding(emb, samples=10**5, jacobian_points=10**3, seed=0, slack=1e-6,
                     symplectic_tol=1e-3, chunk=20_000):
    """Sampling check that the image lies in the target and the map is symplectic.

    Returns a JSON-ready report.
    """
    rng = np.random.default_rng(seed)
    target = emb.target()
    pts = sample_off_grid(emb.domain, emb.grid, samples, rng)
    failures = 0
    max_gauge = 0.0
    lattice_hits = 0
    images = np.empty_like(pts)
    for start in range(0, samples, chunk):
        block = pts[start : start + chunk]
        img = embed(emb, block)
        images[start : start + chunk] = img
        g = gauge(target, img)
        failures += int(np.count_nonzero(g > 1.0 + slack))
        max_gauge = max(max_gauge, float(g.max()))
        _, u = cell_decompose(img[:, -2:], emb.lemma_map.L * emb.lemma_map.epsilon)
        lattice_hits += int(np.count_nonzero(np.all(u == 0.0, axis=1)))
    jac_pts = pts[:jacobian_points]
    D = embed_jacobian(emb, jac_pts)
    defect = symplectic_defect(D, standard_form_matrix(emb.n))
    sym_fail = int(np.count_nonzero(defect >= symplectic_tol))
    collisions = _injectivity_failures(pts[:2000], images[:2000])
    lm = emb.lemma_map
    return {
        "check": "embedding",
        "samples": int(samples),
        "failures": failures + sym_fail + lattice_hits + collisions,
        "max_residual": max_gauge - 1.0,
        "seed": int(seed),
        "parameters": {
            "epsilon": lm.epsilon,
            "L": lm.L,
            "inflation": float(grid_approximation_inflation(lm.epsilon, lm.L, emb.domain)),
            "slack": slack,
            "domain_generator": emb.domain.generator.tolist(),
        },
        "containment_failures": failures,
        "max_gauge": max_gauge,
        "jacobian_points": int(len(jac_pts)),
        "symplectic_failures": sym_fail,
        "max_symplectic_defect": float(defect.max()),
        "lattice_hits": lattice_hits,
        "injectivity_failures": collisions,
    }


def _injectivity_failures(x, y, separation=1e-3):
    # pairs that are separated in the domain must stay distinct in the image
    dx = np.linalg.norm(x[:, None] - x[None], axis=-1)
    dy = np.linalg.norm(y[:, None] - y[None], axis=-1)
    bad = (dx > separation) & (dy == 0.0)
    return int(np.count_nonzero(np.triu(bad, 1)))


# -- displacement of complex hyperplanes ---------------------------------------


def radial_cutoff(s, r):
    """1 for s <= r, 0 for s >= 1, quintic smoothstep in between."""
    tau = np.clip((np.asarray(s, dtype=float) - r) / (1.0 - r), 0.0, 1.0)
    return 1.0 - tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


def _radial_log_flow(u0, t, r):
    # d(log rho)/dt = chi(rho); exact while rho < r, ODE beyond
    u0 = np.asarray(u0, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), u0.shape)
    lr = np.log(r)
    free = np.clip(lr - u0, 0.0, None)
    step = np.minimum(free, t)
    u = u0 + step
    rest = t - step
    todo = rest > 0
    if np.any(todo):
        T = rest[todo]
        sol = solve_ivp(
            lambda _, v: T * radial_cutoff(np.exp(v), r),
            (0.0, 1.0),
            u[todo],
            method="DOP853",
            rtol=1e-12,
            atol=1e-14,
        )
        u[todo] = sol.y[:, -1]
    return u


def displacement_flow(t, r, x, center=None):
    """Time-t flow of ``chi(|z|) z`` on the unit ball (radius-1 ball about center)."""
    if not 0 < r < 1:
        raise DomainError("cutoff radius must lie in (0, 1)")
    if t < 0:
        raise DomainError("flow time must be nonnegative")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    c = np.zeros(pts.shape[1]) if center is None else np.asarray(center, dtype=float)
    z = pts - c
    rho = np.linalg.norm(z, axis=1)
    if np.any(rho >= 1.0):
        raise DomainError("displacement flow is defined inside the unit ball")
    out = z.copy()
    moving = rho > 0
    if t > 0 and np.any(moving):
        u = _radial_log_flow(np.log(rho[moving]), t, r)
        out[moving] = z[moving] * (np.exp(u) / rho[moving])[:, None]
    out += c
    return out[0] if single else out


def stretch_factors(t, r, x):
    """Radial and transverse stretch (alpha, beta) of the flow at x.

    The flow is radial, so tangent vectors orthogonal to x scale by
    ``beta = rho_t / rho_0``; the radial direction scales by
    ``alpha = beta * chi(rho_t) / chi(rho_0)``, the derivative of a 1D
    autonomous flow in log coordinates.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rho0 = np.linalg.norm(x, axis=1)
    rho_t = np.linalg.norm(displacement_flow(t, r, x), axis=1)
    beta = rho_t / rho0
    alpha = beta * radial_cutoff(rho_t, r) / radial_cutoff(rho0, r)
    return alpha, beta


def pushforward(t, r, x, v, h=1e-6):
    """Directional derivative of the flow at rows x along rows v."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    both = np.concatenate([x + h * v, x - h * v])
    img = displacement_flow(t, r, both)
    k = len(x)
    return (img[:k] - img[k:]) / (2 * h)


def holomorphic_positivity_check(t, r, points, tangents, h=1e-6):
    """Minimum of ``omega(G_* u, G_* J u)`` over the sample."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tangents = np.atleast_2d(np.asarray(tangents, dtype=float))
    J = complex_structure(points.shape[1] // 2)
    Gu = pushforward(t, r, points, tangents, h)
    GJu = pushforward(t, r, points, tangents @ J.T, h)
    return float(np.min(omega(Gu, GJu)))


def complex_line_sample(offset, radius_samples=60, angle_samples=90):
    """Polar sample of ``{z_2 = offset}`` inside the unit ball of C^2."""
    offset = np.asarray(offset, dtype=float)
    reach = sqrt(max(1.0 - offset @ offset, 0.0))
    rad = np.linspace(0.0, reach, radius_samples, endpoint=False)
    ang = np.linspace(0.0, 2 * np.pi, angle_samples, endpoint=False)
    R, A = np.meshgrid(rad, ang, indexing="ij")
    z1 = np.column_stack([(R * np.cos(A)).ravel(), (R * np.sin(A)).ravel()])
    return np.column_stack([z1, np.broadcast_to(offset, (len(z1), 2))])


def displacement_time(r, offset=(0.1, 0.0), t_max=6.0, dt=0.01):
    """First time on a grid at which the flowed complex line misses B(r).

    Returns ``(t, min |G(x)|)`` or ``(None, best)`` if no grid time works.
    """
    sample = complex_line_sample(offset)
    best = 0.0
    for t in np.arange(0.0, t_max + dt / 2, dt):
        m = float(np.min(np.linalg.norm(displacement_flow(t, r, sample), axis=1)))
        best = max(best, m)
        if m > r:
            return float(t), m
    return None, best


def verify_displacement(t_values=(0.5, 1.0, 2.0), r=0.9, samples=10**3, seed=0,
                        offset=(0.1, 0.0), t_max=6.0, n=2):
    """Checks for the complex-hyperplane displacement, as a JSON-ready report."""
    rng = np.random.default_rng(seed)
    t_hit, reach = displacement_time(r, offset, t_max)
    minima = {}
    for t in t_values:
        g = rng.standard_normal((samples, 2 * n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        x = g * rng.uniform(1e-3, 0.99, (samples, 1))
        u = rng.standard_normal((samples, 2 * n))
        minima[str(t)] = holomorphic_positivity_check(t, r, x, u)
    failures = int(t_hit is None) + sum(v <= 0 for v in minima.values())
    return {
        "check": "displacement",
        "samples": int(samples),
        "failures": int(failures),
        "max_residual": float(r - reach) if t_hit is None else 0.0,
        "seed": int(seed),
        "parameters": {"r": r, "offset": list(offset), "t_max": t_max, "t_values": list(t_values)},
        "displacement_time": t_hit,
        "min_image_radius": reach,
        "positivity_minimum": minima,
    }
