"""Area-contracting flow on a punctured grid cell and the grid map it induces.

The unit cell is ``Q = [-1/2, 1/2]^2`` punctured at the origin.  The field is

    X = Y + rot grad H,        rot grad H = (-dH/dy, dH/dx),

where ``Y = g(r) d/dr`` with ``g(r) = -r/2 + 1/(2 pi r)`` has divergence -1
and a unit point source at the puncture.  The rotated gradient is
divergence free for any C^2 function H, so div X = -1 wherever H is smooth.
H is fixed on the boundary by requiring X to be tangent to the edges (along
the counterclockwise boundary the tangential derivative of H equals Y.n),
extended inside by transfinite interpolation, and cut off to a constant near
the puncture so that X = Y exactly there.

Time-t flows of X scale area by exp(-t).  With ``t = 2 ln L`` the map
``psi = L phi_t`` applied cellwise to the eps-grid is area preserving and
carries each grid square G onto L G.
"""

import csv
from dataclasses import dataclass, field
from math import ceil, log, pi

import numpy as np
from numpy.polynomial import chebyshev
from scipy.integrate import cumulative_simpson

from . import _kernels
from .errors import ConstructionError, DomainError, IntegrationError
from .numerics import fd_jacobian

HALF = 0.5
VERTICES = np.array([[-HALF, -HALF], [HALF, -HALF], [HALF, HALF], [-HALF, HALF]])

# counterclockwise edge order; each edge is parametrised by s in [-1/2, 1/2]
EDGE_NAMES = ("bottom", "right", "top", "left")
_EDGE_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])


def edge_points(k, s):
    """Points of edge k at counterclockwise parameters s."""
    s = np.asarray(s, dtype=float)
    h = np.full_like(s, HALF)
    return np.stack(
        [
            np.stack([s, -h], -1),
            np.stack([h, s], -1),
            np.stack([-s, h], -1),
            np.stack([-h, -s], -1),
        ][k]
    )


def radial_profile(r):
    """g(r) = -r/2 + 1/(2 pi r), the radial speed of Y."""
    return -0.5 * r + 1.0 / (2.0 * pi * r)


def radial_field(p):
    """Y at points p (last axis of length 2)."""
    p = np.asarray(p, dtype=float)
    r2 = np.sum(p * p, axis=-1, keepdims=True)
    return (-0.5 + 1.0 / (2.0 * pi * r2)) * p


def radial_flow_exact(p, t):
    """Exact flow of Y: ``r(t)^2 = 1/pi + (r0^2 - 1/pi) exp(-t)``, angle fixed."""
    p = np.asarray(p, dtype=float)
    r02 = np.sum(p * p, axis=-1, keepdims=True)
    t = np.asarray(t, dtype=float)[..., None] if np.ndim(t) else t
    r2 = 1.0 / pi + (r02 - 1.0 / pi) * np.exp(-t)
    return p * np.sqrt(r2 / r02)


def _smoothstep(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


def _smoothstep_prime(tau):
    inside = (tau > 0.0) & (tau < 1.0)
    return np.where(inside, 30.0 * tau**2 * (1.0 - tau) ** 2, 0.0)


@dataclass(frozen=True)
class BoundaryStreamData:
    """Values of H along the four edges, counterclockwise from (-1/2, -1/2).

    ``values[k, i]`` is H at ``edge_points(k, s[i])``.
    """

    s: np.ndarray
    values: np.ndarray
    gap: float

    def chebyshev_fit(self, k, tol=1e-13, max_degree=128):
        """Chebyshev coefficients (in u = 2 s) of edge k's values.

        The degree grows until the fit reproduces the samples to ``tol``;
        failure raises ConstructionError with the best residual.
        """
        u = 2.0 * self.s
        scale = max(1.0, float(np.max(np.abs(self.values[k]))))
        residual = np.inf
        for deg in range(8, max_degree + 1, 8):
            coef = chebyshev.chebfit(u, self.values[k], deg)
            residual = float(np.max(np.abs(chebyshev.chebval(u, coef) - self.values[k])))
            if residual <= tol * scale:
                return coef
        raise ConstructionError(
            f"edge {EDGE_NAMES[k]}: Chebyshev fit residual {residual:.3e} above {tol:.1e}"
        )


def boundary_stream_data(samples_per_edge=10_000, tol=1e-8):
    """Integrate Y.n counterclockwise around the cell boundary.

    Starting from H = 0 at the vertex (-1/2, -1/2), each edge adds the
    cumulative Simpson integral of Y.n.  The net flux of Y through the
    boundary is zero, so the loop must close; a gap above ``tol`` signals a
    quadrature problem and raises ConstructionError.
    """
    if samples_per_edge < 16:
        raise DomainError("need at least 16 samples per edge")
    s = np.linspace(-HALF, HALF, int(samples_per_edge) + 1)
    values = np.empty((4, s.size))
    start = 0.0
    for k in range(4):
        flux = radial_field(edge_points(k, s)) @ _EDGE_NORMALS[k]
        values[k] = start + cumulative_simpson(flux, x=s, initial=0.0)
        start = values[k, -1]
    gap = float(start - values[0, 0])
    if abs(gap) > tol:
        raise ConstructionError(f"boundary loop does not close: gap {gap:.3e}")
    return BoundaryStreamData(s, values, gap)


class StreamCorrection:
    """Scalar field H on the cell built from boundary data.

    Inside, H is the bilinearly blended (Coons) transfinite interpolant of
    the four edge functions, which reproduces the boundary data exactly on
    every edge.  A quintic cutoff in r makes H constant for ``r <= r_inner``
    and leaves it untouched for ``r >= r_outer``.
    """

    def __init__(self, boundary, r_inner=0.15, r_outer=0.45):
        if not 0 < r_inner < r_outer < HALF:
            raise DomainError("cutoff radii must satisfy 0 < r_inner < r_outer < 1/2")
        self.boundary = boundary
        self.r_inner = r_inner
        self.r_outer = r_outer
        coefs = [boundary.chebyshev_fit(k) for k in range(4)]
        width = max(c.size for c in coefs)
        self.coef = np.zeros((4, width))
        self.dcoef = np.zeros((4, width))
        for k, c in enumerate(coefs):
            self.coef[k, : c.size] = c
            # d/ds = 2 d/du
            dc = 2.0 * chebyshev.chebder(c)
            self.dcoef[k, : dc.size] = dc
        v = boundary.values
        # corner values at (-,-), (+,-), (-,+), (+,+)
        self.corners = np.array([v[0, 0], v[1, 0], v[3, 0], v[2, 0]])
        self._c00, self._c10, self._c01, self._c11 = self.corners
        self.level = float(np.mean(self.corners))

    def _edge(self, k, s):
        return chebyshev.chebval(2.0 * s, self.coef[k]), chebyshev.chebval(2.0 * s, self.dcoef[k])

    def _sides(self, x, y):
        # H on each side as a function of the free coordinate, with derivatives
        bottom, dbottom = self._edge(0, x)
        right, dright = self._edge(1, y)
        top, dtop = self._edge(2, -x)
        left, dleft = self._edge(3, -y)
        return bottom, dbottom, right, dright, top, -dtop, left, -dleft

    def coons(self, x, y):
        """Transfinite interpolant C and its gradient."""
        a = x + HALF
        b = y + HALF
        bottom, dbottom, right, dright, top, dtop, left, dleft = self._sides(x, y)
        c00, c10, c01, c11 = self._c00, self._c10, self._c01, self._c11
        corners = (1 - a) * (1 - b) * c00 + a * (1 - b) * c10 + (1 - a) * b * c01 + a * b * c11
        C = (1 - a) * left + a * right + (1 - b) * bottom + b * top - corners
        Cx = (
            right - left + (1 - b) * dbottom + b * dtop
            - ((1 - b) * (c10 - c00) + b * (c11 - c01))
        )
        Cy = (
            (1 - a) * dleft + a * dright + top - bottom
            - ((1 - a) * (c01 - c00) + a * (c11 - c10))
        )
        return C, Cx, Cy

    def cutoff(self, x, y):
        """chi and its gradient; chi = 1 near the puncture, 0 far from it."""
        r = np.hypot(x, y)
        width = self.r_outer - self.r_inner
        tau = (r - self.r_inner) / width
        chi = 1.0 - _smoothstep(tau)
        with np.errstate(invalid="ignore", divide="ignore"):
            dchi_dr = np.where(r > 0, -_smoothstep_prime(tau) / width / r, 0.0)
        return chi, dchi_dr * x, dchi_dr * y

    def evaluate(self, x, y):
        """H and its gradient at points (x, y) of the closed cell."""
        C, Cx, Cy = self.coons(x, y)
        chi, chix, chiy = self.cutoff(x, y)
        dev = C - self.level
        H = self.level + (1 - chi) * dev
        Hx = (1 - chi) * Cx - chix * dev
        Hy = (1 - chi) * Cy - chiy * dev
        return H, Hx, Hy

    def __call__(self, x, y):
        return self.evaluate(np.asarray(x, float), np.asarray(y, float))[0]

    def rotated_gradient(self, p):
        p = np.asarray(p, dtype=float)
        _, Hx, Hy = self.evaluate(p[..., 0], p[..., 1])
        return np.stack([-Hy, Hx], axis=-1)


def solve_stream_correction(boundary, resolution=1 / 512, r_inner=0.15, r_outer=0.45):
    """Extend boundary values of H to the cell; return (H, samples on the grid).

    The grid has spacing ``resolution`` and includes the boundary.
    """
    corr = StreamCorrection(boundary, r_inner, r_outer)
    nodes = _grid_nodes(resolution)
    X, Yg = np.meshgrid(nodes, nodes, indexing="ij")
    return corr, corr(X, Yg)


def _grid_nodes(h):
    m = round(1.0 / h)
    if m < 4 or abs(m * h - 1.0) > 1e-12:
        raise DomainError(f"resolution must be 1/m for an integer m >= 4, got {h!r}")
    return np.linspace(-HALF, HALF, m + 1)


@dataclass(frozen=True, eq=False)
class FlowSettings:
    base_step: float = 1e-2
    center_guard: float = 1e-12


@dataclass(frozen=True, eq=False)
class CellField:
    """The contracting field on the punctured unit cell.

    ``field_values`` and ``stream_correction`` are samples on the grid of
    spacing ``resolution`` (index order ``[i_x, i_y]``); the field itself is
    evaluated exactly through ``correction``.  The node at the puncture holds
    NaN.
    """

    resolution: float
    puncture_radius: float
    correction: StreamCorrection
    nodes: np.ndarray
    stream_correction: np.ndarray
    field_values: np.ndarray
    settings: FlowSettings = field(default_factory=FlowSettings)

    def __call__(self, p):
        return field_at(self.correction, p)

    def flow(self, x0, t):
        return flow(self, x0, t)


def field_at(correction, p):
    p = np.asarray(p, dtype=float)
    return radial_field(p) + correction.rotated_gradient(p)


def build_cell_field(
    resolution=1 / 512,
    puncture_radius=0.15,
    blend_radius=0.45,
    samples_per_edge=10_000,
    tol_edge=1e-6,
    tol_vertex=1e-6,
    settings=None,
):
    """Construct the cell field and check tangency and vertex residuals."""
    boundary = boundary_stream_data(samples_per_edge)
    corr, H = solve_stream_correction(boundary, resolution, puncture_radius, blend_radius)
    nodes = _grid_nodes(resolution)
    X, Yg = np.meshgrid(nodes, nodes, indexing="ij")
    pts = np.stack([X, Yg], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = field_at(corr, pts)
    values[np.hypot(X, Yg) == 0] = np.nan
    H = np.array(H)
    cf = CellField(
        resolution, puncture_radius, corr, nodes, H, values, settings or FlowSettings()
    )
    res = boundary_residuals(cf)
    if res["edge"] > tol_edge or res["vertex"] > tol_vertex:
        raise ConstructionError(
            "stream correction misses boundary conditions: "
            f"max |X.n| = {res['edge']:.3e}, max |X(vertex)| = {res['vertex']:.3e}"
        )
    return cf


def boundary_residuals(cf, samples=4001):
    """Max |X.n| along the edges and max |X| at the vertices."""
    s = np.linspace(-HALF, HALF, samples)
    edge = 0.0
    for k in range(4):
        Xb = cf(edge_points(k, s))
        edge = max(edge, float(np.max(np.abs(Xb @ _EDGE_NORMALS[k]))))
    vertex = float(np.max(np.linalg.norm(cf(VERTICES), axis=-1)))
    return {"edge": edge, "vertex": vertex}


def divergence_check(cf):
    """Max |div X + 1| from central differences of the sampled field.

    Boundary nodes and nodes with ``r < r0 + 2h`` are excluded.
    """
    h = cf.resolution
    F = cf.field_values
    div = (F[2:, 1:-1, 0] - F[:-2, 1:-1, 0]) / (2 * h) + (F[1:-1, 2:, 1] - F[1:-1, :-2, 1]) / (
        2 * h
    )
    X, Yg = np.meshgrid(cf.nodes[1:-1], cf.nodes[1:-1], indexing="ij")
    keep = np.hypot(X, Yg) >= cf.puncture_radius + 2 * h
    return float(np.max(np.abs(div[keep] + 1.0)))


def divergence_radial_exact(r):
    """div Y = g'(r) + g(r)/r, identically -1."""
    gp = -0.5 - 1.0 / (2.0 * pi * r**2)
    return gp + radial_profile(r) / r


def flow(cf, x0, t):
    """Time-t flow of the cell field from points x0 (shape (2,) or (N, 2)).

    Inside the radius where X = Y the exact radial solution is used up to the
    exit time; the rest of the trajectory is integrated with classical RK4 at
    a uniform step no larger than ``base_step * min(1, 1/t)``.
    """
    x0 = np.asarray(x0, dtype=float)
    single = x0.ndim == 1
    pts = np.atleast_2d(x0).copy()
    t = np.broadcast_to(np.asarray(t, dtype=float), pts.shape[:1]).copy()
    if np.any(t < 0):
        raise DomainError("flow time must be nonnegative")
    r0 = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(r0 <= cf.settings.center_guard):
        raise DomainError("flow is undefined at the puncture")

    rho = cf.puncture_radius
    inner = (r0 < rho) & (t > 0)
    if np.any(inner):
        # exit time from the disk r < rho under the exact radial flow
        exit_time = np.log((1.0 / pi - r0[inner] ** 2) / (1.0 / pi - rho**2))
        step = np.minimum(exit_time, t[inner])
        pts[inner] = radial_flow_exact(pts[inner], step)
        t[inner] -= step

    nsteps, dt = _step_plan(cf, t)
    if nsteps:
        corr = cf.correction
        pts = _kernels.rk4_many(
            pts, dt, nsteps, corr.coef, corr.dcoef, corr.corners, corr.level,
            corr.r_inner, corr.r_outer,
        )
        _check_trajectories(cf, pts)
    return pts[0] if single else pts


def _step_plan(cf, t):
    # one uniform step count for all points, each with its own step t_i / n
    t_max = float(np.max(t)) if t.size else 0.0
    if t_max <= 0:
        return 0, np.zeros_like(t)
    max_step = cf.settings.base_step * min(1.0, 1.0 / t_max)
    nsteps = int(ceil(t_max / max_step))
    return nsteps, t / nsteps


def _check_trajectories(cf, pts):
    if not np.all(np.isfinite(pts)):
        raise IntegrationError("trajectory became non-finite")
    if np.any(np.hypot(pts[:, 0], pts[:, 1]) < cf.settings.center_guard):
        raise IntegrationError("trajectory reached the puncture")


def flow_reference(cf, x0, t):
    """Pure numpy RK4 on the vectorised field; slow, used as a cross-check."""
    pts = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    t = np.broadcast_to(np.asarray(t, dtype=float), pts.shape[:1]).copy()
    r0 = np.hypot(pts[:, 0], pts[:, 1])
    inner = (r0 < cf.puncture_radius) & (t > 0)
    if np.any(inner):
        exit_time = np.log((1.0 / pi - r0[inner] ** 2) / (1.0 / pi - cf.puncture_radius**2))
        step = np.minimum(exit_time, t[inner])
        pts[inner] = radial_flow_exact(pts[inner], step)
        t[inner] -= step
    nsteps, dt = _step_plan(cf, t)
    dt = dt[:, None]
    for _ in range(nsteps):
        k1 = cf(pts)
        k2 = cf(pts + 0.5 * dt * k1)
        k3 = cf(pts + 0.5 * dt * k2)
        k4 = cf(pts + dt * k3)
        pts = pts + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    _check_trajectories(cf, pts)
    return pts


def fd_steps(r, h=1e-5, relative=1e-4):
    """Finite-difference steps ``min(h, relative * r)`` at distance r from the puncture.

    Near the puncture the flow bends on the scale r, so a fixed step would
    measure the stencil rather than the map.
    """
    return np.minimum(h, relative * np.asarray(r, dtype=float))


def flow_jacobian(cf, x0, t, h=1e-5, relative=1e-4):
    """Central finite-difference Jacobian of the time-t map at rows of x0."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), x0.shape[:1])
    steps = fd_steps(np.hypot(x0[:, 0], x0[:, 1]), h, relative)
    return fd_jacobian(lambda p: flow(cf, p, np.repeat(t, 4)), x0, steps)


@dataclass(frozen=True, eq=False)
class LemmaMap:
    """The grid map ``psi = L phi`` with pitch ``epsilon`` and scale ``L``."""

    epsilon: float
    L: float
    cell_field: CellField

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("grid pitch must be positive")
        if not self.L >= 1:
            raise DomainError("scaling factor must satisfy L >= 1")

    @property
    def flow_time(self):
        return 2.0 * log(self.L)

    def __call__(self, x):
        return lemma_map(self, x)


def cell_decompose(x, eps):
    """Split points into lattice indices and cell coordinates in [-1/2, 1/2)^2."""
    x = np.asarray(x, dtype=float)
    scaled = x / eps
    m = np.floor(scaled + HALF)
    return m, scaled - m


def lemma_map(lm, x):
    """Apply ``psi`` to points of the plane off the eps-lattice."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    m, u = cell_decompose(pts, lm.epsilon)
    if np.any(np.all(u == 0.0, axis=-1)):
        raise DomainError("psi is undefined on the lattice")
    if lm.L == 1.0:
        out = pts.copy()
    else:
        v = flow(lm.cell_field, u, lm.flow_time)
        out = lm.L * lm.epsilon * (m + v)
    return out[0] if single else out


def lemma_jacobian(lm, x, h=1e-5, relative=1e-4):
    """Finite-difference Jacobian of ``psi``, with steps scaled to the cell."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _, u = cell_decompose(x, lm.epsilon)
    steps = lm.epsilon * fd_steps(np.hypot(u[:, 0], u[:, 1]), h, relative)
    return fd_jacobian(lm, x, steps)


def export_field_csv(cf, path):
    """Write ``x, y, X_x, X_y, H`` for every grid node except the puncture."""
    X, Yg = np.meshgrid(cf.nodes, cf.nodes, indexing="ij")
    rows = np.column_stack(
        [X.ravel(), Yg.ravel(), cf.field_values[..., 0].ravel(), cf.field_values[..., 1].ravel(),
         cf.stream_correction.ravel()]
    )
    rows = rows[np.all(np.isfinite(rows), axis=1)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "X_x", "X_y", "H"])
        writer.writerows(rows.tolist())
    return len(rows)


def _sample_cell(rng, size, min_radius=1e-3):
    pts = rng.uniform(-HALF, HALF, (4 * size + 16, 2))
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > min_radius]
    return pts[:size]


def verify_cell_field(cf, samples=1000, seed=0, t_max=3.0, L=2.0, tolerances=None):
    """Invariant suite for a built cell field, as a JSON-ready report.

    Checks area contraction of the flow, preservation of the closed cell
    and of its edges, fixed vertices, puncture repulsion, the divergence
    residual, and that ``psi`` maps the central square into its L-scaling
    with unit Jacobian.
    """
    tol = {"jacobian": 1e-3, "edge_motion": 1e-6, "vertex_motion": 1e-9, "divergence": 5e-3}
    tol.update(tolerances or {})
    rng = np.random.default_rng(seed)
    checks = {}

    x0 = _sample_cell(rng, samples)
    t = rng.uniform(0.0, t_max, len(x0))
    D = flow_jacobian(cf, x0, t)
    det_err = float(np.max(np.abs(np.linalg.det(D) - np.exp(-t))))
    checks["area_contraction"] = (det_err, det_err < tol["jacobian"])

    img = flow(cf, x0, t)
    outside = int(np.count_nonzero(np.abs(img) > HALF + 1e-12))
    checks["cell_preserved"] = (float(outside), outside == 0)

    s = rng.uniform(-HALF, HALF, samples)
    drift = 0.0
    for k in range(4):
        pe = edge_points(k, s)
        out = flow(cf, pe, rng.uniform(0.0, t_max, samples))
        drift = max(drift, float(np.max(np.abs(out @ _EDGE_NORMALS[k] - HALF))))
    checks["edges_preserved"] = (drift, drift < tol["edge_motion"])

    moved = float(np.max(np.abs(flow(cf, VERTICES, t_max) - VERTICES)))
    checks["vertices_fixed"] = (moved, moved < tol["vertex_motion"])

    # radius along trajectories started inside r0/2, on a grid of times
    ang = rng.uniform(0.0, 2 * pi, samples // 10 + 1)
    rad = rng.uniform(1e-3, cf.puncture_radius / 2, ang.size)
    p = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    r_prev = rad
    worst = 0.0
    for _ in range(30):
        p = flow(cf, p, t_max / 30)
        r_now = np.hypot(p[:, 0], p[:, 1])
        worst = min(worst, float(np.min(r_now - r_prev)))
        r_prev = r_now
    checks["puncture_repulsion"] = (worst, worst >= -1e-12)

    div = divergence_check(cf)
    checks["divergence"] = (div, div < tol["divergence"])

    lm = LemmaMap(1.0, L, cf)
    u = _sample_cell(rng, samples)
    v = lemma_map(lm, u)
    escaped = int(np.count_nonzero(np.abs(v) > L * HALF * (1 + 1e-12)))
    checks["psi_square_to_square"] = (float(escaped), escaped == 0)
    det_psi = float(np.max(np.abs(np.linalg.det(lemma_jacobian(lm, u)) - 1.0)))
    checks["psi_symplectic"] = (det_psi, det_psi < tol["jacobian"])

    res = boundary_residuals(cf)
    failures = sum(not ok for _, ok in checks.values())
    return {
        "check": "cell_field",
        "samples": int(samples),
        "failures": int(failures),
        "max_residual": det_err,
        "seed": int(seed),
        "parameters": {
            "resolution": cf.resolution,
            "puncture_radius": cf.puncture_radius,
            "base_step": cf.settings.base_step,
            "t_max": t_max,
            "L": L,
        },
        "boundary_residuals": res,
        "checks": {k: {"value": v, "passed": bool(ok)} for k, (v, ok) in checks.items()},
    }
