"""Linear symplectic algebra on R^{2n}.

Coordinates are interleaved, ``(x1, y1, x2, y2, ..., xn, yn)``, and the
symplectic form is ``omega(u, v) = u @ J @ v`` with ``J`` block diagonal in
``[[0, 1], [-1, 0]]``.  Everything in the package assumes this ordering.
"""

import json

import numpy as np

from .errors import DimensionError, DomainError, ValidationError

COORDINATE_ORDER = "interleaved_xy"

_J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def half_dimension(M):
    """Return n for a 2n x 2n matrix, raising DimensionError otherwise."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] % 2:
        raise DimensionError(f"phase space must be even dimensional, got {M.shape[0]}")
    return M.shape[0] // 2


def standard_form_matrix(n):
    """Matrix of the standard symplectic form on R^{2n}."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return np.kron(np.eye(int(n)), _J2)


def complex_structure(n):
    """Multiplication by i, ``(x, y) -> (-y, x)`` in each complex coordinate.

    With this convention ``omega(u, Ju) = |u|^2``.
    """
    return -standard_form_matrix(n)


def omega(u, v):
    """Evaluate the standard symplectic form on the last axis of u and v."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    # sum_i u_x v_y - u_y v_x, broadcast over leading axes
    return np.sum(u[..., 0::2] * v[..., 1::2] - u[..., 1::2] * v[..., 0::2], axis=-1)


def is_symplectic(M, tol=1e-9):
    M = np.asarray(M, dtype=float)
    n = half_dimension(M)
    J = standard_form_matrix(n)
    return bool(np.max(np.abs(M.T @ J @ M - J)) <= tol)


def scaling_map(L, n):
    """The map fixing z_1..z_{n-1} and multiplying z_n by L."""
    if not L >= 1:
        raise DomainError(f"scaling factor must satisfy L >= 1, got {L!r}")
    d = np.ones(2 * int(n))
    d[-2:] = L
    return np.diag(d)


def polterovich_matrix(alpha):
    """The symplectic 4x4 family M_alpha.

    Its image of the unit ball has thin slices by the planes ``z_2 = const``
    once ``alpha`` is small.
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha!r}")
    a = float(alpha)
    return np.array(
        [
            [a, 0.0, 0.0, -1.0],
            [0.0, 1.0 / a, 0.0, 0.0],
            [0.0, -1.0, a, 0.0],
            [0.0, 0.0, 0.0, 1.0 / a],
        ]
    )


def plane_rotation(theta, i, n):
    """Rotation by theta inside the (x_i, y_i) plane (0-based i)."""
    R = np.eye(2 * n)
    c, s = np.cos(theta), np.sin(theta)
    R[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = [[c, -s], [s, c]]
    return R


def symplectic_shear(S):
    """Symplectic shear ``[[I, S], [0, I]]`` in (x-block, y-block) form.

    S must be symmetric n x n; the result is returned in interleaved order.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if not np.allclose(S, S.T):
        raise ValidationError("shear block must be symmetric")
    block = np.block([[np.eye(n), S], [np.zeros((n, n)), np.eye(n)]])
    perm = _interleave_permutation(n)
    return block[np.ix_(perm, perm)]


def _interleave_permutation(n):
    # index into (x1..xn, y1..yn) for each interleaved slot
    perm = np.empty(2 * n, dtype=int)
    perm[0::2] = np.arange(n)
    perm[1::2] = np.arange(n, 2 * n)
    return perm


def random_symplectic(n, rng, factors=6):
    """Product of random rotations, shears and (n = 2) M_alpha factors."""
    T = np.eye(2 * n)
    for _ in range(factors):
        kind = rng.integers(3 if n == 2 else 2)
        if kind == 0:
            F = plane_rotation(rng.uniform(0, 2 * np.pi), rng.integers(n), n)
        elif kind == 1:
            A = rng.normal(scale=0.7, size=(n, n))
            F = symplectic_shear((A + A.T) / 2)
            if rng.random() < 0.5:
                F = F.T
        else:
            F = polterovich_matrix(rng.uniform(0.25, 2.0))
        T = F @ T
    return T


def _check_spd(P, tol):
    P = np.asarray(P, dtype=float)
    half_dimension(P)
    scale = max(np.max(np.abs(P)), 1.0)
    if np.max(np.abs(P - P.T)) > tol * scale:
        raise ValidationError("matrix is not symmetric")
    try:
        np.linalg.cholesky((P + P.T) / 2)
    except np.linalg.LinAlgError:
        raise ValidationError("matrix is not positive definite") from None
    return (P + P.T) / 2


def symplectic_spectrum(P, tol=1e-9):
    """Symplectic eigenvalues of a symmetric positive-definite matrix.

    With ``P = C C^T`` (Cholesky), ``C^T J C`` is antisymmetric and similar
    to ``J P``; its singular values are the ``d_j``, each twice.  This stays
    accurate for ill-conditioned P, where squaring ``J P`` would lose
    about half the digits.  Returns ``d_1 <= ... <= d_n``.
    """
    P = _check_spd(P, tol)
    n = half_dimension(P)
    C = np.linalg.cholesky(P)
    s = np.linalg.svd(C.T @ standard_form_matrix(n) @ C, compute_uv=False)
    return np.sort(s)[0::2]


def symplectic_spectrum_squared(P, tol=1e-9):
    """Same quantity from the real matrix ``(J P)^2``, whose eigenvalues are ``-d_j^2``."""
    P = _check_spd(P, tol)
    n = half_dimension(P)
    JP = standard_form_matrix(n) @ P
    ev = np.linalg.eigvals(JP @ JP)
    d2 = np.sort(-ev.real)
    return np.sqrt(np.clip(d2[0::2], 0.0, None))


def symplectic_spectrum_complex(P, tol=1e-9):
    """Same quantity from a complex eigensolve of ``J P`` (cross-check)."""
    P = _check_spd(P, tol)
    n = half_dimension(P)
    ev = np.linalg.eigvals(standard_form_matrix(n) @ P)
    return np.sort(np.abs(ev.imag))[0::2]


def matrix_to_json(M):
    M = np.asarray(M, dtype=float)
    half_dimension(M)
    return {"coordinate_order": COORDINATE_ORDER, "rows": M.tolist()}


def matrix_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    order = obj.get("coordinate_order")
    if order != COORDINATE_ORDER:
        raise ValidationError(f"unsupported coordinate_order {order!r}")
    M = np.array(obj["rows"], dtype=float)
    half_dimension(M)
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix entries must be finite")
    return M
