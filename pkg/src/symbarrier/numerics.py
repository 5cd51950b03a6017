"""Small numerical helpers shared by the verification routines."""

import numpy as np


def fd_jacobian(func, x, h):
    """Central-difference Jacobian of a vectorised map at rows of x.

    ``func`` maps an (N, d) array to (N, d); ``h`` is a scalar step or one
    step per row.  Returns an (N, d, d) array.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    h = np.broadcast_to(np.asarray(h, dtype=float), (n,))
    eye = np.eye(d)
    # stencil rows: for each point, +e_0, -e_0, +e_1, -e_1, ...
    offsets = np.concatenate([eye, -eye], axis=1).reshape(2 * d, d)
    stencil = x[:, None, :] + h[:, None, None] * offsets[None]
    out = np.asarray(func(stencil.reshape(-1, d))).reshape(n, 2 * d, d)
    return np.transpose((out[:, 0::2] - out[:, 1::2]) / (2 * h[:, None, None]), (0, 2, 1))


def symplectic_defect(D, J):
    """``max |D^T J D - J|`` for each Jacobian in a stack."""
    D = np.asarray(D)
    return np.max(np.abs(np.einsum("nji,jk,nkl->nil", D, J, D) - J), axis=(1, 2))
