"""Compiled inner loops for the cell flow.

These mirror ``StreamCorrection.evaluate`` and ``radial_field`` point by
point; tests check the two paths agree.
"""

import math

import numpy as np
from numba import njit

_INV_2PI = 1.0 / (2.0 * math.pi)


@njit(cache=True)
def _clenshaw(c, u):
    b1 = 0.0
    b2 = 0.0
    for j in range(c.shape[0] - 1, 0, -1):
        b1, b2 = 2.0 * u * b1 - b2 + c[j], b1
    return u * b1 - b2 + c[0]


@njit(cache=True)
def cell_field_point(x, y, coef, dcoef, corners, level, r_in, r_out):
    # edge parameter s maps to Chebyshev variable u = 2 s
    bottom = _clenshaw(coef[0], 2.0 * x)
    dbottom = _clenshaw(dcoef[0], 2.0 * x)
    right = _clenshaw(coef[1], 2.0 * y)
    dright = _clenshaw(dcoef[1], 2.0 * y)
    top = _clenshaw(coef[2], -2.0 * x)
    dtop = -_clenshaw(dcoef[2], -2.0 * x)
    left = _clenshaw(coef[3], -2.0 * y)
    dleft = -_clenshaw(dcoef[3], -2.0 * y)
    c00 = corners[0]
    c10 = corners[1]
    c01 = corners[2]
    c11 = corners[3]
    a = x + 0.5
    b = y + 0.5
    cc = (1 - a) * (1 - b) * c00 + a * (1 - b) * c10 + (1 - a) * b * c01 + a * b * c11
    C = (1 - a) * left + a * right + (1 - b) * bottom + b * top - cc
    Cx = right - left + (1 - b) * dbottom + b * dtop - ((1 - b) * (c10 - c00) + b * (c11 - c01))
    Cy = (1 - a) * dleft + a * dright + top - bottom - ((1 - a) * (c01 - c00) + a * (c11 - c10))

    r2 = x * x + y * y
    r = math.sqrt(r2)
    width = r_out - r_in
    tau = (r - r_in) / width
    if tau <= 0.0:
        chi = 1.0
        dchi = 0.0
    elif tau >= 1.0:
        chi = 0.0
        dchi = 0.0
    else:
        chi = 1.0 - tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau)
        dchi = -30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) / width / r
    dev = C - level
    Hx = (1 - chi) * Cx - dchi * x * dev
    Hy = (1 - chi) * Cy - dchi * y * dev

    radial = -0.5 + _INV_2PI / r2
    return radial * x - Hy, radial * y + Hx


@njit(cache=True)
def rk4_many(pts, dts, nsteps, coef, dcoef, corners, level, r_in, r_out):
    out = np.empty_like(pts)
    for i in range(pts.shape[0]):
        x = pts[i, 0]
        y = pts[i, 1]
        h = dts[i]
        if h > 0.0:
            for _ in range(nsteps):
                k1x, k1y = cell_field_point(x, y, coef, dcoef, corners, level, r_in, r_out)
                k2x, k2y = cell_field_point(
                    x + 0.5 * h * k1x, y + 0.5 * h * k1y, coef, dcoef, corners, level, r_in, r_out
                )
                k3x, k3y = cell_field_point(
                    x + 0.5 * h * k2x, y + 0.5 * h * k2y, coef, dcoef, corners, level, r_in, r_out
                )
                k4x, k4y = cell_field_point(
                    x + h * k3x, y + h * k3y, coef, dcoef, corners, level, r_in, r_out
                )
                x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        out[i, 0] = x
        out[i, 1] = y
    return out
