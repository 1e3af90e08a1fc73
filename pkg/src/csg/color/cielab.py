"""CIE XYZ to CIELAB with its Jacobian."""

from __future__ import annotations

import numpy as np

WHITE_POINT = np.array([94.72528492, 100.0, 107.13012997])
EPSILON = 216.0 / 24389.0
KAPPA = 24389.0 / 27.0


def lab_f(t):
    """Piecewise cube root; returns ``(f(t), f'(t))``.

    The linear branch is used for ``t <= EPSILON``; both meet at 6/29.
    """
    t = np.asarray(t, dtype=float)
    cube = t > EPSILON
    tc = np.where(cube, t, 1.0)
    f = np.where(cube, np.cbrt(tc), (KAPPA * t + 16.0) / 116.0)
    df = np.where(cube, 1.0 / (3.0 * np.cbrt(tc) ** 2), KAPPA / 116.0)
    return f, df


def lab_from_xyz(xyz, white=WHITE_POINT):
    """``(L, a, b)`` and the 3x3 Jacobian ``d(L, a, b) / d(X, Y, Z)``."""
    xyz = np.asarray(xyz, dtype=float)
    white = np.asarray(white, dtype=float)
    if xyz.shape != (3,) or white.shape != (3,):
        raise ValueError("expected three tristimulus values")
    if np.any(white <= 0):
        raise ValueError("white point must be positive")
    f, df = lab_f(xyz / white)
    fx, fy, fz = f
    lab = np.array([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)])
    g = df / white
    jac = np.array([[0.0, 116.0 * g[1], 0.0],
                    [500.0 * g[0], -500.0 * g[1], 0.0],
                    [0.0, 200.0 * g[1], -200.0 * g[2]]])
    return lab, jac
