"""Two-flux reflectance of an opaque film and the surface correction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def km_reflectance(K, S):
    """Infinite-film reflectance from absorption ``K`` and scattering ``S``.

    ``R = 1 + a - sqrt(a^2 + 2a)`` with ``a = (8/3) K/S``.

    Returns
    -------
    R, dR_dK, dR_dS : arrays
        The partials diverge as ``K -> 0``.
    """
    K = np.asarray(K, dtype=float)
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0):
        raise ValueError("scattering coefficient must be positive")
    if np.any(K < 0):
        raise ValueError("absorption coefficient must be nonnegative")
    q = K / S
    a = (8.0 / 3.0) * q
    root = np.sqrt(a * a + 2.0 * a)
    R = 1.0 + a - root
    with np.errstate(divide="ignore", invalid="ignore"):
        dR_dq = (8.0 / 3.0) * (1.0 - (a + 1.0) / root)
    dR_dq = np.where(root > 0, dR_dq, -np.inf)
    # q dR/dq ~ -sqrt(q) -> 0 as K -> 0
    with np.errstate(invalid="ignore"):
        dR_dS = np.where(q > 0, -dR_dq * q / S, 0.0)
    return R, dR_dq / S, dR_dS


@dataclass(frozen=True)
class SaundersonParams:
    rho0: float = 0.04
    rho1: float = 0.6

    def __post_init__(self):
        if not (0 <= self.rho0 < 1 and 0 <= self.rho1 < 1):
            raise ValueError("surface reflection parameters must lie in [0, 1)")


def saunderson(R, params: SaundersonParams = SaundersonParams()):
    """Surface-corrected reflectance and its derivative in ``R``."""
    R = np.asarray(R, dtype=float)
    r0, r1 = params.rho0, params.rho1
    denom = 1.0 - r1 * R
    if np.any(denom <= 0):
        raise ValueError("rho1 * R must stay below 1")
    value = ((1.0 - r0 - r1) * R + r0) / denom
    deriv = ((1.0 - r0 - r1) + r1 * r0) / denom ** 2
    return value, deriv
