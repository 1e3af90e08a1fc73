"""Particle optics: absorption, scattering and geometry factor per wavelength.

Only an analytic surrogate is provided. Anything with the same call
signature (returning :class:`OpticsSample`) can stand in for it, e.g. a
wrapper around a Mie solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

#: design box of the paint problem (radius R, shell thickness d, nm)
R_RANGE = (1.0, 75.0)
D_RANGE = (1.0, 250.0)
#: evaluation box: particles perturbed by up to +-30 % stay inside
R_EVAL = (0.7, 97.5)
D_EVAL = (0.7, 325.0)
LAMBDA_RANGE = (400.0, 700.0)


@dataclass(frozen=True, eq=False)
class OpticsSample:
    """Values and their partials; ``d_*`` carry a trailing axis ``(dR, dd)``."""

    abs: np.ndarray
    sca: np.ndarray
    geo: np.ndarray
    d_abs: np.ndarray
    d_sca: np.ndarray
    d_geo: np.ndarray


class Optics(Protocol):
    def __call__(self, R, d, lam) -> OpticsSample: ...


def _check_box(R, d, lam, tol=1e-9):
    for name, v, (lo, hi) in (("R", R, R_EVAL), ("d", d, D_EVAL), ("lambda", lam, LAMBDA_RANGE)):
        v = np.asarray(v)
        if np.any(v < lo - tol) or np.any(v > hi + tol):
            raise ValueError(f"{name} outside the evaluation range [{lo}, {hi}]")


class SurrogateOptics:
    """Smooth closed-form stand-in for particle scattering.

    With ``t = (R-1)/74``, ``s = (d-1)/249``, ``w = (lam-400)/300``::

        Abs = 0.05 + (0.3 + 0.7 s) exp(-((w - (0.25 + 0.4 s + 0.15 t)) / 0.18)^2)
        Sca = 0.1 + (0.2 + 0.8 t) (0.55 + 0.45 sin(2 pi (w + 0.8 s + 0.3 t)))
        Geo = 0.85 (s + t) / (s + t + 0.5) (0.4 + 0.3 w)

    Inputs broadcast against each other.
    """

    def __call__(self, R, d, lam) -> OpticsSample:
        R, d, lam = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (R, d, lam)))
        _check_box(R, d, lam)
        t = (R - 1.0) / 74.0
        s = (d - 1.0) / 249.0
        w = (lam - 400.0) / 300.0

        amp = 0.3 + 0.7 * s
        z = (w - (0.25 + 0.4 * s + 0.15 * t)) / 0.18
        gauss = np.exp(-z * z)
        absorb = 0.05 + amp * gauss
        # d gauss / d centre = gauss * 2z / 0.18
        dg = gauss * 2.0 * z / 0.18
        abs_t = amp * dg * 0.15
        abs_s = 0.7 * gauss + amp * dg * 0.4

        amp2 = 0.2 + 0.8 * t
        phase = 2.0 * np.pi * (w + 0.8 * s + 0.3 * t)
        wave = 0.55 + 0.45 * np.sin(phase)
        dwave = 0.45 * np.cos(phase) * 2.0 * np.pi
        sca = 0.1 + amp2 * wave
        sca_t = 0.8 * wave + amp2 * dwave * 0.3
        sca_s = amp2 * dwave * 0.8

        p = s + t
        spec = 0.4 + 0.3 * w
        geo = 0.85 * p / (p + 0.5) * spec
        geo_p = 0.85 * 0.5 / (p + 0.5) ** 2 * spec

        def chain(dt, ds):
            return np.stack([dt / 74.0, ds / 249.0], axis=-1)

        return OpticsSample(absorb, sca, geo, chain(abs_t, abs_s),
                            chain(sca_t, sca_s), chain(geo_p, geo_p))


def surrogate_optics(R, d, lam) -> OpticsSample:
    return SurrogateOptics()(R, d, lam)
