"""Quadratic test problems with known solutions."""

from __future__ import annotations

import numpy as np

from ..composite import IntegralGroup, SumOfIntegrals
from ..core import IntegralProblem
from ..measures import BoxDomain, UniformBox

DESIGN_BOUND = 5.0


def quadratic_problem(d_r: int) -> IntegralProblem:
    """``min 1/2 int |u - x|^2 dx`` with ``x ~ U(-1/2, 1/2)^d``, ``u in [-5, 5]^d``.

    ``grad J(u) = u``, ``J(u) = |u|^2/2 + d/24``, ``u* = 0``.
    """
    if d_r < 1:
        raise ValueError("d_r must be >= 1")

    def integrand(u, x):
        r = u - x
        return 0.5 * float(r @ r), r

    return IntegralProblem(
        f"quad{d_r}", BoxDomain.cube(-DESIGN_BOUND, DESIGN_BOUND, d_r),
        UniformBox.cube(-0.5, 0.5, d_r), integrand,
        objective=lambda u: 0.5 * float(np.dot(u, u)) + d_r / 24.0,
        gradient=lambda u: np.asarray(u, dtype=float).copy(),
        optimum=np.zeros(d_r))


def anisotropic_problem(d_o: int) -> IntegralProblem:
    """``min 1/2 int |u - x 1|^2 dx``, scalar ``x ~ U(-1/2, 1/2)``, ``u in [-5, 5]^d_o``."""
    if d_o < 1:
        raise ValueError("d_o must be >= 1")

    def integrand(u, x):
        r = u - x[0]
        return 0.5 * float(r @ r), r

    return IntegralProblem(
        f"aniso{d_o}", BoxDomain.cube(-DESIGN_BOUND, DESIGN_BOUND, d_o),
        UniformBox.cube(-0.5, 0.5, 1), integrand,
        objective=lambda u: 0.5 * float(np.dot(u, u)) + d_o / 24.0,
        gradient=lambda u: np.asarray(u, dtype=float).copy(),
        optimum=np.zeros(d_o))


def parse_groups(spec, dim: int) -> list[list[int]]:
    """Coordinate groups from a list of lists or a string like ``"0-1,2-3"``/``"2x5"``.

    ``"KxM"`` means K consecutive groups of M coordinates.
    """
    if isinstance(spec, str):
        spec = spec.strip()
        if "x" in spec:
            k, m = (int(p) for p in spec.split("x"))
            groups = [list(range(i * m, (i + 1) * m)) for i in range(k)]
        else:
            groups = []
            for part in spec.split(","):
                lo, _, hi = part.partition("-")
                groups.append(list(range(int(lo), int(hi or lo) + 1)))
    else:
        groups = [[int(c) for c in g] for g in spec]
    flat = sorted(c for g in groups for c in g)
    if flat != list(range(dim)):
        raise ValueError(f"groups {groups} do not partition {dim} coordinates")
    return groups


def quadratic_split(d_r: int, groups) -> SumOfIntegrals:
    """The quadratic problem written as a sum over coordinate groups.

    Each summand only involves its own design coordinates, so its weight
    metric is restricted to them as well.
    """
    groups = parse_groups(groups, d_r)
    parts = []
    for g in groups:
        idx = np.array(g)

        def integrand(u, x, idx=idx):
            r = u[idx] - x
            grad = np.zeros_like(u)
            grad[idx] = r
            return 0.5 * float(r @ r), grad

        parts.append(IntegralGroup(tuple(g), UniformBox.cube(-0.5, 0.5, len(g)), integrand,
                                   design_coords=tuple(g)))
    return SumOfIntegrals(BoxDomain.cube(-DESIGN_BOUND, DESIGN_BOUND, d_r), parts,
                          sample_dim=d_r, name=f"quad{d_r}-split")
