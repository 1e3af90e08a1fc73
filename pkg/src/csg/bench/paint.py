"""CSG runs on the paint objective and their reference-quadrature assessment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..color.paint import PaintModel, projected_gradient
from ..composite import NestedConfig, run_nested
from ..core import Trajectory

# tuned on the surrogate optics: the objective is very flat (Hessian
# eigenvalues ~1e-3..2e-2) so the step is large, and eta lives on a scale
# 1/50 of nanometres, hence its large metric coefficient
PAINT_TAU = 10.0
PAINT_C_U = 1.0
PAINT_C_LAMBDA = 0.25
PAINT_C_ETA = 50.0


def paint_config(iterations: int = 2000, tau: float = PAINT_TAU, u0=None, seed=0,
                 c_u: float = PAINT_C_U, c_lambda: float = PAINT_C_LAMBDA,
                 c_eta: float = PAINT_C_ETA, scheme: str = "empirical",
                 inner_scheme: str = "empirical", resolution=None,
                 monitor: str = "none", **kw) -> NestedConfig:
    return NestedConfig(tau=tau, iterations=iterations, u0=u0, seed=seed, scheme=scheme,
                        resolution=resolution, inner_scheme=inner_scheme, monitor=monitor,
                        c_u=c_u, c_outer=c_lambda, c_inner=c_eta, **kw)


@dataclass(frozen=True, eq=False)
class PaintRun:
    trajectory: Trajectory
    reference_objective: float
    reference_gradient_norm: float

    @property
    def final(self) -> np.ndarray:
        return self.trajectory.final


def optimize_paint(model: PaintModel | None = None, config: NestedConfig | None = None,
                   reference: bool = True) -> PaintRun:
    """One CSG run on the paint objective, optionally checked on the fine quadrature.

    The reported gradient norm is the projected one, so designs resting on
    an active bound with the gradient pointing outwards count as stationary.
    """
    model = model or PaintModel()
    config = config or paint_config()
    traj = run_nested(model.objective(), config)
    J = gn = np.nan
    if reference:
        J, g, _ = model.reference(traj.final)
        gn = float(np.linalg.norm(projected_gradient(traj.final, g)))
    return PaintRun(traj, float(J), gn)
