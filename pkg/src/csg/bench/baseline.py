"""Projected full-gradient descent on a prediscretised paint objective.

Fixing the quadrature grid before optimising turns the objective into a
finite sum whose landscape can have flat pieces and stationary points that
the true objective does not have. This baseline makes that visible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..color.paint import PaintModel, projected_gradient

#: reference-gradient threshold separating good from wrong terminal designs
WRONG_DESIGN_THRESHOLD = 0.05


@dataclass(frozen=True, eq=False)
class BaselineResult:
    """Terminal state of each start (rows align with ``starts``)."""

    grid: tuple
    starts: np.ndarray
    final: np.ndarray
    iterations: np.ndarray
    grid_gradient_norm: np.ndarray
    grid_objective: np.ndarray
    reference_gradient_norm: np.ndarray | None = None
    reference_objective: np.ndarray | None = None

    @property
    def converged(self) -> np.ndarray:
        return self.grid_gradient_norm < 1e-6

    def wrong_designs(self, threshold: float = WRONG_DESIGN_THRESHOLD) -> np.ndarray:
        if self.reference_gradient_norm is None:
            raise LookupError("reference gradients were not evaluated")
        return self.reference_gradient_norm > threshold

    def rows(self):
        for i in range(self.starts.shape[0]):
            row = {"start": i, "R0": self.starts[i, 0], "d0": self.starts[i, 1],
                   "R": self.final[i, 0], "d": self.final[i, 1],
                   "iterations": int(self.iterations[i]),
                   "grid_objective": self.grid_objective[i],
                   "grid_gradient_norm": self.grid_gradient_norm[i]}
            if self.reference_gradient_norm is not None:
                row["reference_objective"] = self.reference_objective[i]
                row["reference_gradient_norm"] = self.reference_gradient_norm[i]
            yield row


def full_grid_baseline(model: PaintModel, grid, starts, step: float = 0.5,
                       tol: float = 1e-6, max_iter: int = 5000,
                       reference: bool = True) -> BaselineResult:
    """Projected gradient descent ``u <- clip(u - step * grad)`` on the ``grid`` quadrature.

    All starts advance together (vectorised); a start stops once its
    projected grid gradient drops below ``tol`` or after ``max_iter`` steps.
    With ``reference`` the terminal designs are re-evaluated on the fine
    reference quadrature. ``model`` only needs ``box``,
    ``quadrature(U, grid)`` and ``reference(U)`` (batched over rows of
    ``U``), so other discretised objectives work too.
    """
    grid = tuple(int(g) for g in grid)
    if len(grid) != 3 or min(grid) < 1:
        raise ValueError("grid needs three counts >= 1")
    if step <= 0:
        raise ValueError("step must be positive")
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    box = model.box
    U = box.clip(starts)
    k = U.shape[0]
    its = np.full(k, max_iter)
    active = np.arange(k)
    for it in range(max_iter + 1):
        if active.size == 0:
            break
        _, g, _ = model.quadrature(U[active], grid)
        pg = np.linalg.norm(projected_gradient(U[active], g, box), axis=1)
        done = pg < tol
        its[active[done]] = it
        if it == max_iter:
            break
        active, g = active[~done], g[~done]
        U[active] = box.clip(U[active] - step * g)
    J, g, _ = model.quadrature(U, grid)
    gnorm = np.linalg.norm(projected_gradient(U, g, box), axis=1)
    ref_g = ref_J = None
    if reference:
        ref_J, rg, _ = model.reference(U)
        ref_g = np.linalg.norm(projected_gradient(U, rg, box), axis=1)
    return BaselineResult(grid, starts, U, its, gnorm, np.asarray(J), ref_g, ref_J)
