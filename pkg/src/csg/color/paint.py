"""Paint-film colour design: core-shell particles, maximise (c_L L + c_a a).

Design ``u = (R, d)``: core radius and shell thickness in nm. Particle
sizes scatter around the design with relative perturbations
``eta = (eta_R, eta_d)``, each a normal with sd 0.1 truncated at 3 sd, so
the particle is ``(R (1 + eta_R), d (1 + eta_d))`` and the measure of
``eta`` does not depend on the design.

    inner(u, lam, eta)  = (Abs, Sca (1 - Geo))               -> averaged (K, S)
    outer(u, lam, K, S) = k |Lambda| cmf(lam) * saunderson(R_inf(K, S))
    transform(X, Y, Z)  = -(c_L L + c_a a)                    (minimised)

where ``lam`` is uniform on [400, 700] nm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..composite import NestedObjective
from ..measures import (BoxDomain, IntervalDomain, PointMass, QuadratureRule,
                        TruncatedNormal, UniformBox, equal_mass_nodes, uniform_grid)
from .cielab import WHITE_POINT, lab_from_xyz
from .cmf import CmfTable, default_cmf
from .kubelka import SaundersonParams, km_reflectance, saunderson
from .optics import D_RANGE, LAMBDA_RANGE, R_RANGE, SurrogateOptics

PAINT_BOX = BoxDomain([R_RANGE[0], D_RANGE[0]], [R_RANGE[1], D_RANGE[1]])
LAMBDA = IntervalDomain(*LAMBDA_RANGE)
REFERENCE_GRID = (200, 64, 64)


@dataclass(frozen=True, eq=False)
class PaintModel:
    """All physical ingredients of the paint objective."""

    cmf: CmfTable = field(default_factory=default_cmf)
    optics: object = field(default_factory=SurrogateOptics)
    surface: SaundersonParams = SaundersonParams()
    white: np.ndarray = field(default_factory=lambda: WHITE_POINT.copy())
    c_L: float = 1.0 / 20.0
    c_a: float = 19.0 / 20.0
    rel_sd: float = 0.1
    radius: float = 3.0

    def __post_init__(self):
        if abs(self.c_L + self.c_a - 1.0) > 1e-12:
            raise ValueError("c_L + c_a must equal 1")
        if self.rel_sd < 0:
            raise ValueError("relative sd must be nonnegative")

    @property
    def box(self) -> BoxDomain:
        return PAINT_BOX

    @property
    def eta_measure(self):
        if self.rel_sd == 0:
            return PointMass(np.zeros(2))
        return TruncatedNormal(np.zeros(2), np.full(2, self.rel_sd), self.radius)

    @property
    def lambda_measure(self) -> UniformBox:
        return UniformBox(BoxDomain([LAMBDA.lo], [LAMBDA.hi]))

    @property
    def xyz_scale(self) -> float:
        return self.cmf.normalization() * LAMBDA.width

    # -- integrands (broadcasting over leading axes) -------------------------

    def inner(self, u, lam, eta):
        """``(K, S)`` contributions and their design Jacobian ``(..., 2, 2)``."""
        u = np.asarray(u, dtype=float)
        eta = np.asarray(eta, dtype=float)
        lam = np.asarray(lam, dtype=float)
        scale = 1.0 + eta
        o = self.optics(u[..., 0] * scale[..., 0], u[..., 1] * scale[..., 1], lam)
        K = o.abs
        S = o.sca * (1.0 - o.geo)
        dK = o.d_abs
        dS = o.d_sca * (1.0 - o.geo)[..., None] - o.sca[..., None] * o.d_geo
        # particle size = design * (1 + eta)
        dK = dK * scale
        dS = dS * scale
        return np.stack([K, S], axis=-1), np.stack([dK, dS], axis=-2)

    def outer(self, u, lam, v):
        """Tristimulus contribution, design partial (zero) and ``d/d(K, S)``."""
        v = np.asarray(v, dtype=float)
        R, dR_dK, dR_dS = km_reflectance(v[..., 0], v[..., 1])
        corr, dcorr = saunderson(R, self.surface)
        cm = self.xyz_scale * self.cmf(lam)
        value = cm * corr[..., None]
        d_v = cm[..., :, None] * (dcorr[..., None] * np.stack([dR_dK, dR_dS], axis=-1))[..., None, :]
        d_u = np.zeros(value.shape + (2,))
        return value, d_u, d_v

    def transform(self, xyz):
        """``-(c_L L + c_a a)`` and its gradient in ``(X, Y, Z)``."""
        lab, jac = lab_from_xyz(xyz, self.white)
        c = np.array([self.c_L, self.c_a, 0.0])
        return -float(c @ lab), -(c @ jac)

    def lab(self, xyz):
        return lab_from_xyz(xyz, self.white)[0]

    # -- nested objective for CSG ------------------------------------------

    def objective(self) -> NestedObjective:
        lam_measure = self.lambda_measure

        def outer(u, x1, v):
            return self.outer(u, x1[0], v)

        def inner(u, x1, x2):
            return self.inner(u, x1[0], x2)

        return NestedObjective(PAINT_BOX, lam_measure, outer, self.eta_measure, inner,
                               self.transform, name="paint")

    # -- deterministic quadrature ------------------------------------------

    def lambda_rule(self, n: int) -> QuadratureRule:
        return uniform_grid(LAMBDA, n)

    def eta_rule(self, n_R: int, n_d: int) -> QuadratureRule:
        if self.rel_sd == 0:
            return QuadratureRule(np.zeros((1, 2)), np.ones(1))
        return QuadratureRule.tensor([
            equal_mass_nodes(0.0, self.rel_sd, n_R, self.radius),
            equal_mass_nodes(0.0, self.rel_sd, n_d, self.radius)])

    def quadrature(self, u, grid=REFERENCE_GRID):
        """Objective and gradient with fixed rules on ``Lambda`` and ``eta``.

        ``grid = (n_Lambda, n_R, n_d)``: midpoint rule on the wavelengths and
        equal-mass nodes for both relative perturbations. Relative nodes
        times the design are exactly the equal-mass nodes of
        ``N(R, R/10)``/``N(d, d/10)``, so this is the design-centred
        discretisation.

        ``u`` may also be a stack of designs ``(B, 2)``; the outputs then
        gain the leading axis.

        Returns
        -------
        J : float
        grad : (2,) array
        xyz : (3,) array
        """
        u = np.asarray(u, dtype=float)
        if u.ndim == 2 and u.shape[0] * np.prod(grid) > 2e6:
            # one design at a time keeps memory bounded on fine grids
            out = [self.quadrature(ui, grid) for ui in u]
            return (np.array([o[0] for o in out]), np.stack([o[1] for o in out]),
                    np.stack([o[2] for o in out]))
        n_lam, n_R, n_d = grid
        lr = self.lambda_rule(n_lam)
        er = self.eta_rule(n_R, n_d)
        batch = u.shape[:-1]
        ub = u.reshape(batch + (1, 1, 2))
        lam = lr.nodes[:, 0][:, None]                          # (L, 1)
        val, jac = self.inner(ub, lam, er.nodes[None, :, :])   # (..., L, E, 2), (..., L, E, 2, 2)
        v_bar = np.einsum("e,...ek->...k", er.masses, val)
        g_bar = np.einsum("e,...ekj->...kj", er.masses, jac)
        f1, d_u, d_v = self.outer(None, lr.nodes[:, 0], v_bar)  # (..., L, 3), (..., L, 3, 2)
        xyz = np.einsum("l,...lc->...c", lr.masses, f1)
        dxyz = np.einsum("l,...lck->...ck", lr.masses, d_u + d_v @ g_bar)
        if not batch:
            J, dphi = self.transform(xyz)
            return J, dphi @ dxyz, xyz
        Js = np.empty(batch)
        grads = np.empty(batch + (2,))
        for i in np.ndindex(*batch):
            J, dphi = self.transform(xyz[i])
            Js[i] = J
            grads[i] = dphi @ dxyz[i]
        return Js, grads, xyz

    def reference(self, u):
        """Fine quadrature used as the ground truth (200 x 64 x 64 nodes)."""
        return self.quadrature(u, REFERENCE_GRID)


def projected_gradient(u, grad, box: BoxDomain = PAINT_BOX) -> np.ndarray:
    """Stationarity residual ``u - clip(u - grad)`` of the box-constrained problem.

    Equals the gradient in the interior; at an active bound only the
    component pointing into the box survives.
    """
    u = np.asarray(u, dtype=float)
    return u - box.clip(u - np.asarray(grad, dtype=float))


def paint_objective(c_L: float = 1.0 / 20.0, c_a: float = 19.0 / 20.0,
                    **kwargs) -> NestedObjective:
    return PaintModel(c_L=c_L, c_a=c_a, **kwargs).objective()
