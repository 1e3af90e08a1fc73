"""Continuous stochastic gradient optimisation with nearest-record weights."""

from .core import (CSGConfig, IntegralProblem, Trajectory, csg_step,
                   estimate_gradient, estimate_objective, run_csg)
from .history import Block, History, ProductMetric, SampleRecord, product_distance
from .measures import (BoxDomain, IntervalDomain, PointMass, QuadratureRule,
                       TruncatedNormal, UniformBox)
from .weights import (WeightScheme, empirical_weights, exact_weights_grid,
                      mc_weights, nearest_index)

__version__ = "0.1.0"
