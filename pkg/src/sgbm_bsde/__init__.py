"""Stochastic Grid Bundling Method for decoupled forward-backward SDEs."""

from .basis import BasisSpec, CondExpectation, cond_expect, eval_basis
from .bundling import BundleAssignment, BundleRegression, check_acceptance, make_bundles, regress_bundle
from .forward import (ForwardModel, PathCloud, TimeGrid, brownian, cholesky, euler_gbm, euler_model,
                      exact_gbm, simulate_cloud)
from .oracles import example1_exact, geometric_basket_put
from .solver import BsdeProblem, SchemeConfig, SolverResult, backward_step, solve, solve_cloud, terminal_values

__version__ = "0.1.0"
