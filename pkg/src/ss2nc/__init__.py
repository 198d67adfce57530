"""Step-search negative curvature methods with probabilistic oracles.

The core pieces are importable from the package root::

    from ss2nc import rosenbrock_2d, OracleConfig, SolverParams, RngStream, run_ss2_nc_g

    p = rosenbrock_2d()
    res = run_ss2_nc_g(p, OracleConfig(eps_f=1e-3), SolverParams(e_f=2e-3),
                       p.default_start, RngStream(0))
"""
from .directions import CGKind, CGOutcome, EigenResult, NCDirection, capped_cg, min_eigenpair, nc_direction
from .errors import (ConfigError, DivergenceError, InfeasibleParametersError,
                     InvalidDimensionError, NoNegativeCurvatureError, NumericInputError)
from .oracles import OracleConfig, OracleTruth, RngStream, ZerothModel, sample_f, sample_g, sample_H
from .problems import ProblemSpec, get_problem, rosenbrock_2d, rosenbrock_nd, saddle_quartic
from .solver import (IterationRecord, Method, RunResult, SolverParams, Status, replay_step_sizes,
                     run_method, run_ss2_nc_g, run_ss_g, run_ss_nc_cg)
from .theory import (TheoryConstants, alpha_bar, beta_bar, compute_constants, kappa_g_prime,
                     lemma_audit, stopping_time, tail_estimate, validate_params)

__version__ = "0.1.0"
