"""Structure learning of tree-structured Gaussian graphical models.

Build tree models, learn their structure with Chow-Liu, and compute exact and
approximate error exponents for the learning problem.
"""

__version__ = "0.1.0"

from .approx_rate import RHO_CRIT, approx_rate_closed_form, approx_rate_snr, edge_weight, rho_crit
from .chow_liu import learn_structure, structures_equal
from .empirical import EmpiricalMoments, SampleBatch, empirical_covariance, empirical_mi, sample
from .errors import *  # noqa: F401,F403
from .exact_rate import (
    CrossoverProblem,
    RateResult,
    SolverOptions,
    crossover_problem,
    exact_error_exponent,
    solve_crossover_rate,
)
from .exponent import ExponentReport, approx_exponent
from .extremal import (
    TreeEnumeration,
    attach_edge,
    best_attachment,
    make_chain,
    make_hybrid,
    make_star,
    subtree_exponent_check,
    verify_extremal,
    worst_attachment,
)
from .model import (
    GaussianTreeModel,
    TreeStructure,
    build_model,
    line_graph,
    load_model,
    marginalize,
    model_from_edges,
    mutual_information,
    save_model,
)
from .simulate import ErrorCurve, error_curve, estimate_error_probability, fig5_experiment
