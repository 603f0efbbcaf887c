"""Duality-based 2D finite elements for the optimal insulation problem.

The package discretizes the dual of the nonsmooth, nonlocal insulation
energy on lowest-order Raviart-Thomas elements, solves the resulting
max-norm-constrained quadratic program with a primal-dual active-set
semi-smooth Newton method, reconstructs the Crouzeix-Raviart primal
solution in closed form, and certifies errors through exact primal-dual
gap identities inside uniform and adaptive refinement loops.
"""

from .assembly import ProblemData, assemble, check_compatibility
from .functionals import (
    GapReport,
    conforming_gap_report,
    continuous_dual_energy,
    continuous_primal_energy,
    discrete_dual_energy,
    discrete_primal_energy,
    distribution,
    eoc,
    gap_report,
    strong_convexity_measures,
)
from .mesh import (
    Triangulation,
    build_mesh,
    generate_annulus,
    generate_lshape,
    read_mesh,
    refine_nvb,
    uniform_refine,
    write_mesh,
)
from .solver import marini_reconstruct, solve_dual, verify_kkt
from .spaces import (
    CRFunction,
    P1Function,
    RT0Function,
    cr_gradient,
    cr_interpolate,
    node_average,
    rt_divergence,
    rt_interpolate,
    rt_piecewise_average,
)

__version__ = "0.1.0"
