"""Quasi-concave minimisation over polyhedra via vector linear programming."""

from .errors import (AssumptionError, ContractError, EmptyPolyhedronError,
                     GeometricDualityError, LpFailure, NonSolidConeError, NotPointedError,
                     QcpError)
from .lifting import lift_problem, naive_lifting, project_back
from .lp import (HighsBackend, LinearProgram, LpSolution, LpStatus, SimplexSolver,
                 default_backend, set_default_backend, solve_lp)
from .polyhedra import (HPolyhedron, OuterApprox, PolyCone, PPolyhedron, VPolyhedron,
                        add_halfspace, dd_convert, positive_dual)
from .problems import (DcInstance, LmpInstance, gen_cqp_random, gen_lmp_random, make_boundary_problem,
                       make_cqp, make_dc_dual, make_dc_primal, make_example_41, make_example_61,
                       make_example_73, make_lmp, neg_conjugate_quadratic, polyhedral_conjugate,
                       sin_floor_matrix)
from .qcp import Objective, QcpModel, QcpProblem, QcpResult, solve_dual_qcp, solve_primal_qcp
from .runner import oracle_value, solve, solve_vlp
from .scalarization import VlpProblem, solve_p1_d1, solve_p2_d2
from .vlp import benson_dual, benson_primal, geometric_duality_check

__version__ = "0.1.0"
