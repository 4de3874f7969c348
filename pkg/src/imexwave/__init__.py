"""IMEX and Crank-Nicolson time integration for semilinear damped wave equations."""

from .fem import (
    DiscMesh,
    FEMatrices,
    KineticCoefficients,
    Mesh1D,
    assemble_dirichlet_1d,
    assemble_kinetic_bc,
    build_disc_mesh,
    build_interval_mesh,
    h_norm,
    interpolate,
    load_system_file,
    v_norm,
)
from .integrators import (
    Scheme,
    SchemeKind,
    StepReport,
    discrete_energy,
    integrate,
    step_cn,
    step_revised_imex,
    step_rk4,
    step_vanilla_imex,
    step_vanilla_imex_one_step_form,
)
from .sparse import SparseMatrix, read_matrix_market, solve, write_matrix_market
from .system import DampingCoefficient, SemidiscreteSystem, State, check_step_size, residual

__version__ = "0.1.0"
