"""Numerical toolkit for spectral inequalities and null-control of fractional heat flows on flat tori."""

__version__ = "0.1.0"

from .calculus import (
    ContourSpec,
    PowerOperator,
    contour_power,
    parameter_ellipticity_check,
    product_operator_inverse,
    resolvent,
    spectral_power,
)
from .config import ExperimentConfig, load_config, validate_config
from .control import (
    ControlProblem,
    control_cost,
    cost_curve,
    hum_control,
    lr_iterative_control,
    miller_gate,
    observability_gramian,
)
from .errors import LabError
from .inequality import (
    WavePacket,
    doubling_report,
    interpolation_search,
    observability_constant,
    observability_report,
    symmetry_check,
)
from .lattice import DilatedTorus, FourierLattice, Subdomain, dilated_eigendata
from .psi import build_psi, verify_psi
from .spectral import EllipticOperator, SpectralBasis, assemble_operator, eigendata, laplacian_symbol, variable_symbol
from .toroidal import ToroidalSymbol, cv_bound, galerkin_matrix, quantize, seminorm

__all__ = [name for name in dir() if not name.startswith("_") and name not in {"annotations"}]
