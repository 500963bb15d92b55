"""Spectral simulator for higher-order Seiberg-Witten gradient flows on flat tori."""

__version__ = "0.1.0"

from .diagnostics import (  # noqa: E402
    ConcentrationReport,
    RescaleParams,
    blowup_sequence,
    classify_dimension,
    concentration_scan,
    lambda_scale,
    scaled_residual,
    scaling_exponent,
    spinor_bound_monitor,
    weighted_local_energy,
)
from .diffgeo import GaugePhase, coulomb_project, curvature, gauge_transform  # noqa: E402
from .flow import (  # noqa: E402
    FlowConfig,
    FlowState,
    InitSpec,
    Trajectory,
    deturck_rhs,
    deturck_to_flow,
    flow_rhs,
    residual_flow,
    run_flow,
    step_imex,
    step_rk4,
)
from .functional import (  # noqa: E402
    EnergyBreakdown,
    fd_gradient_check,
    grad_connection,
    grad_spinor,
    sw_energy,
    sw_energy_k,
)
from .grid import BumpWeight, Field, TorusGrid, make_grid  # noqa: E402
