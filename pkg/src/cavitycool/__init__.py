"""Free-electron cooling of a thermal cavity mode by post-selected conditional displacements."""
from .errors import (DegenerateSelection, PositivityError, RegimeWarning, SimulationError,
                     TruncationError, TruncationWarning)
from .fock import (FockSpace, annihilation, creation, displacement, expectation, number,
                   recommended_dim)
from .lindblad import BathSpec, DriftPropagator, IntegratorSpec, evolve
from .protocol import (CoolingTrace, ProtocolConfig, StableMetrics, TraceEvent, apply_ocb,
                       apply_postselected, joint_cd_matrix, kraus_minus, kraus_plus, ocb_kraus,
                       ocb_phases, run_cooling, stable_metrics)
from .states import (DensityMatrix, WignerGrid, mean_photons, nbar_from_temperature,
                     temperature_from_nbar, thermal_state, thermal_wigner_value, trace_distance,
                     wigner)
from .sweep import SweepConfig, SweepResult, default_sweep_config, run_sweep

__version__ = "0.1.0"
