"""First-swing stability toolkit for droop-controlled inverter networks.

Simulates multi-machine swing dynamics (full and droop-only reduced
models), solves and classifies equilibria, evaluates a quadratic
region-of-attraction certificate with its pairwise validity box, and
runs fault scenarios with verdicts, critical-clearing-time search and
time-constant sweeps.
"""

from .backend import active_backend
from .certificate import (BoxStatus, CertificateSample, TimescaleReport,
                          certificate_trace, in_uep_box, lyapunov_rate,
                          lyapunov_value, timescale_ratio)
from .dynamics import (FULL, REDUCED, IntegratorConfig, SwitchSchedule,
                       SystemState, TrajectoryRecord, full_rhs, integrate,
                       reduced_jacobian, reduced_rhs, total_energy)
from .eac import (NoCriticalAngle, SmibCase, clearing_time_for_angle,
                  critical_clearing_angle, eac_curve_dataset, extended_boundary,
                  smib_equilibria, smib_model)
from .equilibria import (EquilibriumPoint, classify_equilibrium,
                         deflated_spectrum, seed_ueps, solve_equilibrium,
                         synchronous_offset)
from .errors import (BracketError, CertificateError, ConnectivityError,
                     ConvergenceError, FrameError, NoEquilibriumError,
                     ReductionError, SwingcertError, ValidationError)
from .network import (Branch, Bus, NetworkModel, build_network, coupled_pairs,
                      kron_reduce, sync_coefficients)
from .scenarios import (FaultScenario, ScenarioResult, StabilityVerdict,
                        SweepRow, VerdictThresholds, bus_fault_scenario,
                        cct_search, classify_stability, line_fault_scenario,
                        local_fault, paper_case_models, ring3, run_scenario,
                        tau_sweep, tie_fault, two_area_surrogate)

__version__ = "0.1.0"
