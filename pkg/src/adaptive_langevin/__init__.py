"""Adaptive-timestep Langevin samplers with invariant-preserving time
rescaling.

A monitor function g(x) modulates the local stepsize of overdamped and
underdamped Langevin integrators.  Naive time rescaling biases the sampled
distribution; the transformed dynamics implemented here add an analytic
correction drift so the Gibbs measure is preserved exactly, while retaining
the stability benefit of small steps in stiff regions.
"""

from .core import (ESCAPE_RADIUS, EnsembleReport, PhaseState, SamplerConfig,
                   derive_stream, gaussian_init, run_ensemble, run_paths,
                   run_trajectory, sample_positions)
from .potentials import (PotentialModel, bayes_posterior, harmonic,
                         modified_harmonic, two_pathway)
from .monitor import (AuditError, AuditReport, MonitorFunction,
                      audit_criteria, constant_monitor, monitor_2d_channel,
                      monitor_bayes, monitor_from_scalar, monitor_g1,
                      monitor_g2, monitor_g3, psi, psi_prime)
from .overdamped import (AdjointAudit, EMIPStepper, EMRescaledStepper,
                         EMStepper, adjoint_stationarity_audit, em_ip_step,
                         em_rescaled_step, em_step, reweighted_average)
from .underdamped import (ADAPTIVE_SCHEMES, SchemeId, SplitStepRecord,
                          make_stepper, step_A_implicit, step_B_hat,
                          step_B_tilde, step_O_hat, step_O_tilde)
from .analysis import (ConvergenceTable, EscapeTable, ReferenceMoments,
                       SlopeFit, build_stepper, escape_rate, fit_weak_order,
                       gibbs_reference, histogram_l1, histogram_table,
                       weak_error_sweep)

__version__ = "0.1.0"

__all__ = [
    "ESCAPE_RADIUS", "EnsembleReport", "PhaseState", "SamplerConfig",
    "derive_stream", "gaussian_init", "run_ensemble", "run_paths",
    "run_trajectory", "sample_positions",
    "PotentialModel", "bayes_posterior", "harmonic", "modified_harmonic",
    "two_pathway",
    "AuditError", "AuditReport", "MonitorFunction", "audit_criteria",
    "constant_monitor", "monitor_2d_channel", "monitor_bayes",
    "monitor_from_scalar", "monitor_g1", "monitor_g2", "monitor_g3",
    "psi", "psi_prime",
    "AdjointAudit", "EMIPStepper", "EMRescaledStepper", "EMStepper",
    "adjoint_stationarity_audit", "em_ip_step", "em_rescaled_step", "em_step",
    "reweighted_average",
    "ADAPTIVE_SCHEMES", "SchemeId", "SplitStepRecord", "make_stepper",
    "step_A_implicit", "step_B_hat", "step_B_tilde", "step_O_hat",
    "step_O_tilde",
    "ConvergenceTable", "EscapeTable", "ReferenceMoments", "SlopeFit",
    "build_stepper", "escape_rate", "fit_weak_order", "gibbs_reference",
    "histogram_l1", "histogram_table", "weak_error_sweep",
    "__version__",
]
