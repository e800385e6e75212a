"""Site-by-site coupling experiments for critical triangular-lattice percolation."""

from .configuration import BLACK, UNREVEALED, WHITE, EpsEvent, PartialConfig, full_random, compatible_with_arm
from .connectivity import connected, dual_arm, one_arm, white_reachable_unrevealed
from .coupling import CouplingOutcome, ExplorationState, UniformField, extract_circuit, next_site, reveal_step, run_coupling
from .errors import (
    CapacityExceeded,
    CircuitInvariantViolation,
    DegenerateFit,
    Exhausted,
    IncompatibleConditioning,
    NotACircuit,
    RetryLimitExceeded,
)
from .estimator import ArmStats, ExponentFit, TvReport, empirical_tv, estimate_arm, exact_tv, fit_exponent
from .lattice import Ball, Circuit, ball, circles_around, graph_distance, neighbors, ring_sites, verify_circuit
from .oracle import (
    CondProb,
    CondQuery,
    MarginalTable,
    OracleBackend,
    cond_prob,
    exact_conditioned_marginal,
    exact_dual_arm_prob,
    exact_one_arm_prob,
    sample_conditioned_rejection,
)

__version__ = "0.1.0"
