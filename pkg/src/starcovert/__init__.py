"""Covert-rate maximization for STAR-RIS assisted NOMA downlinks with a radiometer warden."""
from .detection import WardenObservables, covert_lambda_bound, dep, min_dep, optimal_threshold
from .errors import (DomainError, ExtractionRefused, InfeasibleError, InfeasibleInstance,
                     InvalidParameterError, SolverError)
from .harness import ResultRow, SweepSpec, emit_csv, emit_plot, read_csv, run_sweep
from .noma import PowerSplit, RateTriple, StarBeamformer, effective_gain, rates
from .optimizer import AlgorithmConfig, Solution, audit, init_beamformer, optimize, optimize_baseline
from .power_alloc import PowerSubproblemInputs, allocate_power
from .system_model import (ChannelSet, NoiseModel, SystemParams, default_noise, default_system,
                           load_config, sample_channels, trial_seed)

__version__ = "0.1.0"
