"""Frequency-domain simulator and noise-budget engine for squeezed-light
assisted laser phase-noise stabilization loops."""

from .budget import (
    BudgetEntry,
    EnhancementLedger,
    LedgerStages,
    coupling_fraction_total,
    enhancement_after_coupling,
    ledger_chain,
    total_efficiency,
    total_phase_fluctuation,
)
from .errors import ConfigError, LoopInstabilityWarning, SingularityError
from .loop import (
    DetectionParams,
    NoiseFloors,
    ServoModel,
    cross_cavity_normalization,
    freq_noise_from_phase,
    inloop_rin2,
    outofloop_rin2_closed,
    outofloop_rin2_open,
    phase_noise_from_freq,
    servo_gain,
    shot_noise_rsn2,
    suppression_factor,
)
from .optics import (
    BeamSplitter,
    CavityParams,
    QuadratureVariances,
    SqueezerParams,
    apply_loss,
    apply_phase_jitter,
    couple_at_bs,
    detected_inloop_variance,
    detected_squeezing,
    rotation_angle,
)
from .report import export_budget, export_traces, load_traces, traces_to_csv, traces_to_json_dict
from .scenario import (
    BudgetReport,
    EchoEntry,
    FloorSpec,
    PowerLawSegment,
    ScenarioConfig,
    ScenarioResult,
    TraceSet,
    build_budget_report,
    config_from_mapping,
    floor_level_db,
    load_config,
    run_scenario,
    synthesize_floor,
    with_grid_override,
)
from .spectra import (
    FrequencyGrid,
    Spectrum,
    Unit,
    db_from_linear,
    linear_from_db,
    log_spaced_grid,
    uncorrelated_sum,
)

__version__ = "0.1.0"
