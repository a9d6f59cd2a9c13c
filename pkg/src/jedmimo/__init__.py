"""Joint massive-MIMO channel estimation and data detection.

Samples the joint posterior over the channel matrix and the transmitted
QAM symbols with a doubly annealed Langevin dynamic, and benchmarks it
against classical pilot-based estimators and perfect-CSI detectors.
"""

from ._backend import backend_name
from .baselines import (
    TrialOutcome,
    lmmse_channel_estimate,
    ls_channel_estimate,
    ml_detect_bruteforce,
    mmse_detect,
    nmse,
    ser,
)
from .constellation import Constellation, hard_decision, make_constellation
from .errors import (
    CapacityError,
    ConfigurationError,
    ContractError,
    DivergenceError,
    FormatError,
    JedError,
    NumericalError,
    RankError,
    ShapeError,
    UndefinedResultError,
)
from .experiment import ExperimentSpec, run_experiment, run_trial
from .model import (
    IidGaussianChannel,
    KroneckerChannel,
    SystemDims,
    complex_normal,
    exponential_correlation,
    forward,
    sample_channel,
    sample_symbols,
    sigma0_from_snr,
)
from .sampler import (
    AnnealingSchedule,
    JedConfig,
    JedResult,
    init_iterates,
    make_config,
    preset_name_for_snr,
    run_jed,
    step_size_at_level,
)
from .scores import (
    ChannelPrior,
    GaussianChannelPrior,
    LearnedChannelPrior,
    NoiseLevelState,
    denoiser_expectation,
    joint_posterior_scores,
    likelihood_score_channel,
    likelihood_score_symbols,
    prior_score_channel,
    prior_score_symbols,
)
from .weights import ScoreModelWeights, evaluate_score_network, load_score_weights, save_score_weights

__version__ = "0.1.0"
