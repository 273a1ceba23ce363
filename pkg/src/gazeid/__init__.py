"""User identification from eye-tracking gaze trajectories."""

from .analysis import (
    DurationSummaryRow,
    FeatureRanking,
    anova_f,
    duration_summary,
    rank_features,
)
from .evaluation import (
    ExperimentConfig,
    ExperimentResult,
    SessionScore,
    derivative_sweep,
    fragment_sweep,
    fuse,
    identify_once,
    prepare_features,
    run_experiment,
    run_identification,
    session_score,
)
from .features import (
    DerivativeLevel,
    FeatureMatrix,
    ZScoreParams,
    extract_features,
    feature_names,
    forward_diff,
    m3s2k,
    zscore_apply,
    zscore_fit,
)
from .gaze_data import (
    FRAGMENT_GRID_S,
    Dataset,
    GazeSample,
    Recording,
    Trajectory,
    ValidationError,
    cut_fragment,
    load_dataset,
    resample,
    resample_dataset,
)
from .preprocess import SgConfig, savgol_coefficients, smooth
from .rbfn import (
    RbfnConfig,
    RbfnModel,
    load_model,
    rbfn_predict_proba,
    rbfn_train,
    save_model,
)
from .segmentation import (
    FIXATION,
    SACCADE,
    IvtConfig,
    Segment,
    SegmentedTrajectory,
    angular_velocity,
    ivt_segment,
    vt_sweep,
)
from .synthgen import SynthConfig, UserProfile, generate, generate_with_truth, write_dataset

__version__ = "0.1.0"
