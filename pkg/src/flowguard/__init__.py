"""flowguard: anomaly traffic detection for IoT flow records.

Three phases behind one pipeline: robust preprocessing (imputation, one-hot
encoding, SMOTE balancing, attack-ratio resampling), genetic feature
selection with eagle-style refinement moves guided by a robust CDF-distance
feature score, and a decision-tree / random-forest / boosted-trees voting
classifier whose knobs an annealed swarm search can tune.
"""

from .boosting import GradientBoostedTrees
from .ensemble import (
    Hyperparameters,
    ModelArtifact,
    VotingEnsemble,
    hard_vote,
    load_model,
    predict_ensemble,
    save_model,
    soft_vote,
)
from .errors import (
    EmptyDataError,
    FlowGuardError,
    InsufficientDataError,
    ParameterError,
    ResampleError,
    SchemaError,
    StratificationError,
    UnimputableColumnError,
)
from .featstats import FeatureScore, MadKsConfig, MadKsSelector, mad_ks_score, prefilter, score_features
from .flowdata import (
    ColumnSpec,
    FlowDataset,
    SchemaMapping,
    load_csv,
    split_train_test,
    synth_generate,
    write_csv,
)
from .harness import (
    DatasetSource,
    ExperimentConfig,
    PipelineConfig,
    PreprocessOptions,
    RunReport,
    compare_voting,
    cross_validate,
    run_pipeline,
    sweep_detection_rate,
    synthetic_benchmark,
)
from .metrics import (
    ConfusionMatrix,
    CvSummary,
    MetricsReport,
    compute_metrics,
    confusion,
    evaluate_predictions,
    kfold_cv,
)
from .preprocess import (
    EncoderState,
    PreprocessReport,
    drop_sparse_rows,
    encode_categorical,
    impute,
    resample_to_attack_ratio,
    smote_balance,
)
from .selector import (
    EagleGaState,
    EagleGeneticSelector,
    EagleParams,
    GaParams,
    eagle_select,
    eagle_spiral,
    eagle_swoop,
    select_features,
    subset_fitness,
)
from .trees import DecisionTree, RandomForest, TreeNode, entropy
from .tuner import ParamSpace, SaParams, dragonfly_step, sa_accept, sa_fitness, tune

__version__ = "0.1.0"
