"""Unsupervised cross-modal hashing over precomputed feature vectors.

The pipeline mines an instance similarity structure from energy distances
between per-sample view sets, trains modality-specific hashing networks
with collaborative consistency objectives, and serves bit-packed Hamming
retrieval with full MAP/curve evaluation.
"""

from .errors import (
    ConfigError,
    ContractViolationError,
    CrosshashError,
    DegenerateInputError,
    LabelError,
    StoreFormatError,
    TrainingDivergedError,
    ZeroNormError,
)
from .evaluation import (
    DirectionReport,
    EvalReport,
    average_precision,
    evaluate,
    evaluate_pair,
    relevant,
    report_json,
    write_report,
)
from .network import (
    HashNetParams,
    RelaxedBatch,
    TrainConfig,
    forward,
    gradient_check,
    init_params,
    load_params,
    loss_cooccurrence,
    loss_guided,
    loss_retrieval,
    retrieval_consistency,
    retrieval_distributions,
    save_params,
    sharpen,
    total_loss,
    train,
    write_loss_trace,
)
from .retrieval import (
    BinaryCodebook,
    RankedList,
    binarize,
    hamming,
    load_codebook,
    pack_bits,
    rank_all,
    rank_database,
    save_codebook,
    unpack_bits,
)
from .store import (
    FeatureStore,
    SynthConfig,
    generate_synthetic,
    load_feature_store,
    make_store,
    split_store,
    write_feature_store,
)
from .structure import (
    DivergenceMatrix,
    SimilarityStructure,
    build_structure,
    cos_dist,
    cos_sim,
    divergence_matrix,
    energy_statistic,
    load_structure,
    mine_structure,
    modality_similarities,
    save_structure,
)

__version__ = "0.1.0"
