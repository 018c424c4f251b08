"""Insect sound classification pipeline.

Windowed instance extraction from annotated recordings, pitch/speed
augmentation, MFCC features, five classifiers with a uniform surface,
leave-one-clip-out evaluation, and exact t-SNE diagnostics.
"""

__version__ = "0.1.0"

from .audio_io import (
    AudioClip,
    Augmentation,
    InstanceName,
    format_instance_name,
    load_wav,
    pad_to_length,
    parse_instance_name,
    resample,
    write_wav,
)
from .segmentation import (
    CLASS_NAMES,
    DurationStats,
    Instance,
    SegmentSpan,
    duration_stats,
    duration_to_samples,
    extract_instances,
    min_segment_duration,
    window_segment,
)
from .augmentation import (
    AugmentationSpec,
    augment,
    pitch_shift,
    preset_narrow,
    preset_wide,
    time_stretch,
)
from .features import (
    Dataset,
    FeatureRanking,
    MfccConfig,
    aggregate,
    build_dataset,
    importance_sum,
    mel_filterbank,
    mfcc,
    rank_features,
    select_top_k,
)
from .classifiers import (
    ForestParams,
    GbtParams,
    KnnParams,
    SvmParams,
    TreeParams,
    load_model,
    save_model,
    train_decision_tree,
    train_gbt,
    train_knn,
    train_random_forest,
    train_svm_rbf,
)
from .evaluation import (
    ConfusionMatrix,
    ExperimentReport,
    FoldSpec,
    accuracy,
    balance,
    confusion_matrix,
    make_loco_folds,
    make_random_split,
    run_experiment,
)
from .projection import TsneParams, embedding_report, perplexity_affinities, tsne
from .config import RunConfig
from .manifest import Manifest, ManifestEntry, load_manifest, write_manifest
from .store import InstanceStore, build_store, load_store, save_store
from .synth import generate_fixture
