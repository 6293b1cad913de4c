"""changeclass: cluster-assisted classification of source code changes.

Pipeline: parse version-control diffs into edit scripts, compute an
11-metric vector per change, cluster the vectors with cosine k-means,
label a few representatives per cluster, map clusters to classes by
plurality, classify the whole corpus, and score the result with
purity/entropy plus resampled confidence intervals.
"""

from .classify import (
    ClassSet,
    ClassifiedCorpus,
    ClusterClassMap,
    ExpertLabel,
    VerificationSet,
    build_verification_set,
    classify_all,
    map_clusters_to_classes,
    select_representatives,
)
from .clustering import (
    ClusterParams,
    Clustering,
    KSelection,
    VectorSet,
    clustering_density,
    cosine_similarity,
    kmeans_cluster,
    seed_initial_partition,
    select_k,
)
from .diffs import (
    ChangeMeta,
    ChangeRecord,
    EditScript,
    FileDiff,
    Hunk,
    build_edit_script,
    file_edit_script,
    ingest_history,
    parse_unified_diff,
    read_diff_directory,
    read_history_text,
)
from .evaluate import (
    ContingencyTable,
    QualityReport,
    build_quality_report,
    cluster_entropy,
    cluster_purity,
    corpus_quality,
    hypothesis_check,
    merged_class_quality,
    resample_quality,
)
from .lexing import LexerProfile, cc_of_line, lex_line, load_builtin_profile, resolve_profile
from .metrics import (
    METRIC_NAMES,
    MetricSelection,
    MetricVector,
    compute_metric_vector,
)
from .session import Session, SessionConfig

__version__ = "0.1.0"
