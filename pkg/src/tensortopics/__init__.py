"""Topic grouping for document corpora via sparse CP tensor factorization.

A corpus becomes a sparse 4-way tensor (author x document x journal x word,
with ln(1+count) entries), a CP model is fit per rank in an ensemble, and
cosine similarity over word factors picks a deduplicated component set to
report.
"""

from .corpus_ingest import (
    CleaningRules,
    CorpusRecord,
    QuadCounts,
    build_counts,
    clean_and_filter,
    counts_to_tensor,
    dedup,
    load_corpus,
    tokenize,
)
from .cp_als import (
    AlsDivergenceError,
    AlsOptions,
    KruskalModel,
    arrange,
    cp_als,
    fit,
    init_factors,
    load_model,
    mttkrp,
    save_model,
)
from .ensemble import (
    Component,
    SelectionConfig,
    SelectionResult,
    ZeroVectorError,
    cosine,
    decompose_ensemble,
    select_components,
    select_components_detailed,
    similarity_matrix,
)
from .linalg import gram, hadamard_all, khatri_rao, normalize_columns_l1, solve_gram
from .report import (
    ComponentReport,
    build_report,
    emit_report,
    keyword_cloud,
    load_reports,
    top_n,
)
from .sparse_tensor import (
    AxisMap,
    SparseTensorCOO,
    density_value,
    from_entries,
    load_tensor,
    save_tensor,
)

__version__ = "0.1.0"

__all__ = [
    "AlsDivergenceError",
    "AlsOptions",
    "AxisMap",
    "CleaningRules",
    "Component",
    "ComponentReport",
    "CorpusRecord",
    "KruskalModel",
    "QuadCounts",
    "SelectionConfig",
    "SelectionResult",
    "SparseTensorCOO",
    "ZeroVectorError",
    "arrange",
    "build_counts",
    "clean_and_filter",
    "cosine",
    "counts_to_tensor",
    "cp_als",
    "decompose_ensemble",
    "dedup",
    "density_value",
    "build_report",
    "emit_report",
    "fit",
    "from_entries",
    "gram",
    "hadamard_all",
    "init_factors",
    "keyword_cloud",
    "khatri_rao",
    "load_corpus",
    "load_model",
    "load_reports",
    "load_tensor",
    "mttkrp",
    "normalize_columns_l1",
    "save_model",
    "save_tensor",
    "select_components",
    "select_components_detailed",
    "similarity_matrix",
    "solve_gram",
    "top_n",
    "tokenize",
]
