"""Cross-library API matching and differential fuzzing.

Pipeline: load documentation corpora, match equivalent APIs across them,
align parameters, then fuzz each matched group with variance-guided
input mutation and crash/NaN/inconsistency oracles.
"""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"

from .corpus import ApiRecord, Corpus, CorpusFormatError, ParamSpec, load_corpus
from .similarity import (
    EmbeddingVector,
    LexicalTfProvider,
    PrecomputedProvider,
    SimilarityScores,
    description_similarity,
    levenshtein,
    name_similarity,
    param_similarity,
)
from .matcher import ApiGroup, MatchCandidate, build_groups, read_group_file, write_group_file
from .align import AlignedSignature, AlignmentError, align_signature, permute_args
from .values import GeneratorConfig, SeedFactory, SeedTuple, ValueIR, validate_seed
from .backends import (
    BackendHandle,
    BackendUnavailable,
    ExecutionOutcome,
    InProcessBackend,
    WorkerBackend,
    reference_backend,
)
from .engine import (
    CampaignConfig,
    Finding,
    VarianceResult,
    accept,
    compute_variance,
    deviation_vector,
    mutate,
    run_campaign,
)


def bundled_data_dir() -> Path:
    """Directory with the corpora and configs shipped inside the package."""
    return Path(resources.files(__name__) / "data")  # type: ignore[arg-type]
