"""reviewcast: early-stage review outcome prediction from author rosters,
inferred group capability, and research-idea text."""

from .corpus import (
    AuthorRecord,
    DatasetSplit,
    PaperRecord,
    filter_first_author_repeat,
    ingest_records,
    make_split,
    render_author_text,
)
from .encoder import EncoderConfig, PooledTextEncoder, PooledVector, compose_input, encode
from .fusion import FUSION_VARIANTS, FeatureTriple, build_fusion
from .llm_gateway import CapabilityProfile, GatewayConfig, JudgeOutput, LlmClient
from .models import ArchSpec, build_model
from .training import TrainConfig, TrialResult, aggregate_trials, train_model

__version__ = "0.1.0"

__all__ = [
    "ArchSpec",
    "AuthorRecord",
    "CapabilityProfile",
    "DatasetSplit",
    "EncoderConfig",
    "FUSION_VARIANTS",
    "FeatureTriple",
    "GatewayConfig",
    "JudgeOutput",
    "LlmClient",
    "PaperRecord",
    "PooledTextEncoder",
    "PooledVector",
    "TrainConfig",
    "TrialResult",
    "aggregate_trials",
    "build_fusion",
    "build_model",
    "compose_input",
    "encode",
    "filter_first_author_repeat",
    "ingest_records",
    "make_split",
    "render_author_text",
    "train_model",
    "__version__",
]
