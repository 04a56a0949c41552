"""Multi-label intention mining for technical forum questions.

The pipeline cleans forum posts, classifies code-block content,
extracts readability and sentiment features, embeds title and
description text, and trains a small feedforward head with sigmoid
outputs, one per intention category. Evaluation covers ranking metrics
(P@k/R@k/F1@k, top-k accuracy), micro-averaged PRF, pairwise OvO AUC,
and Krippendorff's alpha for annotation agreement.
"""

from .codeblock import (
    CodeBlockClassifier,
    CodeBlockRecord,
    ContentCategoryDistribution,
    load_codeblock_corpus,
    predict_content,
    train_codeblock_classifier,
)
from .core import (
    AnnotatedPost,
    ContentCategory,
    DatasetError,
    Intention,
    Post,
    dataset_stats,
    label_set,
    load_dataset,
    save_dataset,
)
from .crossval import FoldPlan, make_folds, run_cv
from .embedding import (
    EmbeddingProvider,
    EmbeddingProviderSpec,
    HashedProvider,
    ProtocolError,
    SidecarClient,
    TransportError,
    make_provider,
)
from .features import (
    Standardizer,
    TextualFeatures,
    compute_textual,
    load_default_lexicon,
    readability,
    sentiment,
)
from .head import (
    HeadConfig,
    HeadModel,
    PredictionScores,
    forward,
    refine,
    train,
)
from .metrics import (
    RankedPrediction,
    full_report,
    intention_agreement,
    krippendorff_alpha,
    micro_prf,
    ovo_auc,
    precision_recall_f1_at_k,
    top_k_accuracy,
)
from .pipeline import PipelineModel
from .preprocess import CleanPost, clean

__version__ = "0.1.0"

__all__ = [
    "AnnotatedPost",
    "CleanPost",
    "CodeBlockClassifier",
    "CodeBlockRecord",
    "ContentCategory",
    "ContentCategoryDistribution",
    "DatasetError",
    "EmbeddingProvider",
    "EmbeddingProviderSpec",
    "FoldPlan",
    "HashedProvider",
    "HeadConfig",
    "HeadModel",
    "Intention",
    "PipelineModel",
    "Post",
    "PredictionScores",
    "ProtocolError",
    "RankedPrediction",
    "SidecarClient",
    "Standardizer",
    "TextualFeatures",
    "TransportError",
    "clean",
    "compute_textual",
    "dataset_stats",
    "forward",
    "full_report",
    "intention_agreement",
    "krippendorff_alpha",
    "label_set",
    "load_codeblock_corpus",
    "load_dataset",
    "load_default_lexicon",
    "make_folds",
    "make_provider",
    "micro_prf",
    "ovo_auc",
    "precision_recall_f1_at_k",
    "predict_content",
    "readability",
    "refine",
    "run_cv",
    "save_dataset",
    "sentiment",
    "top_k_accuracy",
    "train",
    "train_codeblock_classifier",
]
