"""Explainable multi-label text classification.

A label attention head scores each label against every token of a document
and pools token embeddings per label, so each prediction carries its own
attention-based evidence. A mean-pool logistic baseline, pluggable encoders
for long documents, a training and evaluation harness, a CLI and an HTTP
review service round out the toolkit.
"""

from .encoders import EncoderConfig, EncoderOutput, build_encoder, chunk_spans
from .explain import Explanation, build_explanation, explain_prediction, top_attention
from .metrics import (MetricsReport, PredictionBatch, auc_macro, auc_micro,
                      compute_report, f1_scores, precision_at_n)
from .model import (DlacModel, LrcModel, build_dlac_model, build_lrc_model,
                    predict_labels)
from .tensor import Adam, GraphError, ShapeError, Tensor
from .text import (CorpusRecord, Document, LabelSet, SyntheticConfig, Vocabulary,
                   build_documents, build_vocabulary, generate_synthetic_corpus,
                   load_corpus, load_label_set, preprocess, save_corpus,
                   save_label_set, split_corpus)
from .training import (TrainConfig, TrainHistory, cross_validate,
                       examples_from_documents, load_checkpoint, save_checkpoint,
                       train_model)

__version__ = "0.1.0"

__all__ = [
    "Adam", "CorpusRecord", "Document", "DlacModel", "EncoderConfig",
    "EncoderOutput", "Explanation", "GraphError", "LabelSet", "LrcModel",
    "MetricsReport", "PredictionBatch", "ShapeError", "SyntheticConfig",
    "Tensor", "TrainConfig", "TrainHistory", "Vocabulary", "auc_macro",
    "auc_micro", "build_dlac_model", "build_documents", "build_encoder",
    "build_explanation", "build_lrc_model", "build_vocabulary", "chunk_spans",
    "compute_report", "cross_validate", "examples_from_documents",
    "explain_prediction", "f1_scores", "generate_synthetic_corpus",
    "load_checkpoint", "load_corpus", "load_label_set", "precision_at_n",
    "predict_labels", "preprocess", "save_checkpoint", "save_corpus",
    "save_label_set", "split_corpus", "top_attention", "train_model",
]
