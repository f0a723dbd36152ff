from dualqa_api.attention import AttentionScores, FoldedContext, bilinear_scores, fold_first, fold_second
from dualqa_api.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from dualqa_api.config import ConfigError, ModelConfig, load_config
from dualqa_api.decoding import Generation, greedy_decode
from dualqa_api.embedding import EmbeddingParams, embed_sequence
from dualqa_api.encoders import EncoderConfig, causal_mask, encode_autoregressive, encode_context, self_attention
from dualqa_api.evaluation import EvaluationReport, evaluate_model
from dualqa_api.generator import (
    CoverageState,
    GeneratorParams,
    MixtureDistribution,
    context_distribution,
    coverage_penalty,
    dual_loss,
    final_distribution,
    mixture_gate,
    vocab_distribution,
)
from dualqa_api.model import DualModel, assemble_model, forward_dual, forward_task
from dualqa_api.registry import ParameterRegistry
from dualqa_api.training import BatchFeeder, StepMetrics, Trainer, learning_rate, train_step
from dualqa_api.vocabulary import CharTable, EmbeddingFileError, Vocabulary, build_vocabulary, load_word_embeddings

__all__ = [
    "AttentionScores",
    "BatchFeeder",
    "CharTable",
    "Checkpoint",
    "CheckpointError",
    "ConfigError",
    "CoverageState",
    "DualModel",
    "EmbeddingFileError",
    "EmbeddingParams",
    "EncoderConfig",
    "EvaluationReport",
    "FoldedContext",
    "Generation",
    "GeneratorParams",
    "MixtureDistribution",
    "ModelConfig",
    "ParameterRegistry",
    "StepMetrics",
    "Trainer",
    "Vocabulary",
    "assemble_model",
    "bilinear_scores",
    "build_vocabulary",
    "causal_mask",
    "context_distribution",
    "coverage_penalty",
    "dual_loss",
    "embed_sequence",
    "encode_autoregressive",
    "encode_context",
    "evaluate_model",
    "final_distribution",
    "fold_first",
    "fold_second",
    "forward_dual",
    "forward_task",
    "greedy_decode",
    "learning_rate",
    "load_checkpoint",
    "load_config",
    "load_word_embeddings",
    "mixture_gate",
    "save_checkpoint",
    "self_attention",
    "train_step",
    "vocab_distribution",
]
