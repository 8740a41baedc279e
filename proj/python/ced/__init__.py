# SPDX-License-Identifier: Apache-2.0
"""Contrastive-example decoding engine (Python bindings)."""

from ._ced import (
    AlignmentError,
    BackendError,
    BigramBackend,
    ConfigError,
    ContextExample,
    DatasetError,
    DecodeParams,
    DescriptiveFeatures,
    FeatureError,
    LogProbDist,
    ParameterError,
    PromptPair,
    PromptTemplate,
    RemoteBackend,
    ScoredCandidates,
    SelectionError,
    TableBackend,
    adaptive_head,
    align_supports,
    build_prompt_pair,
    ced_scores,
    cli_main,
    decode_ced,
    decode_greedy,
    exact_match,
    fit_bigram,
    load_dataset,
    normalize,
    normalize_answer,
    question_type,
    render_example,
    render_features,
    run_experiment,
    select_examples,
    validate_dataset,
    vqa_soft_accuracy,
)

DEFAULT_ALPHA = 0.1
DEFAULT_TOP_N = 5

__all__ = [name for name in dir() if not name.startswith("_")]
