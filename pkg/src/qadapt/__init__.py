"""qadapt: a workbench for domain adaptation of extractive question answering.

Measures cross-domain divergence (answer lengths, question prefixes),
trains a desk-scale span-extraction transformer, applies answer-length
importance weighting with capped histogram-ratio weights, and orchestrates
transfer-learning experiments with reproducible reports.
"""

from .corpus import (
    Corpus,
    QaPair,
    SynthDomainSpec,
    concat_corpora,
    general_like_spec,
    generate_synthetic,
    load_canonical,
    load_squad_json,
    manual_like_spec,
    save_canonical,
    tokenize,
)
from .encoding import EncodedExample, build_vocab, decode_answer, encode_corpus, encode_example
from .errors import (
    DataError,
    DegenerateSampleError,
    GenerationError,
    QadaptError,
    SpecError,
    TrainingError,
)
from .estimators import AnswerLengthWeighter, SpanQaEstimator
from .harness import (
    Cell,
    ExperimentResult,
    adaptation_curve,
    benchmark_corpora,
    cross_domain_grid,
    derive_seed,
    emit_report,
    load_report_csv,
    load_report_json,
    run_experiment,
    weighted_adaptation,
)
from .metrics import EvalResult, evaluate, exact_match, normalize_answer, token_f1
from .qamodel import (
    ModelConfig,
    QaModel,
    SpanPrediction,
    backward,
    forward,
    init_model,
    load_checkpoint,
    predict_answers,
    predict_span,
    predict_spans,
    save_checkpoint,
    span_loss,
)
from .stats import (
    LengthHistogram,
    PrefixDistribution,
    answer_length_words,
    auto_bin_edges,
    contrastive_prefixes,
    length_histogram,
    length_shares,
    prefix_distribution,
)
from .trainer import SubsetPlan, TrainConfig, TrainLog, finetune, sample_subsets, train
from .weighting import (
    DensityHistogram,
    WeightTable,
    shared_density_pair,
    weigh_corpus,
    weight_table,
    weights_from_corpora,
)

__version__ = "0.1.0"
