"""Desk-scale lab for Hangeul subcharacter models.

Subpackages:
    hangul      syllable arithmetic and the Stroke/Cji/BTS atomic alphabets
    tokenizer   padded subcharacter id grids with character alignment
    nn          numpy forward/backward engine, layers, AdamW, grad oracle
    model       the combination/restoration architecture and its ablations
    objectives  span-subcharacter masking and sentence-pair sampling
    corruption  keyboard-adjacency typo generation
    training    corpus streaming, pretraining loop, checkpoints
    probe       character cosine-similarity reports
"""

from .hangul import (BtsTables, CharClass, SyllableDecomposition, UnitScheme,
                     classify_char, compose_syllable, decompose_syllable,
                     expand_to_scheme, invert_expansion)
from .tokenizer import TokenSequence, Vocab, build_vocab, char_alignment, decode, encode
from .model import (Ablations, KomboModel, MergeSpec, ModelConfig,
                    RestorationSpec, param_count, row_share)
from .nn.tensor import Rng, Tensor
from .objectives import (MaskStrategy, MaskingPlan, NspSampler, ObjectiveConfig,
                         apply_mask, plan_span_subchar_mask, plan_token_mask)
from .corruption import (KeyboardAdjacency, TypoMethod, TypoSpec, inject_typos,
                         sweep_rates)
from .config import OptimizerConfig, PathsConfig, RunConfig, load_config, save_config
from .training import CorpusStream, load_checkpoint, pretrain_loop, save_checkpoint
from .probe import ProbeReport, probe_similarity

__version__ = "0.1.0"

__all__ = [
    "Ablations", "BtsTables", "CharClass", "CorpusStream", "KeyboardAdjacency",
    "KomboModel", "MaskStrategy", "MaskingPlan", "MergeSpec", "ModelConfig",
    "NspSampler", "ObjectiveConfig", "OptimizerConfig", "PathsConfig",
    "ProbeReport", "RestorationSpec", "Rng", "RunConfig", "SyllableDecomposition",
    "Tensor", "TokenSequence", "TypoMethod", "TypoSpec", "UnitScheme", "Vocab",
    "apply_mask", "build_vocab", "char_alignment", "classify_char",
    "compose_syllable", "decode", "decompose_syllable", "encode",
    "expand_to_scheme", "inject_typos", "invert_expansion", "load_checkpoint",
    "load_config", "param_count", "plan_span_subchar_mask", "plan_token_mask",
    "pretrain_loop", "probe_similarity", "row_share", "save_checkpoint",
    "save_config", "sweep_rates",
]
