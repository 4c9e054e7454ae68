"""Exception hierarchy shared across the package."""


class KomboError(Exception):
    """Base class for every error raised by this package."""


class NotHangulSyllable(KomboError):
    """Input character is outside the precomposed Hangul syllable block."""


class InvalidJamoIndex(KomboError):
    """A (chosung, joongsung, jongsung) index triple is out of range."""


class TableGap(KomboError):
    """A decomposition table is missing an entry (corrupt data file)."""


class VocabError(KomboError):
    """Token id or symbol is inconsistent with the vocabulary."""


class ConfigTooSmall(KomboError):
    """max_len leaves no room for even CLS and SEP spans."""


class MalformedSequence(KomboError):
    """Token sequence spans do not tile the id list."""


class ShapeError(KomboError):
    """Tensor shapes are inconsistent for the requested operation."""


class ConfigError(KomboError):
    """Model or optimizer configuration is invalid."""


class AlignmentError(KomboError):
    """Sequence length is not aligned to the character grid."""


class OracleFailure(KomboError):
    """Finite-difference oracle could not evaluate the loss."""


class EmptyPlan(KomboError):
    """Masking requested on a sequence with no maskable characters."""


class CheckpointError(KomboError):
    """Checkpoint file is malformed or disagrees with its config echo."""


class AnchorNotFound(KomboError):
    """Probe anchor character does not occur in the target sentence."""


class NoData(KomboError):
    """Corpus is empty or cannot supply the requested samples."""


class TrainingDiverged(KomboError):
    """Loss became non-finite; the last good checkpoint was written."""
