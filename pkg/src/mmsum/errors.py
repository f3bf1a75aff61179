"""Exception taxonomy. Every error carries a machine-readable code that the
CLI echoes on stderr, so callers can branch on failures without parsing
messages."""


class MMSumError(Exception):
    code = "ERROR"


class IngestionError(MMSumError):
    code = "INGESTION"


class SchemaError(MMSumError):
    code = "SCHEMA"


class FormatError(MMSumError):
    code = "FORMAT"


class SplitError(MMSumError):
    code = "SPLIT"


class ConfigError(MMSumError):
    code = "CONFIG"


class EncodeError(MMSumError):
    code = "ENCODE"


class AttentionError(MMSumError):
    code = "ATTENTION"


class BiHopUnavailable(MMSumError):
    """Bi-hop attention requested but the transcript bridge is empty."""

    code = "BIHOP_UNAVAILABLE"


class FusionError(MMSumError):
    code = "FUSION"


class LabelError(MMSumError):
    code = "LABEL"


class LossError(MMSumError):
    code = "LOSS"


class RewardError(MMSumError):
    code = "REWARD"


class TrainingError(MMSumError):
    code = "TRAINING"


class EvalError(MMSumError):
    code = "EVAL"


class CheckpointError(MMSumError):
    code = "CHECKPOINT"


class CliError(MMSumError):
    code = "CLI"
