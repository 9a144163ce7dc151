from enum import Enum, IntEnum, auto


class Season(IntEnum):
    """Season index of a 3-month block; names hold for a December block start."""

    WINTER = 0
    SPRING = 1
    SUMMER = 2
    AUTUMN = 3


class Side(Enum):
    BEFORE = auto()
    AFTER = auto()


class LocalCost(Enum):
    SQUARED = auto()
    DERIVATIVE = auto()


class FillMethod(Enum):
    LINEAR = "linear"
    DTW_MATCH = "dtw_match"
    MIN_DTW = "min_dtw"
    SEASON_MEAN = "season_mean"
    ROW_MEAN = "row_mean"


class ZScoreAxis(str, Enum):
    COLUMN = "column"
    ROW = "row"
    GLOBAL = "global"


class LayerKind(str, Enum):
    DENSE = "dense"
    BATCHNORM = "batchnorm"
    RELU = "relu"
    SIGMOID = "sigmoid"


class Loss(str, Enum):
    MSE = "mse"
    BCE = "binary-cross-entropy"
    RAW_MEAN = "raw-mean"


class VotingMode(str, Enum):
    SOFT_VOTE = "soft-vote"
    STACKED = "stacked"


class Stage(str, Enum):
    IMPUTE = "impute"
    ZSCORE = "zscore"
    SPLIT = "split"
    NORMALIZE = "normalize"
    NEARMISS = "nearmiss"
    SAE = "sae"
    GAN = "gan"
    ENSEMBLE = "ensemble"
    EVALUATE = "evaluate"


class LearnerKind(str, Enum):
    TREE = "tree"
    FOREST = "forest"
    BOOSTING = "boosting"
    LOGISTIC = "logistic"


class AttackKind(str, Enum):
    SCALE = "scale"
    ZERO = "zero"
    SPIKES = "spikes"
