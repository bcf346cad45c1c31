"""Exception hierarchy shared across the pipeline.

Every error raised by this package derives from :class:`AlertGroupingError`,
so callers (and the CLI) can categorize failures without string matching.
"""


class AlertGroupingError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(AlertGroupingError):
    """Invalid configuration value or config file."""


class InputError(AlertGroupingError):
    """Missing or unreadable input artifact."""


# --- core ---------------------------------------------------------------

class UnsortedTimestamps(AlertGroupingError):
    pass


class DuplicateSourceIndex(AlertGroupingError):
    pass


class NonFiniteTimestamp(AlertGroupingError):
    pass


# --- ingest -------------------------------------------------------------

class MalformedLine(AlertGroupingError):
    def __init__(self, line_no, detail=""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {detail}" if detail else f"line {line_no}")


class MissingTimestamp(MalformedLine):
    pass


class UnparseableTimestamp(MalformedLine):
    pass


class MissingScenario(InputError):
    def __init__(self, scenario_id):
        self.scenario_id = scenario_id
        super().__init__(f"no alert file for scenario {scenario_id!r}")


# --- vocab / model ------------------------------------------------------

class EmptyTrainingData(AlertGroupingError):
    pass


class DimensionMismatch(AlertGroupingError):
    pass


class ContextOverflow(AlertGroupingError):
    def __init__(self, n, context_size):
        self.n = n
        self.context_size = context_size
        super().__init__(f"sequence of {n} alerts exceeds context size {context_size}")


class NoMaskedPositions(AlertGroupingError):
    pass


class TrainingDiverged(AlertGroupingError):
    pass


class CorruptCheckpoint(AlertGroupingError):
    pass


class VocabHashMismatch(AlertGroupingError):
    pass


# --- group --------------------------------------------------------------

class ZeroNormEmbedding(AlertGroupingError):
    pass


class UnsortedInput(AlertGroupingError):
    pass


class IndexOutOfRange(AlertGroupingError):
    pass


class NonMonotoneTimestamp(AlertGroupingError):
    pass


# --- augment ------------------------------------------------------------

class UnlabelledAlert(AlertGroupingError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"alert at index {index} carries no label")


class UnresolvedRef(ConfigError):
    pass


# --- evaluate -----------------------------------------------------------

class LengthMismatch(AlertGroupingError):
    pass


class UnknownLabel(AlertGroupingError):
    pass


class MissingLeafPoint(AlertGroupingError):
    pass


# --- warnings -----------------------------------------------------------

class RankDeficientWarning(UserWarning):
    """PCA input had fewer nonzero eigenvalues than requested components."""


class AttackOverflowsDayWarning(UserWarning):
    """An attack placement extends past the end of its day."""


class ZeroNormPerturbedWarning(UserWarning):
    """Zero-norm embedding rows were perturbed before cosine use."""
