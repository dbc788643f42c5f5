class PruneLabError(Exception):
    """Base exception for the pruning lab."""
    exit_code = 1

    def __init__(self, message: str, context: str = "processing"):
        super().__init__(message)
        self.message = message
        self.context = context

class ConfigError(PruneLabError):
    """Raised for unusable flags or configuration values (unknown strategy, bad sparsity grid)."""
    exit_code = 2

class ShapeError(PruneLabError):
    """Raised when tensor shapes disagree."""
    exit_code = 4

    def __init__(self, message: str, expected: tuple | None = None, actual: tuple | None = None,
                 context: str = "shape"):
        if expected is not None or actual is not None:
            message = f"{message} (expected {expected}, got {actual})"
        super().__init__(message, context)
        self.expected = expected
        self.actual = actual

class LabelError(PruneLabError):
    """Raised when a class label is out of range or unknown."""
    exit_code = 3

class BackwardError(PruneLabError):
    """Raised when a backward pass is requested without a completed forward trace."""
    exit_code = 4

class NumericError(PruneLabError):
    """Raised when training produces a non-finite loss."""
    exit_code = 4

    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        super().__init__(message, context="training")
        self.epoch = epoch
        self.batch = batch

class NoTrainableParametersError(PruneLabError):
    """Raised when fine-tuning is requested with every parameter group frozen."""
    exit_code = 2

class ModelFormatError(PruneLabError):
    """Base class for model file problems."""
    exit_code = 3

class CorruptModelError(ModelFormatError):
    """Raised when a model file is truncated or structurally invalid."""
    pass

class ModelVersionError(ModelFormatError):
    """Raised when a model file declares an unsupported format version."""
    pass

class ModelShapeError(ModelFormatError):
    """Raised when stored parameter shapes do not match the baseline architecture."""
    pass

class DatasetError(PruneLabError):
    """Raised for unusable beat sets (empty partitions, SMOTE on a single record)."""
    exit_code = 3

class BeatFormatError(DatasetError):
    """Raised when a beat-CSV row cannot be parsed."""

    def __init__(self, message: str, line_no: int, path: str | None = None):
        location = f"{path}:{line_no}" if path else f"line {line_no}"
        super().__init__(f"{location}: {message}", context="beat-csv")
        self.line_no = line_no
        self.path = path

class MetricsError(PruneLabError):
    """Raised for invalid metric inputs."""
    exit_code = 3

class FlopsError(PruneLabError):
    """Raised for an invalid layer index or sparsity in FLOPs accounting."""
    exit_code = 2
