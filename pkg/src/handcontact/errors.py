"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class ConfigurationError(ValueError):
    """A structural setting is invalid (e.g. channels not divisible by groups)."""


class ContractError(RuntimeError):
    """An operation was called outside its contract (non-scalar backward, empty
    score list, parameter without a populated gradient, ...)."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""


class IngestionError(ValueError):
    """An input record references something unknown (e.g. an image id)."""


class FileFormatError(ValueError):
    """A line-delimited input file violates its schema."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class CheckpointError(ValueError):
    """A checkpoint cannot be loaded (version, missing or mismatched tensors)."""


class EvaluationError(RuntimeError):
    """Evaluation cannot produce a result (e.g. no state has ground truth)."""


class TrainingDivergence(RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, step):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step
