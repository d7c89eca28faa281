"""Exception hierarchy shared by all subpackages."""


class MaskDCPTError(Exception):
    pass


class InvalidParameterError(MaskDCPTError, ValueError):
    pass


class InvalidShapeError(MaskDCPTError, ValueError):
    pass


class InvalidInputError(MaskDCPTError, ValueError):
    pass


class CorruptCorpusError(MaskDCPTError):
    pass


class CheckpointError(MaskDCPTError):
    pass


class ShapeMismatchError(CheckpointError):
    """Raised on import when named tensors disagree in shape.

    ``names`` lists every offending parameter, first bad tensor first.
    """

    def __init__(self, names, details=""):
        self.names = list(names)
        msg = "shape mismatch for parameter(s): " + ", ".join(self.names)
        if details:
            msg += f" ({details})"
        super().__init__(msg)


class NonFiniteLossError(MaskDCPTError, FloatingPointError):
    def __init__(self, iteration, seed, batch_ids, breakdown=None):
        self.iteration = iteration
        self.seed = seed
        self.batch_ids = list(batch_ids)
        self.breakdown = breakdown
        super().__init__(
            f"non-finite loss at iteration {iteration} (seed={seed}, "
            f"batch={self.batch_ids}, loss={breakdown})"
        )
