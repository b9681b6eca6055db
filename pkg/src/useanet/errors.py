"""Exception hierarchy shared by every module of the package."""


class UseaError(Exception):
    """Base class for all errors raised by useanet."""


class ShapeError(UseaError, ValueError):
    pass


class InvalidSpecError(UseaError, ValueError):
    """Kernel parameters (window, stride, groups...) cannot produce an output."""


class ConfigurationError(UseaError, ValueError):
    pass


class NumericalError(UseaError, FloatingPointError):
    """A kernel produced NaN or Inf."""


class ContractError(UseaError, RuntimeError):
    """A caller violated an API precondition (non-scalar backward root, ...)."""


class TrainingError(UseaError, RuntimeError):
    pass


class InputError(UseaError, ValueError):
    pass


class ImageFormatError(UseaError, ValueError):
    pass


class CheckpointError(UseaError):
    pass


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class UnsupportedFormatError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError, ShapeError):
    """Checkpoint tensors do not match the shapes the model config expects."""

    def __init__(self, name: str, expected, found):
        self.name = name
        self.expected = tuple(expected) if expected is not None else None
        self.found = tuple(found) if found is not None else None
        if expected is None:
            msg = f"unexpected tensor {name!r} in checkpoint (shape {self.found})"
        elif found is None:
            msg = f"tensor {name!r} missing from checkpoint (expected shape {self.expected})"
        else:
            msg = f"tensor {name!r}: expected shape {self.expected}, checkpoint has {self.found}"
        super().__init__(msg)
