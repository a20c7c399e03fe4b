# src/genconv/errors.py
from typing import Optional


class GenConvError(Exception):
    """Root of every error raised by the toolkit."""


class ConfigError(GenConvError):
    def __init__(self, message: str, layer_index: Optional[int] = None):
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)
        self.layer_index = layer_index


class ShapeError(GenConvError, ValueError):
    """Operand widths or lengths do not line up."""


class StateError(GenConvError, RuntimeError):
    """An operation was called out of order (e.g. backward before forward)."""


class EmptyInputError(GenConvError, ValueError):
    pass


class DataError(GenConvError):
    """Dataset files are missing, unreadable or inconsistent."""


class OffParseError(DataError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CheckpointError(DataError):
    pass


class NumericalError(GenConvError):
    def __init__(self, message: str, epoch: Optional[int] = None, cloud_id: Optional[str] = None):
        self.detail = message
        if epoch is not None or cloud_id is not None:
            message = f"{message} (epoch={epoch}, cloud={cloud_id})"
        super().__init__(message)
        self.epoch = epoch
        self.cloud_id = cloud_id
