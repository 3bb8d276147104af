from __future__ import annotations


class UhdError(Exception):
    """Base for every error raised by the library. `exit_code` is what the CLI returns."""

    exit_code = 1


class DomainError(UhdError, ValueError):
    exit_code = 2


class ShapeError(UhdError, ValueError):
    exit_code = 2


class CapacityError(UhdError, ValueError):
    exit_code = 2


class PreconditionError(UhdError, ValueError):
    exit_code = 2


class LogicError(UhdError, RuntimeError):
    exit_code = 2


class StateError(UhdError, RuntimeError):
    exit_code = 2


class TrainingError(UhdError, RuntimeError):
    exit_code = 2


class ConfigError(UhdError, ValueError):
    exit_code = 1


class ModelMismatchError(ConfigError):
    """Input data does not match the feature count or quantization a model was built for."""

    exit_code = 2


class FormatError(UhdError, ValueError):
    exit_code = 2


class ResourceError(UhdError, MemoryError):
    exit_code = 3

    def __init__(self, msg: str, required_bytes: int = 0) -> None:
        super().__init__(msg)
        self.required_bytes = required_bytes
