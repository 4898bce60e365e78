"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ModeConnError(Exception):
    exit_code = 1


class InvalidGraphError(ModeConnError, ValueError):
    exit_code = 10


class NoEdgesError(ModeConnError, ValueError):
    exit_code = 11


class InvalidParamsError(ModeConnError, ValueError):
    exit_code = 12


class DimensionError(ModeConnError, ValueError):
    exit_code = 13


class EmptyMaskError(ModeConnError, ValueError):
    exit_code = 14


class TrainingDivergedError(ModeConnError, ArithmeticError):
    exit_code = 15

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class AlphaRangeError(ModeConnError, ValueError):
    exit_code = 16


class CollinearModesError(ModeConnError, ValueError):
    exit_code = 17


class NonSymmetricError(ModeConnError, ValueError):
    exit_code = 18


class IsolatedNodeError(ModeConnError, ValueError):
    exit_code = 19


class InvalidSplitError(ModeConnError, ValueError):
    exit_code = 20


class UndefinedCorrelationError(ModeConnError, ValueError):
    exit_code = 21


class IncompatibleDomainsError(ModeConnError, ValueError):
    exit_code = 22


class GraphParseError(ModeConnError, ValueError):
    exit_code = 23

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class CorruptCheckpointError(ModeConnError, ValueError):
    exit_code = 24


class ConfigError(ModeConnError, ValueError):
    exit_code = 25
