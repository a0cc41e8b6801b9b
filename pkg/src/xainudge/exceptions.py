class XaiNudgeError(Exception):
    """Base class for all errors raised by xainudge."""


class ContractError(XaiNudgeError, ValueError):
    """An argument violates a documented precondition (shape, range, finiteness)."""


class SchemaError(XaiNudgeError, ValueError):
    pass


class ParseError(XaiNudgeError, ValueError):
    pass


class VocabularyError(XaiNudgeError, ValueError):
    pass


class StratificationError(XaiNudgeError, ValueError):
    pass


class ExplainerError(XaiNudgeError, RuntimeError):
    pass


class OptimizationError(XaiNudgeError, RuntimeError):
    pass


class ConfigError(XaiNudgeError, ValueError):
    pass


class StageError(XaiNudgeError, RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage


class MissingArtifactError(XaiNudgeError, FileNotFoundError):
    def __init__(self, path, producer):
        super().__init__(f"{path} not found; run {producer} first")
        self.path = path
        self.producer = producer
