"""Exception hierarchy shared by every module."""


class PostureStackError(Exception):
    """Base class for all library errors."""


class SchemaError(PostureStackError):
    pass


class ParseError(PostureStackError):
    def __init__(self, row, column, message):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column}: {message}")


class LabelError(PostureStackError):
    pass


class ConfigError(PostureStackError):
    pass


class FitError(PostureStackError):
    pass


class DomainError(PostureStackError, ValueError):
    pass


class PredictError(PostureStackError):
    pass


class EvaluationError(PostureStackError):
    pass


class ModelLoadError(PostureStackError):
    """Raised for corrupt model files; ``field`` names the first invalid entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class VersionError(ModelLoadError):
    pass
