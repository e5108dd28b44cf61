class OrthoSplatError(Exception):
    """Base class for every error raised by the pipeline apps."""


class InvalidInputError(OrthoSplatError, ValueError):
    pass


class ContractViolationError(OrthoSplatError):
    """A documented precondition or structural contract was broken."""


class SchemaError(OrthoSplatError):
    def __init__(self, message: str, property_name: str | None = None):
        super().__init__(message)
        self.property_name = property_name


class ParseError(OrthoSplatError):
    def __init__(self, message: str, path=None, line_number: int | None = None):
        location = ''
        if path is not None:
            location = f'{path}'
            if line_number is not None:
                location += f':{line_number}'
            location += ': '
        super().__init__(f'{location}{message}')
        self.path = path
        self.line_number = line_number


class RasterFormatError(OrthoSplatError):
    def __init__(self, message: str, path=None, offset: int | None = None):
        suffix = f' (byte offset {offset})' if offset is not None else ''
        prefix = f'{path}: ' if path is not None else ''
        super().__init__(f'{prefix}{message}{suffix}')
        self.path = path
        self.offset = offset


class FitDivergedError(OrthoSplatError):
    def __init__(self, iteration: int):
        super().__init__(f'Loss became NaN at iteration {iteration}.')
        self.iteration = iteration
