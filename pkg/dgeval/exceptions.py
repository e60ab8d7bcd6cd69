from __future__ import annotations

from typing import Any, Optional


class Error(Exception):
    def __init__(self, message: Optional[str] = None):
        self.message = message
        super().__init__(self.message)


class JudgeError(Error):
    """Base class for every failure raised by the judge gateway."""


class JudgeNotReachableError(JudgeError):
    def __init__(self, endpoint: str, message: Optional[str] = None):
        self.endpoint = endpoint
        self.message = message or f"Unable to connect to '{endpoint}'."
        super().__init__(self.message)


class JudgeNotResponsiveError(JudgeError):
    def __init__(self, url: str, timeout: Optional[int] = None, message: Optional[str] = None):
        self.url = url
        self.timeout = timeout
        self.message = message or f"Unable to read from '{url}'."
        if timeout:
            self.message += f" (timeout: {timeout} sec)"
        super().__init__(self.message)


class JudgeThrottledError(JudgeError):
    def __init__(self, url: str, message: Optional[str] = None):
        self.url = url
        self.message = message or f"Rate limit reached on '{url}'."
        super().__init__(self.message)


class JudgeServerError(JudgeError):
    def __init__(self, url: str, status_code: int, message: Optional[str] = None):
        self.url = url
        self.status_code = status_code
        self.message = message or f"'{url}' answered with status {status_code}."
        super().__init__(self.message)


class JudgeSchemaError(JudgeError):
    def __init__(self, template_id: str, raw: str, errors: Optional[list[Any]] = None):
        self.template_id = template_id
        self.raw = raw
        self.errors = errors or []
        self.message = f"The judge output for '{template_id}' does not match its schema: {self.errors}"
        super().__init__(self.message)


class ReplayMissError(JudgeError):
    def __init__(self, key: str, template_id: str, message: Optional[str] = None):
        self.key = key
        self.template_id = template_id
        self.message = message or f"No recorded response for '{template_id}' with hash {key}."
        super().__init__(self.message)


class MissingBindingError(JudgeError):
    def __init__(self, name: str):
        self.name = name
        self.message = f"missing binding: {name}"
        super().__init__(self.message)


class TemplateNotFoundError(JudgeError):
    def __init__(self, name: str, message: Optional[str] = None):
        self.message = message or f"The prompt template '{name}' was not found."
        super().__init__(self.message)


class ValidationError(Error):
    def __init__(self, identifier: str, message: str):
        self.identifier = identifier
        self.message = message
        super().__init__(self.message)


class DatasetValidationError(ValidationError):
    def __init__(self, identifier: str, problems: list[str]):
        self.problems = problems
        message = f"{identifier} contains {len(problems)} invalid record(s):\n  " + "\n  ".join(problems)
        super().__init__(identifier=identifier, message=message)


class DuplicateRecordError(ValidationError):
    def __init__(self, identifier: str, duplicates: list[str]):
        self.duplicates = duplicates
        super().__init__(identifier=identifier, message=f"Duplicate ids in {identifier}: {', '.join(duplicates)}")


class DanglingReferenceError(ValidationError):
    def __init__(self, identifier: str, references: list[str]):
        self.references = references
        super().__init__(
            identifier=identifier, message=f"{identifier} references unknown query ids: {', '.join(references)}"
        )


class ExtractionError(Error):
    def __init__(self, message: Optional[str] = None, cause: Optional[Exception] = None):
        self.cause = cause
        self.message = message or "Unable to extract atomic facts."
        super().__init__(self.message)


class NoGoldenFactsError(Error):
    def __init__(self, query_id: str = ""):
        self.query_id = query_id
        self.message = f"No golden facts available for query '{query_id}', recall cannot be evaluated."
        super().__init__(self.message)


class StitchingError(Error):
    """Raised when a response cannot be stitched from the provided facts."""


class UnknownModelError(Error):
    def __init__(self, name: str, known: list[str]):
        self.name = name
        self.message = f"Unknown model '{name}', expected one of {known}."
        super().__init__(self.message)


class MissingPriceError(Error):
    def __init__(self, model: str):
        self.model = model
        self.message = f"No pricing entry for model '{model}'."
        super().__init__(self.message)


class UnknownReportFormatError(Error):
    def __init__(self, name: str):
        self.message = f"Unknown report format '{name}'."
        super().__init__(self.message)


class BatchInterruptedError(Error):
    def __init__(self, checkpoint: Optional[str], completed: int, cause: Optional[Exception] = None):
        self.checkpoint = checkpoint
        self.completed = completed
        self.cause = cause
        self.message = f"Evaluation stopped after {completed} record(s), resume from checkpoint '{checkpoint}'."
        if cause:
            self.message += f" Cause: {cause}"
        super().__init__(self.message)


class FileNotValidError(Error):
    def __init__(self, name: str, message: str = ""):
        self.name = name
        self.message = message or f"Cannot parse '{name}' content."
        super().__init__(self.message)
