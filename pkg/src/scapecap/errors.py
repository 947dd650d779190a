"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`ScapecapError`; the CLI prints ``type(err).__name__`` as the
machine-readable error class.
"""


class ScapecapError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(ScapecapError):
    exit_code = 2


class MissingArtifact(UsageError):
    """A subcommand needs an upstream artifact that does not exist."""


class ConfigError(UsageError):
    pass


# ingest
class ManifestError(ScapecapError):
    def __init__(self, message, clip_id=None):
        self.clip_id = clip_id
        if clip_id is not None:
            message = f"clip {clip_id!r}: {message}"
        super().__init__(message)


class ParseError(ManifestError):
    pass


class ValidationError(ManifestError):
    pass


class MissingAudioError(ManifestError):
    pass


class SizeError(ScapecapError):
    pass


class VocabularyError(ScapecapError):
    pass


# features
class TooShortError(ScapecapError):
    pass


class CacheVersionError(ScapecapError):
    pass


class CacheMissError(ScapecapError):
    def __init__(self, clip_id, path=None):
        self.clip_id = clip_id
        super().__init__(f"no cached features for clip {clip_id!r}" + (f" at {path}" if path else ""))


# model
class InputTooShortError(ScapecapError):
    def __init__(self, got, required):
        self.got = got
        self.required = required
        super().__init__(f"input has {got} frames, at least {required} are required")


class ShapeError(ScapecapError):
    pass


# objectives / statistics
class RangeError(ScapecapError):
    pass


class DomainError(ScapecapError):
    pass


# training
class EmptySplitError(ScapecapError):
    pass


class DegenerateClassError(ScapecapError):
    pass


# caption
class TemplateError(ScapecapError):
    pass


class LLMError(ScapecapError):
    pass


class AuthError(LLMError):
    pass


class RateLimitError(LLMError):
    pass


class TransientLLMError(LLMError):
    """Retryable failure (timeout, 5xx)."""


class EmptyResponseError(LLMError):
    pass


# statistics
class EmptyGroupError(ScapecapError):
    pass


class LengthError(ScapecapError):
    pass


class ConstantInputError(ScapecapError):
    pass


class AllZeroDifferencesError(ScapecapError):
    pass


class SampleSizeError(ScapecapError):
    pass


class ZeroVarianceError(ScapecapError):
    pass
