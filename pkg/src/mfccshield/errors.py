"""Exception hierarchy.

``ValidationError`` subclasses signal bad input or configuration (CLI exit
code 2); everything else under ``MfccShieldError`` is a processing failure
(exit code 3).
"""


class MfccShieldError(Exception):
    """Base class for all package errors."""


class ValidationError(MfccShieldError, ValueError):
    """Input or configuration violates a documented invariant."""


class InvalidConfig(ValidationError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class InvalidFftLength(InvalidConfig):
    def __init__(self, message):
        super().__init__("n_fft", message)


class DimensionMismatch(ValidationError):
    pass


class AudioError(MfccShieldError):
    pass


class MalformedWav(AudioError):
    pass


class UnsupportedEncoding(AudioError):
    pass


class EmptyAudio(AudioError, ValidationError):
    pass


class AudioTooShort(AudioError, ValidationError):
    pass


class IoFailure(AudioError):
    pass


class SampleRateMismatch(AudioError, ValidationError):
    def __init__(self, actual, required):
        self.actual = actual
        self.required = required
        super().__init__(f"sample rate {actual} Hz, required {required} Hz")


class EnvNoiseTooLoud(MfccShieldError):
    def __init__(self, level_db, limit_db):
        self.level_db = level_db
        self.limit_db = limit_db
        super().__init__(
            f"environmental noise {level_db:.1f} dB exceeds the {limit_db:.0f} dB tolerance"
        )


class EmptyReference(ValidationError):
    pass


class SilentInput(MfccShieldError):
    pass


class ProviderUnavailable(MfccShieldError):
    def __init__(self, message, elapsed_ms):
        self.elapsed_ms = elapsed_ms
        super().__init__(f"{message} (after {elapsed_ms:.0f} ms)")


class UnmappedClip(MfccShieldError):
    def __init__(self, clip_id):
        self.clip_id = clip_id
        super().__init__(f"no stub transcript for clip {clip_id!r}")
