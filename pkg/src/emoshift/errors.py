"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (e.g. ``"truncated-file"``)
so the CLI and tests can match on the failure kind without parsing messages.
"""


class EmoShiftError(Exception):
    code = "error"

    def __init__(self, message: str = "", code: str | None = None):
        if code is not None:
            self.code = code
        super().__init__(f"[{self.code}] {message}" if message else f"[{self.code}]")


class WavError(EmoShiftError):
    """Malformed or unsupported WAV container."""


class CorpusError(EmoShiftError):
    """Clip naming, metadata or manifest construction failed."""


class SignalError(EmoShiftError):
    """Framing, windowing or feature extraction failed."""


class ModelError(EmoShiftError):
    """Classifier fitting or prediction failed."""


class ConfigError(EmoShiftError):
    code = "config-validation"
