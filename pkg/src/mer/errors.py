"""Exception hierarchy shared by all pipeline stages.

Exit-code mapping used by the CLI:
  input errors   -> 1
  config errors  -> 2
  runtime errors -> 3
"""


class MerError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 3


class InputError(MerError):
    exit_code = 1


class ConfigError(MerError):
    exit_code = 2


class RuntimeFailure(MerError):
    exit_code = 3


# --- media ingest ---

class MissingFile(InputError):
    pass


class MalformedHeader(InputError):
    pass


class NonMonotonicTimestamps(InputError):
    pass


class DecoderNotFound(ConfigError):
    pass


class DecoderFailed(RuntimeFailure):
    def __init__(self, returncode, diagnostics=""):
        super().__init__(f"decoder exited with status {returncode}: {diagnostics}")
        self.returncode = returncode
        self.diagnostics = diagnostics


# --- vad / extraction ---

class EmptyAudio(InputError):
    pass


class SpanOutOfRange(InputError):
    pass


class BackendFailure(RuntimeFailure):
    pass


# --- encoders / fusion ---

class ShapeMismatch(InputError):
    pass


class IdOutOfRange(InputError):
    pass


class EmptySequence(InputError):
    pass


class NonFiniteLoss(RuntimeFailure):
    def __init__(self, message, loss_trace=None):
        super().__init__(message)
        self.loss_trace = list(loss_trace or [])


# --- weights archive ---

class BadMagic(ConfigError):
    pass


class ManifestMismatch(ConfigError):
    pass


class TruncatedBlob(ConfigError):
    pass


# --- metrics ---

class LengthMismatch(InputError):
    pass


class JobCancelled(MerError):
    """Raised by an event sink to stop a run at the next utterance boundary."""
