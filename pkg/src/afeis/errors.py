"""Shared exception types."""


class AfeisError(Exception):
    """Base class for all errors raised by this package."""


class KeymapError(AfeisError):
    """A keymap file failed validation.

    Carries the full list of problems found, not just the first one.
    """

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class UnknownKeymapError(AfeisError):
    """Activation of a keymap index that was never registered."""


class GestureRangeError(AfeisError, ValueError):
    """A gesture ID outside the supported range reached an API boundary."""


class StreamOrderError(AfeisError):
    """Frame timestamps went backwards; the input stream is corrupt."""


class ExpansionError(AfeisError):
    """A recorded program could not be expanded into concrete commands."""


class DeliveryError(AfeisError):
    """The robot rejected a delivered command list; nothing was buffered."""


class ExecutionError(AfeisError):
    """A buffered command failed while executing."""


class ConfigError(AfeisError):
    """A session or experiment configuration file is unusable."""
