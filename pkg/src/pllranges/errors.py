"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, RefusalError -> 1.
Everything else is a plain bug and propagates.
"""


class ConfigError(ValueError):
    """Invalid or incomplete loop description (bad key, bad value, bad file)."""

    def __init__(self, message, key=None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class RefusalError(RuntimeError):
    """A computation the tool deliberately refuses (unsupported case).

    The message is a single machine-parsable line; the CLI exits with
    status 1 and prints it verbatim.
    """


class IntegrationError(RuntimeError):
    """Step-size underflow or solver failure during numerical integration."""
