"""Exception hierarchy shared by every module.

Each class carries the exit code the command-line harness maps it to.
"""


class KBError(Exception):
    exit_code = 2
    kind = "data"


class ConfigError(KBError, ValueError):
    exit_code = 1
    kind = "config"


class ParseError(KBError, ValueError):
    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class VocabularyError(KBError, KeyError):
    def __init__(self, token, role="name"):
        self.token = token
        super().__init__(f"unknown {role} {token!r}")

    def __str__(self):
        return self.args[0]


class FormatError(KBError, ValueError):
    pass


class BindingError(KBError, ValueError):
    """Parameters and vocabulary disagree on sizes."""


class ModelKindError(KBError, TypeError):
    exit_code = 1
    kind = "config"


class SamplingError(KBError, RuntimeError):
    exit_code = 3
    kind = "numerical"


class NumericalError(KBError, FloatingPointError):
    exit_code = 3
    kind = "numerical"

    def __init__(self, epoch, batch, detail=""):
        self.epoch = epoch
        self.batch = batch
        msg = f"non-finite parameters at epoch {epoch}, batch {batch}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
