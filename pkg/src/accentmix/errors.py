"""Exception hierarchy. Everything raised on purpose derives from AccentmixError."""


class AccentmixError(Exception):
    pass


# audio
class UnsupportedFormat(AccentmixError, ValueError):
    pass


class CorruptFile(AccentmixError, ValueError):
    pass


class InvalidFraming(AccentmixError, ValueError):
    pass


# lpc
class InvalidLag(AccentmixError, ValueError):
    pass


class DegenerateFrame(AccentmixError, ValueError):
    pass


class RootFindingDiverged(AccentmixError, ArithmeticError):
    pass


class ConjugateMismatch(AccentmixError, ValueError):
    pass


class UnstableFilter(AccentmixError, ArithmeticError):
    pass


# augmentation
class InvalidFactor(AccentmixError, ValueError):
    pass


# manifests and mixing
class ParseError(AccentmixError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateId(AccentmixError, ValueError):
    pass


class InfeasibleSplit(AccentmixError, ValueError):
    pass


class DuplicateCorpus(AccentmixError, ValueError):
    pass


class InsufficientData(AccentmixError, ValueError):
    pass


# scoring
class EmptyReference(AccentmixError, ValueError):
    def __init__(self, utterance_id):
        self.utterance_id = utterance_id
        super().__init__(f"reference for {utterance_id!r} is empty after normalization")


class MalformedMatrix(AccentmixError, ValueError):
    pass


class MissingTestset(AccentmixError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
