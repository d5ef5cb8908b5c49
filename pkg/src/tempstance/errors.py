"""Exception types raised across the package."""


class TempStanceError(Exception):
    """Base class for all tempstance errors."""


class ConfigInvalid(TempStanceError):
    pass


class YearEmpty(TempStanceError):
    pass


class EmptyVocabulary(TempStanceError):
    pass


class BothEmpty(TempStanceError):
    pass


class EmptyCorpus(TempStanceError):
    pass


class EmptySlice(TempStanceError):
    pass


class IdOutOfRange(TempStanceError):
    pass


class FormatError(TempStanceError):
    """Malformed model or data file.

    Carries the 1-based line number and, when known, the offending word.
    """

    def __init__(self, message, line=None, word=None):
        detail = message
        if line is not None:
            detail += f" (line {line})"
        if word is not None:
            detail += f" (word {word!r})"
        super().__init__(detail)
        self.line = line
        self.word = word


class MissingSlice(TempStanceError):
    def __init__(self, year):
        super().__init__(f"no temporal slice for year {year}")
        self.year = year


class ShapeMismatch(TempStanceError):
    pass


class EmptyTraining(TempStanceError):
    pass


class LengthMismatch(TempStanceError):
    pass


class MissingYear(TempStanceError):
    pass


class MissingBaseline(TempStanceError):
    pass


class ZeroBaseline(TempStanceError):
    pass
