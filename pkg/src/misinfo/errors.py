"""Exception types shared across the package.

Every error raised by library code derives from MisinfoError so the CLI can
map any data problem to a single exit code.
"""


class MisinfoError(Exception):
    """Base class for all errors raised by this package."""


class MalformedRecord(MisinfoError):
    def __init__(self, line_no: int, reason: str = "", path=None):
        self.line_no = line_no
        self.reason = reason
        self.path = path
        where = f"{path}, line {line_no}" if path else f"line {line_no}"
        msg = f"malformed record at {where}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class DuplicateId(MisinfoError):
    def __init__(self, tweet_id: str):
        self.tweet_id = tweet_id
        super().__init__(f"duplicate tweet id: {tweet_id!r}")


class WrongArity(MisinfoError):
    pass


class SpanOutOfBounds(MisinfoError):
    pass


class TooFewExamples(MisinfoError):
    pass


class NotAHashtag(MisinfoError):
    pass


class MalformedHeader(MisinfoError):
    pass


class DimensionMismatch(MisinfoError):
    pass


class DuplicateWord(MisinfoError):
    def __init__(self, word: str):
        self.word = word
        super().__init__(f"duplicate word in embedding file: {word!r}")


class EmptyVocabulary(MisinfoError):
    pass


class EmptyCorpus(MisinfoError):
    pass


class SingleClassTrainingSet(MisinfoError):
    pass


class LengthMismatch(MisinfoError):
    pass


class EmptySequence(MisinfoError):
    pass


class MissingTags(MisinfoError):
    pass


class MalformedTags(MisinfoError):
    pass


class CorpusMismatch(MisinfoError):
    pass


class DegenerateSamples(MisinfoError):
    pass


class InvalidCounts(MisinfoError):
    pass


class GroupTooSmall(MisinfoError):
    pass


class ShapeMismatch(MisinfoError):
    pass


class UnsupportedVersion(MisinfoError):
    def __init__(self, version):
        self.version = version
        super().__init__(f"unsupported model file format_version: {version!r}")


class CorruptFile(MisinfoError):
    pass
