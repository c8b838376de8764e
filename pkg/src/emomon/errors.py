"""Exception types shared across the package.

Every error raised by emomon library code derives from :class:`EmomonError`
so callers (and the CLI) can catch one base class.
"""


class EmomonError(Exception):
    """Base class for all emomon errors."""


# ingestion

class MalformedRecord(EmomonError):
    """Input line is not parseable or misses a required field."""


class EmptyText(EmomonError):
    """Tweet text is blank after trimming."""


class StoreUnavailable(EmomonError):
    """Corpus store directory cannot be created, read or written."""


# labeling / annotation

class ConflictingDuplicate(EmomonError):
    """Same (tweet_id, annotator_id) appears twice with different selections."""


class EmptyDataset(EmomonError):
    """No labeled examples were produced."""


class MalformedRow(EmomonError):
    """Survey export row failed validation (carries the line number)."""


class DuplicateAnnotation(EmomonError):
    """Contradictory duplicate annotation in a survey export."""


class UnresolvedTweetId(EmomonError):
    """Annotation references a tweet id with no known text."""


# classification

class DimensionMismatch(EmomonError):
    """Vector dimension does not match the model input dimension."""


class BackendUnreachable(EmomonError):
    """External inference server could not be reached (connect or timeout)."""


class ProtocolViolation(EmomonError):
    """External inference server answered outside the wire contract."""


# training

class LengthMismatch(EmomonError):
    """Score and label lists disagree in length (or are empty)."""


class ClassWithoutPositives(EmomonError):
    """A class has zero positive examples; it cannot be weighted."""


class MissingEmbedding(EmomonError):
    """A tweet id has no embedding vector in the embeddings file."""


# evaluation

class EmptyEvaluation(EmomonError):
    """Evaluation was requested on an empty pair list."""


class NoPositivesAnywhere(EmomonError):
    """No class has a single gold positive; mAP is undefined."""


# monitoring

class UnknownScope(EmomonError):
    """No series exists for the requested scope."""


class InvalidRange(EmomonError):
    """Query range has from > to."""


class IoFailure(EmomonError):
    """Filesystem write failed."""


# service / configuration

class ConfigError(EmomonError):
    """Service or CLI configuration is invalid."""
