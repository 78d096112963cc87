"""Exception hierarchy shared across the package.

Every operational failure maps to one named error class so CLI/HTTP layers
can emit stable machine-readable codes.
"""

from __future__ import annotations


class CorpuskitError(Exception):
    """Base class for all package errors."""

    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


class ArticleParseError(CorpuskitError):
    code = "ParseError"


class MissingFrontMatter(ArticleParseError):
    code = "MissingFrontMatter"


class MissingArticleId(ArticleParseError):
    code = "MissingArticleId"


class MalformedHeading(ArticleParseError):
    code = "MalformedHeading"


class SchemaInvalid(CorpuskitError):
    code = "SchemaInvalid"


class StorageFailure(CorpuskitError):
    code = "StorageFailure"


class UnknownArticle(CorpuskitError):
    code = "UnknownArticle"


class DuplicateChunkId(CorpuskitError):
    code = "DuplicateChunkId"


class DanglingEntity(CorpuskitError):
    code = "DanglingEntity"


class ExtractorUnavailable(CorpuskitError):
    code = "ExtractorUnavailable"


class EmbedderUnavailable(CorpuskitError):
    code = "EmbedderUnavailable"


class DimensionMismatch(CorpuskitError):
    code = "DimensionMismatch"


class EmptyQuery(CorpuskitError):
    code = "EmptyQuery"


class RewriterUnavailable(CorpuskitError):
    code = "RewriterUnavailable"


class StaleIndex(CorpuskitError):
    code = "StaleIndex"


class InvalidWeights(CorpuskitError):
    code = "InvalidWeights"


class EmptyResult(CorpuskitError):
    code = "EmptyResult"


class UnknownPlaceholder(CorpuskitError):
    code = "UnknownPlaceholder"


class GeneratorUnavailable(CorpuskitError):
    code = "GeneratorUnavailable"


class InvalidPrompt(CorpuskitError):
    code = "InvalidPrompt"


class EmptyObjective(CorpuskitError):
    code = "EmptyObjective"


class StaleDraft(CorpuskitError):
    code = "StaleDraft"


class NoRetrievedChunks(CorpuskitError):
    code = "NoRetrievedChunks"


class ConfigError(CorpuskitError):
    code = "ConfigError"
