"""Cancer-misinformation tweet pipeline: preprocessing, relevance
classification, anchor tagging, cure screening and corpus statistics."""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    AnnotatedTweet,
    Split,
    Token,
    Tweet,
    load_annotated,
    load_tweets,
    merge_annotations,
    spans_to_bio,
    split_dataset,
)
from .embeddings import (  # noqa: F401
    EmbeddingTable,
    SkipgramConfig,
    cosine,
    load_embeddings,
    lookup,
    save_embeddings,
    train_skipgram,
)
from .preprocess import CleanConfig, clean, segment_hashtag, stem, tokenize  # noqa: F401
