"""Joint Chinese intent detection and slot filling with gated character/word fusion.

The heavy lifting lives in the C++ extension ``slu_adapter._core``; this
package re-exports its operations.
"""

from ._core import (
    align_chars_to_words,
    compute_metrics,
    evaluate,
    extract_chunks,
    gradcheck,
    parse_dataset,
    predict,
    segment,
    train,
    word_adapter,
)

__all__ = [
    "align_chars_to_words",
    "compute_metrics",
    "evaluate",
    "extract_chunks",
    "gradcheck",
    "parse_dataset",
    "predict",
    "segment",
    "train",
    "word_adapter",
]
