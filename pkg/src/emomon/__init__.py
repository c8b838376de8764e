"""Tweet emotion monitor: ingestion, weak labeling, training, evaluation,
daily series aggregation and an HTTP API over six basic emotions."""

from .labeling import EMOTIONS, N_EMOTIONS

__version__ = "0.1.0"

__all__ = ["EMOTIONS", "N_EMOTIONS", "__version__"]
