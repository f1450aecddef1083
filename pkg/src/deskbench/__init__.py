"""Desk-scale ML benchmarking harness: dense classification, text polarity
preparation, tabular+text regression, local and master-worker distributed runs."""

from . import artifacts, dataio, distbench, evaluation, gbt, linmodels, mlp, prep, textfeat
from .errors import ConfigError, DataFormatError, DeskbenchError, ProtocolError

__version__ = "0.1.0"

__all__ = [
    "artifacts",
    "dataio",
    "distbench",
    "evaluation",
    "gbt",
    "linmodels",
    "mlp",
    "prep",
    "textfeat",
    "ConfigError",
    "DataFormatError",
    "DeskbenchError",
    "ProtocolError",
    "__version__",
]
