"""Co-occurrence pattern discovery and attribution for categorical incident data.

The package clusters rows of a categorical dataset in a joint
correspondence-analysis embedding, fits tree ensembles that predict a
target variable, and attributes per-row predictions to variables with
exact Shapley values.
"""

__version__ = "0.1.0"

from .dataset import (
    CategoricalDataset,
    ContingencyMatrix,
    FilterReport,
    IndicatorMatrix,
    Schema,
    Variable,
    contingency,
    indicator,
    load_csv,
    skew_filter,
    write_csv,
)
from .errors import ConfigError, DataError, NumericalError, PatticaError

__all__ = [
    "__version__",
    "CategoricalDataset",
    "ContingencyMatrix",
    "FilterReport",
    "IndicatorMatrix",
    "Schema",
    "Variable",
    "contingency",
    "indicator",
    "load_csv",
    "skew_filter",
    "write_csv",
    "ConfigError",
    "DataError",
    "NumericalError",
    "PatticaError",
]
