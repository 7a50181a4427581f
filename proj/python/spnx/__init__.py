"""Sum-product network outlier scoring and subspace explanations."""

from ._core import (
    DataError,
    Dataset,
    Error,
    ExplainConfig,
    GenConfig,
    LabeledDataset,
    LearnConfig,
    Model,
    ModelError,
    QueryError,
    f1_dims,
    generate,
    load_csv,
    parse_csv,
    read_labeled,
    run_benchmark,
    write_labeled,
)

__all__ = [
    "DataError",
    "Dataset",
    "Error",
    "ExplainConfig",
    "GenConfig",
    "LabeledDataset",
    "LearnConfig",
    "Model",
    "ModelError",
    "QueryError",
    "f1_dims",
    "generate",
    "load_csv",
    "parse_csv",
    "read_labeled",
    "run_benchmark",
    "write_labeled",
]
