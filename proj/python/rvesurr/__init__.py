# SPDX-License-Identifier: Apache-2.0
"""RVE state-variable surrogates: path generation, micro-model data, PCA and GRU surrogates."""

from ._rvesurr import (
    DimensionMismatch,
    DomainError,
    Error,
    FormatError,
    InvalidInput,
    MissingArtifact,
    PcaModel,
    SurrogateBundle,
    dense_pair_parameters,
    evaluate,
    fit_pca,
    generate_dataset,
    group_ranges,
    gru_parameters,
    pad_or_trim,
    pre_trim,
    random_path,
    read_bundle,
    read_pca,
    read_records,
    rnn_parameter_count,
    run_stage,
    split_outputs,
    stage_names,
    u_to_e,
    write_pca,
    write_records,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
