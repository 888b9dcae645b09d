//! Fragmentary datasets: features, masks, response patterns and labels, with
//! CSV I/O, min-max normalization and pattern-stratified splitting.

mod csv_io;
mod dataset;
mod normalize;
mod registry;
mod split;

pub use csv_io::{load_csv, read_csv, save_dataset, write_csv, DataSchema, GroupSpec};
pub use dataset::{
    apply_mask, compose_imputed, onehot_pattern, Columns, FeatureGroups, LabelKind, MaskedDataset,
    MaskedInput, PatternPolicy,
};
pub use normalize::{normalize, NormReport, NormStats};
pub(crate) use registry::mask_string;
pub use registry::PatternRegistry;
pub use split::{stratified_folds, stratified_split, stratified_split_indices};

use crate::numeric::NumericError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("i/o: {0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("no data rows")]
    Empty,
    #[error("line {line}: expected {expected} fields, found {got}")]
    Ragged {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: column {column:?} holds non-numeric value {value:?}")]
    NonNumeric {
        line: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: label is missing")]
    MissingLabel { row: usize },
    #[error("row {row}: label {value} is not 0 or 1")]
    InvalidLabel { row: usize, value: f64 },
    #[error("row {row}: mask {mask} matches no registered pattern")]
    UnknownPattern { row: usize, mask: String },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {0:?} has no observed values")]
    UnobservedColumn(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}
