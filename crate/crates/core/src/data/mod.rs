//! Dataset generation, IDX ingestion and trace CSV export.

mod csv;
mod idx;
mod synthetic;

pub use self::csv::{read_trace_csv, write_trace_csv, TRACE_HEADER};
pub use idx::{
    binary_filter, load_idx, parse_idx_images, parse_idx_labels, write_idx_images,
    write_idx_labels, IdxDataset, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use synthetic::{
    conditioned_quadratic, generate_linear_problem, tridiagonal_mean_row, two_gaussian_logistic,
    Eigenbasis, LogisticSplit, SyntheticLinear, SyntheticSpec,
};
