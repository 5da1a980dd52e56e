//! Dataset files, preprocessing and neighbor sets.

pub mod load;
pub mod neighbors;
pub mod preprocess;

pub use load::{load, load_with_classes, parse, write_delimited, Format, LabelColumn, Loaded};
pub use neighbors::{build_neighbor_sets, NeighborMode};
pub use preprocess::{fit_pca, fit_zscore, Pipeline, Preprocessor};
