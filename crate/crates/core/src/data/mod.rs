//! Benchmark targets, samplers, datasets and file formats.

mod dataset;
mod functions;
mod io;
mod sampling;

pub use dataset::{AffineMap, Dataset, Normalization, NormalizationScheme, SplitTag};
pub use functions::{f1, f2, f3, f4, TestFunction};
pub use io::{
    convert_grid_dump, load_elevation_grid, load_point_cloud, parse_dataset_csv, parse_point_cloud,
    write_atomic, write_dataset_csv,
};
pub use sampling::{grid, latin_hypercube, linspace, sample_uniform, Domain};
