//! Synthetic series, feature extraction, dataset splitting and clustering.

mod dataset;
mod features;
mod kmeans;
mod series;
mod synth;

pub use dataset::{split, Dataset, Example, SplitTag};
pub use features::{featurize, pi1_normalize, FeatureVector, DEFAULT_THETA};
pub use kmeans::{kmeans, kmeans_with, ClusterResult};
pub use series::{load_series_csv, read_series_csv, save_series_csv, write_series_csv, RawSeries};
pub use synth::{
    generate_synthetic, generate_synthetic_with, sample_laplace, Family, FamilyCounts, GeneratorConfig, NoiseLaw,
    SyntheticSeries, GENERATOR_SCHEMA_VERSION,
};
