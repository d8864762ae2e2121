//! Catalog surfaces, closest-point retraction and point sampling.

mod cloud;
mod sampling;
mod surface;

pub use cloud::{
    denseness_indicator, fill_and_separation, fill_distance, separation_distance, CloudMetadata, FillStats, PointCloud,
    FILL_EVAL_SEED,
};
pub use sampling::{
    farthest_point_thinning, narrow_band_lattice, sample_dense, sample_narrow_band, sample_quasi_uniform,
    sample_quasi_uniform_with, sample_torus_grid, sample_torus_square_grid, NarrowBand, POOL_FACTOR,
};
pub use surface::{torus_point, Aabb, Frame, Surface, CYCLIDE_A, CYCLIDE_B, CYCLIDE_D};
