pub mod matrix;
pub mod rng;

pub use matrix::{cholesky, dft_matrix, inner, norm_sqr, solve_hermitian_pd, solve_real, CMatrix};
pub use rng::{sample_cgauss, stream_id, RngStream};

/// 10·log10 of a linear quantity.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
