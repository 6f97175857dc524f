//! Training algorithms behind a shared primal-step / dual-step contract.

mod adam;
mod ssl_alm;
mod ssw;

pub use adam::AdamState;
pub use ssl_alm::{SslAlm, SslAlmConfig, SslAlmState};
pub use ssw::{constraint_estimate, epsilon_schedule, Branch, Ssw, SswConfig, SswState};

/// Euclidean projection onto the nonnegative orthant: componentwise max(v, 0).
pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}
