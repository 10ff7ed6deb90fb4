//! Optimal transport between uniform point clouds.
//!
//! [`emd_exact`] is the production solver. [`sinkhorn_project`] only pushes a
//! positive matrix onto the marginal constraints (used to draw random
//! couplings), and [`oracle`] holds exhaustive solvers for verification.

mod cloud;
mod emd;
pub mod oracle;
mod plan;
mod sinkhorn;

pub use cloud::{cost_matrix, cost_matrix_raw, CostKind, PointCloud};
pub use emd::emd_exact;
pub use plan::{is_feasible, marginal_l1_violation, marginal_violation, transport_objective, TransportPlan};
pub use sinkhorn::{sinkhorn_project, SinkhornProjection, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};

use crate::error::Result;
use crate::scalar::Scalar;

/// Wasserstein discrepancy `min_T Σ T_ij c(x_i, y_j)` and its optimal plan.
///
/// For [`CostKind::NegativeDot`] the value is the minimized negative inner
/// product, i.e. minus the maximal transported similarity.
pub fn wasserstein<T: Scalar>(
    x: &PointCloud<T>,
    y: &PointCloud<T>,
    kind: CostKind,
) -> Result<(T, TransportPlan<T>)> {
    let cost = cost_matrix(x, y, kind)?;
    let plan = emd_exact(&cost)?;
    Ok((plan.cost(), plan))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_distance_is_zero() {
        let x = PointCloud::from_rows(&[[1.0f64, 2.0], [-3.0, 0.5], [0.0, 0.0]]).unwrap();
        let (w, plan) = wasserstein(&x, &x, CostKind::SquaredL2).unwrap();
        assert!(w.abs() < 1e-12);
        assert!(plan.marginal_violation() < 1e-12);
    }

    #[test]
    fn point_to_two_points() {
        let x = PointCloud::from_rows(&[[0.0f64, 0.0]]).unwrap();
        let y = PointCloud::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let (w, plan) = wasserstein(&x, &y, CostKind::SquaredL2).unwrap();
        assert_eq!(plan.matrix().data(), &[0.5, 0.5]);
        assert!((w - 1.0).abs() < 1e-15);
    }
}
