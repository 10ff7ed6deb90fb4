use super::plan::marginal_l1_violation;
use crate::error::{Error, Result};
use crate::gradcore::Tensor;
use crate::scalar::Scalar;

pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_MAX_ITERATIONS: usize = 50;

#[derive(Clone, Debug)]
pub struct SinkhornProjection<T> {
    pub plan: Tensor<T>,
    /// Max L1 marginal violation of `plan`.
    pub violation: T,
    /// Full row+column sweeps performed.
    pub iterations: usize,
}

/// Alternately rescales rows to sum to `1/n` and columns to `1/m` until the
/// max L1 marginal violation drops below `tol` or `max_iter` sweeps ran.
pub fn sinkhorn_project<T: Scalar>(
    matrix: &Tensor<T>,
    tol: T,
    max_iter: usize,
) -> Result<SinkhornProjection<T>> {
    let (n, m) = matrix.shape();
    if n == 0 || m == 0 {
        return Err(Error::Projection(format!("empty matrix {n}x{m}")));
    }
    if !(tol > T::zero()) {
        return Err(Error::Projection(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(bad) = matrix.data().iter().find(|&&x| !(x > T::zero() && x.is_finite())) {
        return Err(Error::Projection(format!(
            "entries must be strictly positive and finite, found {bad}"
        )));
    }
    let row_target = T::one() / T::of_usize(n);
    let col_target = T::one() / T::of_usize(m);
    let mut plan = matrix.clone();
    let mut iterations = 0;
    loop {
        let violation = marginal_l1_violation(&plan);
        if violation < tol || iterations == max_iter {
            return Ok(SinkhornProjection {
                plan,
                violation,
                iterations,
            });
        }
        for i in 0..n {
            let row = plan.row_mut(i);
            let s: T = row.iter().copied().sum();
            let f = row_target / s;
            row.iter_mut().for_each(|x| *x *= f);
        }
        let cols = plan.col_sums();
        for i in 0..n {
            for (x, &s) in plan.row_mut(i).iter_mut().zip(&cols) {
                *x *= col_target / s;
            }
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_projects_in_one_sweep() {
        let out = sinkhorn_project(&Tensor::filled(2, 3, 1.0f64), 1e-3, 50).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.violation, 0.0);
        for &t in out.plan.data() {
            assert!((t - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn valid_coupling_is_a_fixed_point() {
        let valid = Tensor::from_rows(&[[0.25, 0.25], [0.25, 0.25]]).unwrap();
        let out = sinkhorn_project(&valid, 1e-3, 50).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.plan, valid);
    }

    #[test]
    fn rejects_nonpositive_entries_and_bad_tol() {
        let bad = Tensor::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(matches!(sinkhorn_project(&bad, 1e-3, 50), Err(Error::Projection(_))));
        let neg = Tensor::from_rows(&[[1.0, -2.0]]).unwrap();
        assert!(sinkhorn_project(&neg, 1e-3, 50).is_err());
        assert!(sinkhorn_project(&Tensor::filled(2, 2, 1.0), 0.0, 50).is_err());
    }

    #[test]
    fn stops_at_iteration_cap() {
        let m = Tensor::from_rows(&[[1.0, 1e-6], [1e-6, 1e-6]]).unwrap();
        let out = sinkhorn_project(&m, 1e-15, 2).unwrap();
        assert_eq!(out.iterations, 2);
    }
}
