use crate::gradcore::Tensor;
use crate::scalar::Scalar;

/// A coupling between two uniform point clouds together with its objective.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan<T> {
    matrix: Tensor<T>,
    cost: T,
}

impl<T: Scalar> TransportPlan<T> {
    /// Wraps `matrix` and evaluates `Σ T_ij C_ij`.
    pub fn with_cost(matrix: Tensor<T>, cost_matrix: &Tensor<T>) -> Self {
        let cost = transport_objective(&matrix, cost_matrix);
        TransportPlan { matrix, cost }
    }

    pub fn matrix(&self) -> &Tensor<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Tensor<T> {
        self.matrix
    }

    /// Objective value under the cost matrix the plan was solved for.
    pub fn cost(&self) -> T {
        self.cost
    }

    pub fn support_size(&self) -> usize {
        self.matrix.data().iter().filter(|&&t| t > T::zero()).count()
    }

    pub fn marginal_violation(&self) -> T {
        marginal_violation(&self.matrix)
    }

    pub fn transpose(&self) -> Self {
        TransportPlan {
            matrix: self.matrix.transpose(),
            cost: self.cost,
        }
    }
}

pub fn transport_objective<T: Scalar>(plan: &Tensor<T>, cost: &Tensor<T>) -> T {
    debug_assert_eq!(plan.shape(), cost.shape());
    plan.data().iter().zip(cost.data()).map(|(&t, &c)| t * c).sum()
}

/// Largest absolute deviation of any row sum from `1/n` or column sum from `1/m`.
pub fn marginal_violation<T: Scalar>(plan: &Tensor<T>) -> T {
    let (n, m) = plan.shape();
    let a = T::one() / T::of_usize(n);
    let b = T::one() / T::of_usize(m);
    let rows = plan.row_sums().into_iter().map(|s| (s - a).abs());
    let cols = plan.col_sums().into_iter().map(|s| (s - b).abs());
    rows.chain(cols).fold(T::zero(), T::max)
}

/// Largest L1 deviation of the row-sum or column-sum vector from its target.
pub fn marginal_l1_violation<T: Scalar>(plan: &Tensor<T>) -> T {
    let (n, m) = plan.shape();
    let a = T::one() / T::of_usize(n);
    let b = T::one() / T::of_usize(m);
    let rows: T = plan.row_sums().into_iter().map(|s| (s - a).abs()).sum();
    let cols: T = plan.col_sums().into_iter().map(|s| (s - b).abs()).sum();
    rows.max(cols)
}

/// Checks both marginals within `tol` and entries within `[0, 1]`.
pub fn is_feasible<T: Scalar>(plan: &Tensor<T>, tol: T) -> bool {
    plan.data().iter().all(|&t| t >= T::zero() && t <= T::one()) && marginal_violation(plan) <= tol
}
