use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradcore::Tensor;
use crate::scalar::Scalar;

/// Ground cost between two points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostKind {
    /// `‖x − y‖²`
    #[serde(alias = "L2")]
    SquaredL2,
    /// `−⟨x, y⟩`
    #[serde(alias = "Dot")]
    NegativeDot,
}

impl CostKind {
    #[inline]
    pub fn eval<T: Scalar>(self, x: &[T], y: &[T]) -> T {
        match self {
            CostKind::SquaredL2 => x
                .iter()
                .zip(y)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum(),
            CostKind::NegativeDot => -x.iter().zip(y).map(|(&a, &b)| a * b).sum::<T>(),
        }
    }
}

/// `n` points in `R^d`, each carrying mass `1/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud<T> {
    points: Tensor<T>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn new(points: Tensor<T>) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::dims(
                "point cloud",
                format!("{}x{}", points.rows(), points.cols()),
                "at least one point of dimension >= 1",
            ));
        }
        if !points.all_finite() {
            return Err(Error::Config("point cloud has non-finite coordinates".into()));
        }
        Ok(PointCloud { points })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        Self::new(Tensor::from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Tensor<T> {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[T] {
        self.points.row(i)
    }
}

/// Pairwise cost matrix `C[i][j] = c(x_i, y_j)`.
pub fn cost_matrix<T: Scalar>(x: &PointCloud<T>, y: &PointCloud<T>, kind: CostKind) -> Result<Tensor<T>> {
    cost_matrix_raw(x.points(), y.points(), kind)
}

/// Same as [`cost_matrix`] on bare row matrices.
pub fn cost_matrix_raw<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>, kind: CostKind) -> Result<Tensor<T>> {
    if x.cols() != y.cols() {
        return Err(Error::dims(
            "cost_matrix",
            format!("d={}", x.cols()),
            format!("d={}", y.cols()),
        ));
    }
    Ok(Tensor::from_fn(x.rows(), y.rows(), |i, j| {
        kind.eval(x.row(i), y.row(j))
    }))
}
