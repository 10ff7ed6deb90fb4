use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar the numerical core is written against: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and configuration values.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Conversion from a count; exact for the sizes used here.
    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("count representable in scalar type")
    }

    /// `c += a · b` for an `m×k` by `k×n` product; each operand is given by
    /// its slice plus row and column strides, so transposes cost nothing.
    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: (&[Self], isize, isize),
        b: (&[Self], isize, isize),
        c: (&mut [Self], isize, isize),
    ) {
        let at = |s: &[Self], r: isize, cs: isize, i: usize, j: usize| s[i * r as usize + j * cs as usize];
        let (cd, rsc, csc) = c;
        for i in 0..m {
            for j in 0..n {
                let mut acc = Self::zero();
                for p in 0..k {
                    acc += at(a.0, a.1, a.2, i, p) * at(b.0, b.1, b.2, p, j);
                }
                cd[i * rsc as usize + j * csc as usize] += acc;
            }
        }
    }
}

macro_rules! blas_scalar {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm_acc(
                m: usize,
                k: usize,
                n: usize,
                a: (&[Self], isize, isize),
                b: (&[Self], isize, isize),
                c: (&mut [Self], isize, isize),
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
                    if rows == 0 || cols == 0 {
                        0
                    } else {
                        (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
                    }
                };
                assert!(a.0.len() >= span(m, k, a.1, a.2));
                assert!(b.0.len() >= span(k, n, b.1, b.2));
                assert!(c.0.len() >= span(m, n, c.1, c.2));
                // SAFETY: the asserts above keep every strided access in bounds.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.0.as_ptr(),
                        a.1,
                        a.2,
                        b.0.as_ptr(),
                        b.1,
                        b.2,
                        1.0,
                        c.0.as_mut_ptr(),
                        c.1,
                        c.2,
                    );
                }
            }
        }
    };
}

blas_scalar!(f32, matrixmultiply::sgemm);
blas_scalar!(f64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_matches_naive_loops_with_strides() {
        // a is 2x3 stored transposed (column-major), b is 3x2 row-major.
        let a_cm = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let b = [1.0, -1.0, 0.5, 2.0, -3.0, 0.0];
        let mut fast = [10.0; 4];
        f64::gemm_acc(2, 3, 2, (&a_cm, 1, 2), (&b, 2, 1), (&mut fast, 2, 1));
        assert_eq!(fast, [10.0 + 1.0 + 1.0 - 9.0, 10.0 - 1.0 + 4.0, 10.0 + 4.0 + 2.5 - 18.0, 10.0 - 4.0 + 10.0]);
    }
}
