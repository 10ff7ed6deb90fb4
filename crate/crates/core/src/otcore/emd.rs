//! Exact discrete optimal transport between uniform marginals.
//!
//! The problem is solved as a transportation problem with integer masses:
//! every row supplies `m` units and every column demands `n` units, so all
//! basic solutions carry integer flows and pivoting involves no rounding.
//! The plan is the flow divided by `n·m`. Entering and leaving variables are
//! chosen with Bland's rule (lowest cell index), which rules out cycling on
//! the heavily degenerate uniform-marginal polytope.

use std::collections::VecDeque;

use super::plan::TransportPlan;
use crate::error::{Error, Result};
use crate::gradcore::Tensor;
use crate::scalar::Scalar;

const NONE: usize = usize::MAX;

/// Optimal plan for `min Σ T_ij C_ij` over couplings with row sums `1/n` and
/// column sums `1/m`. The result is a vertex of the coupling polytope, so it
/// has at most `n + m − 1` nonzero entries.
pub fn emd_exact<T: Scalar>(cost: &Tensor<T>) -> Result<TransportPlan<T>> {
    let (n, m) = cost.shape();
    if n == 0 || m == 0 {
        return Err(Error::Solver(format!("empty cost matrix {n}x{m}")));
    }
    if !cost.all_finite() {
        return Err(Error::Solver("cost matrix has non-finite entries".into()));
    }
    let mut solver = Simplex::new(cost, n, m);
    solver.solve();
    let total = T::of_usize(n) * T::of_usize(m);
    let mut plan = Tensor::zeros(n, m);
    for &(i, j) in &solver.basis {
        let f = solver.flow[i * m + j];
        if f > 0 {
            plan.set(i, j, T::of_usize(f as usize) / total);
        }
    }
    Ok(TransportPlan::with_cost(plan, cost))
}

struct Simplex<'a, T> {
    cost: &'a Tensor<T>,
    n: usize,
    m: usize,
    flow: Vec<i64>,
    is_basic: Vec<bool>,
    basis: Vec<(usize, usize)>,
    tol: T,
    // Scratch reused across pivots.
    adj: Vec<Vec<usize>>,
    u: Vec<T>,
    v: Vec<T>,
    mark: Vec<usize>,
    queue: VecDeque<usize>,
    path: Vec<(usize, usize)>,
}

impl<'a, T: Scalar> Simplex<'a, T> {
    fn new(cost: &'a Tensor<T>, n: usize, m: usize) -> Self {
        let scale = T::one() + cost.max_abs();
        let tol = T::epsilon() * T::of_usize(4 * (n + m + 8)) * scale;
        let mut s = Simplex {
            cost,
            n,
            m,
            flow: vec![0; n * m],
            is_basic: vec![false; n * m],
            basis: Vec::with_capacity(n + m - 1),
            tol,
            adj: vec![Vec::new(); n + m],
            u: vec![T::zero(); n],
            v: vec![T::zero(); m],
            mark: vec![NONE; n + m],
            queue: VecDeque::with_capacity(n + m),
            path: Vec::with_capacity(n + m),
        };
        s.northwest_corner();
        s
    }

    /// Staircase start: each step advances exactly one of row or column, so
    /// the `n + m − 1` visited cells always form a spanning tree, even when a
    /// row and a column run out simultaneously (a zero-flow basic cell).
    fn northwest_corner(&mut self) {
        let (n, m) = (self.n, self.m);
        let mut supply = vec![m as i64; n];
        let mut demand = vec![n as i64; m];
        let (mut i, mut j) = (0, 0);
        loop {
            let f = supply[i].min(demand[j]);
            supply[i] -= f;
            demand[j] -= f;
            self.flow[i * m + j] = f;
            self.is_basic[i * m + j] = true;
            self.basis.push((i, j));
            if i == n - 1 && j == m - 1 {
                break;
            }
            if (supply[i] == 0 && i < n - 1) || j == m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(self.basis.len(), n + m - 1);
    }

    /// Tree nodes: rows `0..n`, columns `n..n+m`.
    fn rebuild_adjacency(&mut self) {
        self.adj.iter_mut().for_each(Vec::clear);
        for &(i, j) in &self.basis {
            self.adj[i].push(self.n + j);
            self.adj[self.n + j].push(i);
        }
    }

    fn potentials(&mut self) {
        let n = self.n;
        self.mark.fill(NONE);
        self.queue.clear();
        self.queue.push_back(0);
        self.mark[0] = 0;
        self.u[0] = T::zero();
        while let Some(node) = self.queue.pop_front() {
            for &next in &self.adj[node] {
                if self.mark[next] != NONE {
                    continue;
                }
                self.mark[next] = node;
                if node < n {
                    let j = next - n;
                    self.v[j] = self.cost.get(node, j) - self.u[node];
                } else {
                    let j = node - n;
                    self.u[next] = self.cost.get(next, j) - self.v[j];
                }
                self.queue.push_back(next);
            }
        }
    }

    /// Nonbasic cell with negative reduced cost: the most negative one, or
    /// the lowest-index one when `bland` is set. Ties go to the lower index.
    fn entering(&self, bland: bool) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), T)> = None;
        for i in 0..self.n {
            for j in 0..self.m {
                if self.is_basic[i * self.m + j] {
                    continue;
                }
                let reduced = self.cost.get(i, j) - self.u[i] - self.v[j];
                if reduced < -self.tol {
                    if bland {
                        return Some((i, j));
                    }
                    if best.is_none_or(|(_, r)| reduced < r) {
                        best = Some(((i, j), reduced));
                    }
                }
            }
        }
        best.map(|(cell, _)| cell)
    }

    /// Tree path from column `j` back to row `i`, as a list of basic cells.
    fn cycle_cells(&mut self, i: usize, j: usize) {
        let n = self.n;
        self.mark.fill(NONE);
        self.mark[i] = i;
        self.queue.clear();
        self.queue.push_back(i);
        let target = n + j;
        while let Some(node) = self.queue.pop_front() {
            if node == target {
                break;
            }
            for &next in &self.adj[node] {
                if self.mark[next] == NONE {
                    self.mark[next] = node;
                    self.queue.push_back(next);
                }
            }
        }
        self.path.clear();
        let mut node = target;
        while node != i {
            let prev = self.mark[node];
            let cell = if node < n { (node, prev - n) } else { (prev, node - n) };
            self.path.push(cell);
            node = prev;
        }
    }

    fn solve(&mut self) {
        // Dantzig pricing, switching to Bland's rule while pivots stall so
        // degenerate cycling cannot occur.
        let stall_limit = self.n + self.m;
        let mut stalled = 0;
        loop {
            self.rebuild_adjacency();
            self.potentials();
            let Some((ei, ej)) = self.entering(stalled >= stall_limit) else {
                return;
            };
            // Walking from the entering column back to its row, path cells
            // alternate losing (−) and gaining (+) flow, starting with −.
            self.cycle_cells(ei, ej);
            let m = self.m;
            let mut leave: Option<(usize, usize)> = None;
            let mut theta = i64::MAX;
            for &(i, j) in self.path.iter().step_by(2) {
                let f = self.flow[i * m + j];
                let idx = i * m + j;
                let better = match leave {
                    None => true,
                    Some((li, lj)) => f < theta || (f == theta && idx < li * m + lj),
                };
                if better {
                    theta = f;
                    leave = Some((i, j));
                }
            }
            let (li, lj) = leave.expect("cycle has at least one losing cell");
            for (k, &(i, j)) in self.path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[i * m + j] -= theta;
                } else {
                    self.flow[i * m + j] += theta;
                }
            }
            self.flow[ei * m + ej] = theta;
            self.is_basic[li * m + lj] = false;
            self.is_basic[ei * m + ej] = true;
            let slot = self
                .basis
                .iter()
                .position(|&c| c == (li, lj))
                .expect("leaving cell is basic");
            self.basis[slot] = (ei, ej);
            stalled = if theta == 0 { stalled + 1 } else { 0 };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otcore::{cost_matrix, CostKind, PointCloud};

    #[test]
    fn identical_clouds_cost_zero() {
        let x = PointCloud::from_rows(&[[0.0f64, 1.0], [2.0, -1.0], [5.0, 5.0], [0.5, 0.5]]).unwrap();
        let c = cost_matrix(&x, &x, CostKind::SquaredL2).unwrap();
        let plan = emd_exact(&c).unwrap();
        assert!(plan.cost().abs() < 1e-12);
        assert!(plan.marginal_violation() < 1e-12);
    }

    #[test]
    fn one_to_two_forced_plan() {
        let c = Tensor::from_rows(&[[1.0, 1.0]]).unwrap();
        let plan = emd_exact(&c).unwrap();
        assert_eq!(plan.matrix().data(), &[0.5, 0.5]);
        assert_eq!(plan.cost(), 1.0);
    }

    #[test]
    fn vertex_support_bound() {
        let c = Tensor::from_fn(4, 7, |i, j| ((i * 7 + j) * 37 % 11) as f64 - 3.0);
        let plan = emd_exact(&c).unwrap();
        assert!(plan.support_size() <= 4 + 7 - 1);
        assert!(plan.marginal_violation() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let c = Tensor::from_rows(&[[1.0, f64::INFINITY]]).unwrap();
        assert!(matches!(emd_exact(&c), Err(Error::Solver(_))));
        assert!(emd_exact(&Tensor::<f64>::zeros(0, 3)).is_err());
    }

    #[test]
    fn degenerate_all_equal_costs() {
        let c = Tensor::filled(3, 3, 2.5f64);
        let plan = emd_exact(&c).unwrap();
        assert!((plan.cost() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn single_precision_solves() {
        let c: Tensor<f32> = Tensor::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let plan = emd_exact(&c).unwrap();
        assert_eq!(plan.cost(), 0.0);
        assert_eq!(plan.matrix().data(), &[0.5, 0.0, 0.0, 0.5]);
    }
}
