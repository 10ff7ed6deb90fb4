//! Exhaustive reference solvers for small transport problems.
//!
//! These enumerate the vertices of the coupling polytope directly and share
//! no code with [`emd_exact`](super::emd_exact); they exist to cross-check it.

use crate::error::{Error, Result};
use crate::gradcore::Tensor;
use crate::scalar::Scalar;

pub const MAX_SIDE: usize = 6;

/// Optimal objective by enumeration: permutations when `n == m`, otherwise
/// every spanning-tree basis of the transportation polytope.
pub fn brute_force<T: Scalar>(cost: &Tensor<T>) -> Result<T> {
    let (n, m) = cost.shape();
    if n == 0 || m == 0 || n > MAX_SIDE || m > MAX_SIDE {
        return Err(Error::Usage(format!(
            "brute-force oracle supports 1..={MAX_SIDE} points per side, got {n}x{m}"
        )));
    }
    if n == m {
        Ok(permutation_min(cost))
    } else {
        Ok(vertex_enumeration_min(cost))
    }
}

/// `min_σ (1/n) Σ_i C[i][σ(i)]` over all `n!` permutations.
pub fn permutation_min<T: Scalar>(cost: &Tensor<T>) -> T {
    let n = cost.rows();
    assert_eq!(n, cost.cols(), "permutation oracle needs a square matrix");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = T::infinity();
    permute(&mut perm, 0, cost, &mut best);
    best / T::of_usize(n)
}

fn permute<T: Scalar>(perm: &mut [usize], k: usize, cost: &Tensor<T>, best: &mut T) {
    if k == perm.len() {
        let total: T = perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
        if total < *best {
            *best = total;
        }
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, cost, best);
        perm.swap(k, i);
    }
}

/// Minimum objective over all basic feasible solutions. Each choice of
/// `n + m − 1` cells forming a spanning tree of the row/column bipartite
/// graph determines a unique flow; feasible (nonnegative) ones are vertices.
pub fn vertex_enumeration_min<T: Scalar>(cost: &Tensor<T>) -> T {
    let mut best = T::infinity();
    for_each_vertex(cost, |_, value| {
        if value < best {
            best = value;
        }
    });
    best
}

/// Distinct vertex plans whose objective is within `tol` of the optimum.
/// The optimum is unique exactly when one plan is returned.
pub fn optimal_vertices<T: Scalar>(cost: &Tensor<T>, tol: T) -> Vec<Tensor<T>> {
    let (n, m) = cost.shape();
    let mut found: Vec<(T, Vec<i64>)> = Vec::new();
    for_each_vertex(cost, |flow, value| {
        if !found.iter().any(|(_, f)| f == flow) {
            found.push((value, flow.to_vec()));
        }
    });
    let best = found.iter().map(|(v, _)| *v).fold(T::infinity(), T::min);
    let total = T::of_usize(n) * T::of_usize(m);
    found
        .into_iter()
        .filter(|(v, _)| *v <= best + tol)
        .map(|(_, f)| {
            let data = f.iter().map(|&x| T::of_usize(x as usize) / total).collect();
            Tensor::from_vec(n, m, data).expect("flow has n*m entries")
        })
        .collect()
}

/// Calls `visit(flow, value)` for every feasible basis, where `flow` is the
/// dense `n×m` integer flow (row supply `m`, column demand `n`).
fn for_each_vertex<T: Scalar>(cost: &Tensor<T>, mut visit: impl FnMut(&[i64], T)) {
    let (n, m) = cost.shape();
    let mut search = TreeSearch {
        n,
        m,
        cost,
        chosen: Vec::with_capacity(n + m - 1),
        dsu: Dsu::new(n + m),
        flow: vec![0; n * m],
        visit: &mut visit,
    };
    search.recurse(0);
}

struct TreeSearch<'a, T, F> {
    n: usize,
    m: usize,
    cost: &'a Tensor<T>,
    chosen: Vec<usize>,
    dsu: Dsu,
    flow: Vec<i64>,
    visit: &'a mut F,
}

impl<T: Scalar, F: FnMut(&[i64], T)> TreeSearch<'_, T, F> {
    fn recurse(&mut self, next: usize) {
        let need = self.n + self.m - 1 - self.chosen.len();
        if need == 0 {
            self.evaluate();
            return;
        }
        let total = self.n * self.m;
        if total - next < need {
            return;
        }
        let (i, j) = (next / self.m, next % self.m);
        if let Some(undo) = self.dsu.union(i, self.n + j) {
            self.chosen.push(next);
            self.recurse(next + 1);
            self.chosen.pop();
            self.dsu.undo(undo);
        }
        self.recurse(next + 1);
    }

    /// Peels leaves of the tree to read off its flow; integer masses keep it exact.
    fn evaluate(&mut self) {
        let (n, m) = (self.n, self.m);
        let mut balance: Vec<i64> = (0..n).map(|_| m as i64).chain((0..m).map(|_| -(n as i64))).collect();
        let mut degree = vec![0usize; n + m];
        let mut alive = vec![true; self.chosen.len()];
        for &c in &self.chosen {
            degree[c / m] += 1;
            degree[n + c % m] += 1;
        }
        let mut total = T::zero();
        self.flow.iter_mut().for_each(|f| *f = 0);
        for _ in 0..self.chosen.len() {
            let Some((k, leaf)) = self.chosen.iter().enumerate().find_map(|(k, &c)| {
                if !alive[k] {
                    return None;
                }
                let (r, col) = (c / m, n + c % m);
                if degree[r] == 1 {
                    Some((k, r))
                } else if degree[col] == 1 {
                    Some((k, col))
                } else {
                    None
                }
            }) else {
                return;
            };
            let c = self.chosen[k];
            let (r, col) = (c / m, n + c % m);
            // Flow from row to column that zeroes the leaf's balance.
            let flow = if leaf == r { balance[r] } else { -balance[col] };
            if flow < 0 {
                return;
            }
            balance[r] -= flow;
            balance[col] += flow;
            degree[r] -= 1;
            degree[col] -= 1;
            alive[k] = false;
            self.flow[c] = flow;
            total += T::of_usize(flow as usize) * self.cost.get(c / m, c % m);
        }
        let value = total / (T::of_usize(n) * T::of_usize(m));
        (self.visit)(&self.flow, value);
    }
}

/// Union-find with rollback (union by size, no path compression).
struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    /// Returns the absorbed root, or `None` if already connected.
    fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        Some(rb)
    }

    fn undo(&mut self, absorbed: usize) {
        let root = self.parent[absorbed];
        self.size[root] -= self.size[absorbed];
        self.parent[absorbed] = absorbed;
    }
}
