//! Noise-contrastive regularizer that keeps prototype clouds from collapsing.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gradcore::NodeId;
use crate::otcore::{cost_matrix_raw, marginal_l1_violation, sinkhorn_project, CostKind, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use crate::{Real, Tape, Tensor, TransportPlan};

pub const DEFAULT_SINKHORN_NEGATIVES: usize = 5;
pub const DEFAULT_PERMUTED_NEGATIVES: usize = 5;

/// Contrastive transports for one optimal plan.
#[derive(Clone, Debug)]
pub struct NegativeSet {
    /// Sinkhorn projections of random positive matrices.
    pub sinkhorn: Vec<Tensor>,
    /// Column permutations of the optimal plan.
    pub permuted: Vec<Tensor>,
}

impl NegativeSet {
    pub fn len(&self) -> usize {
        self.sinkhorn.len() + self.permuted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.sinkhorn.iter().chain(&self.permuted)
    }
}

/// Projects a matrix of uniform `[0, 10)` entries onto the coupling polytope.
/// Exact zeros are redrawn so the projection stays well defined.
pub fn sinkhorn_negative<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Tensor> {
    let raw = Tensor::from_fn(n, m, |_, _| loop {
        let v: Real = rng.gen_range(0.0..10.0);
        if v > 0.0 {
            break v;
        }
    });
    Ok(sinkhorn_project(&raw, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)?.plan)
}

/// Reorders the columns of `plan` by a uniformly random non-identity permutation.
/// Returns `None` when `plan` has a single column.
pub fn permuted_negative<R: Rng + ?Sized>(plan: &Tensor, rng: &mut R) -> Option<Tensor> {
    let m = plan.cols();
    if m < 2 {
        return None;
    }
    let identity: Vec<usize> = (0..m).collect();
    let mut perm = identity.clone();
    while perm == identity {
        perm.shuffle(rng);
    }
    Some(Tensor::from_fn(plan.rows(), m, |i, j| plan.get(i, perm[j])))
}

/// Draws `k_sink` Sinkhorn negatives and `k_perm` permuted negatives for `plan`.
/// Permuted slots fall back to Sinkhorn negatives when `plan` has one column.
pub fn make_negatives<R: Rng + ?Sized>(
    plan: &Tensor,
    k_sink: usize,
    k_perm: usize,
    rng: &mut R,
) -> Result<NegativeSet> {
    let (n, m) = plan.shape();
    let mut set = NegativeSet {
        sinkhorn: Vec::with_capacity(k_sink + k_perm),
        permuted: Vec::with_capacity(k_perm),
    };
    for _ in 0..k_sink {
        set.sinkhorn.push(sinkhorn_negative(n, m, rng)?);
    }
    for _ in 0..k_perm {
        match permuted_negative(plan, rng) {
            Some(p) => set.permuted.push(p),
            None => set.sinkhorn.push(sinkhorn_negative(n, m, rng)?),
        }
    }
    Ok(set)
}

/// Sum over prototypes of `log[e^{−W_T*} / (e^{−W_T*} + Σ_neg e^{−W_T})]`, with
/// every plan fixed and unscaled costs. The value is to be maximized.
///
/// Fails if a negative transports more cheaply than the optimal plan beyond
/// what its marginal violation allows.
pub fn nc_loss(
    tape: &mut Tape,
    cloud: NodeId,
    prototypes: &[NodeId],
    plans: &[TransportPlan],
    negatives: &[NegativeSet],
    cost: CostKind,
) -> Result<NodeId> {
    if plans.len() != prototypes.len() || negatives.len() != prototypes.len() {
        return Err(Error::Internal(format!(
            "nc term needs one plan and negative set per prototype ({} prototypes, {} plans, {} sets)",
            prototypes.len(),
            plans.len(),
            negatives.len()
        )));
    }
    let mut terms = Vec::with_capacity(prototypes.len());
    for ((&q, plan), negs) in prototypes.iter().zip(plans).zip(negatives) {
        let mut all = Vec::with_capacity(1 + negs.len());
        all.push(plan.matrix().clone());
        all.extend(negs.iter().cloned());
        check_optimality(tape.value(cloud), tape.value(q), &all, cost)?;

        let k = all.len();
        let costs = tape.transport_cost(cloud, q, all, cost)?;
        let logits = tape.scale(costs, -1.0);
        let lse = tape.log_sum_exp(logits)?;
        let first = tape.constant(Tensor::from_fn(k, 1, |i, _| if i == 0 { 1.0 } else { 0.0 }));
        let positive = tape.matmul(logits, first)?;
        terms.push(tape.sub(positive, lse)?);
    }
    let row = tape.concat(&terms)?;
    Ok(tape.sum(row))
}

fn check_optimality(x: &Tensor, y: &Tensor, plans: &[Tensor], cost: CostKind) -> Result<()> {
    let c = cost_matrix_raw(x, y, cost)?;
    let value = |p: &Tensor| -> Real { p.data().iter().zip(c.data()).map(|(a, b)| a * b).sum() };
    let best = value(&plans[0]);
    let scale = c.max_abs();
    for p in &plans[1..] {
        let slack = 2.0 * marginal_l1_violation(p) * scale + 1e-9 * (1.0 + best.abs());
        let w = value(p);
        if w < best - slack {
            return Err(Error::Solver(format!(
                "negative transport cost {w} undercuts the optimal cost {best}"
            )));
        }
    }
    Ok(())
}

/// `task − λ·nc`; with `λ = 0` the task loss node is returned as is.
pub fn total_loss(tape: &mut Tape, task: NodeId, nc: Option<NodeId>, lambda: Real) -> Result<NodeId> {
    match nc {
        Some(nc) if lambda != 0.0 => {
            let weighted = tape.scale(nc, lambda);
            tape.sub(task, weighted)
        }
        _ => Ok(task),
    }
}
