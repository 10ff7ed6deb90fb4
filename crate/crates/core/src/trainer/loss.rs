use crate::error::Result;
use crate::gradcore::NodeId;
use crate::graphdata::Task;
use crate::{Real, Tape, Tensor};

/// Probabilities are clamped to `[EPS, 1 − EPS]` before taking logs.
pub const BCE_EPS: Real = 1e-7;

/// Mean task loss over a `B × 1` prediction column: squared error for
/// regression, binary cross-entropy on `sigmoid(pred)` for classification.
pub fn task_loss(tape: &mut Tape, pred: NodeId, labels: &[Real], task: Task) -> Result<NodeId> {
    let y = tape.constant(Tensor::from_vec(labels.len(), 1, labels.to_vec())?);
    match task {
        Task::Regression => {
            let diff = tape.sub(pred, y)?;
            let sq = tape.mul(diff, diff)?;
            Ok(tape.mean(sq))
        }
        Task::Classification => {
            let p = tape.sigmoid(pred);
            let p = tape.clamp(p, BCE_EPS, 1.0 - BCE_EPS);
            let ones = tape.constant(Tensor::filled(labels.len(), 1, 1.0));
            let q = tape.sub(ones, p)?;
            let one_minus_y = tape.sub(ones, y)?;
            let lp = tape.ln(p);
            let lq = tape.ln(q);
            let a = tape.mul(y, lp)?;
            let b = tape.mul(one_minus_y, lq)?;
            let ll = tape.add(a, b)?;
            let mean = tape.mean(ll);
            Ok(tape.scale(mean, -1.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(pred: &[Real], labels: &[Real], task: Task) -> Real {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::from_vec(pred.len(), 1, pred.to_vec()).unwrap());
        let l = task_loss(&mut tape, p, labels, task).unwrap();
        tape.value(l).item().unwrap()
    }

    #[test]
    fn exact_regression_is_zero() {
        assert_eq!(value(&[0.3, -1.2], &[0.3, -1.2], Task::Regression), 0.0);
        assert_eq!(value(&[1.0, 0.0], &[0.0, 0.0], Task::Regression), 0.5);
    }

    #[test]
    fn coin_flip_cross_entropy() {
        let v = value(&[0.0], &[1.0], Task::Classification);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        // saturated wrong prediction is capped by the clamp
        let v = value(&[-100.0], &[1.0], Task::Classification);
        assert!((v + (BCE_EPS).ln()).abs() < 1e-9);
    }
}
