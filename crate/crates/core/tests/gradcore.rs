mod common;

use std::sync::Arc;

use common::{numeric_grad, rel_err, rng, uniform};
use otgnn::gradcore::{ParamId, Tape, Tensor};
use otgnn::otcore::CostKind;
use proptest::prelude::*;
use rand::Rng;

/// Builds a scalar loss from one parameter; returns (tape, param node, loss node).
type Build = fn(&mut Tape<f64>, otgnn::gradcore::NodeId, &Tensor<f64>) -> otgnn::gradcore::NodeId;

fn check(x: &Tensor<f64>, aux: &Tensor<f64>, build: Build, tol: f64) {
    let mut tape = Tape::new();
    let p = tape.param(ParamId(0), x.clone());
    let loss = build(&mut tape, p, aux);
    let grads = tape.backward(loss).unwrap();
    let analytic = grads.param(&tape, ParamId(0)).unwrap();
    let numeric = numeric_grad(x, 1e-5, |probe| {
        let mut t = Tape::new();
        let q = t.param(ParamId(0), probe.clone());
        let l = build(&mut t, q, aux);
        t.value(l).item().unwrap()
    });
    let err = rel_err(&analytic, &numeric, 1e-3);
    assert!(err < tol, "relative error {err}\n{analytic:?}\n{numeric:?}");
}

#[test]
fn matmul_gradients_match_finite_differences() {
    let mut r = rng(1);
    let a = uniform(&mut r, 3, 4, -1.0, 1.0);
    let b = uniform(&mut r, 4, 2, -1.0, 1.0);
    check(&a, &b, |t, p, b| {
        let bn = t.constant(b.clone());
        let y = t.matmul(p, bn).unwrap();
        t.sum(y)
    }, 1e-6);
    check(&b, &a, |t, p, a| {
        let an = t.constant(a.clone());
        let y = t.matmul(an, p).unwrap();
        t.sum(y)
    }, 1e-6);
}

#[test]
fn linear_layer_gradient_has_outer_product_structure() {
    let mut r = rng(2);
    let w = uniform(&mut r, 3, 5, -1.0, 1.0);
    let x = uniform(&mut r, 5, 1, -1.0, 1.0);
    let mut tape = Tape::new();
    let wn = tape.param(ParamId(0), w.clone());
    let xn = tape.constant(x.clone());
    let y = tape.matmul(wn, xn).unwrap();
    let loss = tape.sum(y);
    let g = tape.backward(loss).unwrap().param(&tape, ParamId(0)).unwrap();
    // d sum(Wx) / dW_ij = x_j for every row i.
    for i in 0..3 {
        for j in 0..5 {
            assert_eq!(g.get(i, j), x.get(j, 0));
        }
    }
    check(&w, &x, |t, p, x| {
        let xn = t.constant(x.clone());
        let y = t.matmul(p, xn).unwrap();
        t.sum(y)
    }, 1e-6);
}

fn away_from_kinks(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor<f64> {
    Tensor::from_fn(rows, cols, |_, _| {
        let v: f64 = rng.gen_range(0.05..1.0);
        if rng.gen_bool(0.5) { v } else { -v }
    })
}

#[test]
fn composite_network_gradient() {
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let x = away_from_kinks(&mut r, 4, 3);
        let aux = uniform(&mut r, 3, 3, -1.0, 1.0);
        check(&x, &aux, |t, p, w| {
            let wn = t.constant(w.clone());
            let h = t.matmul_t(p, wn).unwrap();
            let s = t.sigmoid(h);
            let c = t.concat(&[s, p]).unwrap();
            let rr = t.relu(c);
            let sc = t.scale(rr, 0.7);
            let sq = t.mul(sc, sc).unwrap();
            let lse = t.log_sum_exp(sq).unwrap();
            let m = t.mean(sq);
            let rows = t.sum_rows(p);
            let cl = t.clamp(rows, -0.5, 0.5);
            let cs = t.sum(cl);
            let a = t.add(lse, m).unwrap();
            let b = t.sub(a, cs).unwrap();
            let sl = t.slice_rows(p, 1, 2).unwrap();
            let lists: Arc<[Vec<usize>]> = vec![vec![0, 1], vec![1]].into();
            let g = t.gather_sum(sl, lists).unwrap();
            let e = t.sigmoid(g);
            let ln = t.ln(e);
            let lsum = t.sum(ln);
            t.add(b, lsum).unwrap()
        }, 1e-4);
    }
}

#[test]
fn transport_cost_gradients_with_fixed_plans() {
    let mut r = rng(7);
    let x = uniform(&mut r, 4, 3, -1.0, 1.0);
    let y = uniform(&mut r, 5, 3, -1.0, 1.0);
    for kind in [CostKind::SquaredL2, CostKind::NegativeDot] {
        let build_x: Build = if kind == CostKind::SquaredL2 {
            |t, p, y| {
                let yn = t.constant(y.clone());
                let plans = vec![plan_a(), plan_b()];
                let c = t.transport_cost(p, yn, plans, CostKind::SquaredL2).unwrap();
                let w = t.constant(Tensor::row_vector(vec![1.3, -0.4]));
                let prod = t.mul(c, w).unwrap();
                t.sum(prod)
            }
        } else {
            |t, p, y| {
                let yn = t.constant(y.clone());
                let plans = vec![plan_a(), plan_b()];
                let c = t.transport_cost(p, yn, plans, CostKind::NegativeDot).unwrap();
                let w = t.constant(Tensor::row_vector(vec![1.3, -0.4]));
                let prod = t.mul(c, w).unwrap();
                t.sum(prod)
            }
        };
        check(&x, &y, build_x, 1e-6);
    }
    check(&y, &x, |t, p, x| {
        let xn = t.constant(x.clone());
        let c = t.transport_cost(xn, p, vec![plan_a()], CostKind::SquaredL2).unwrap();
        t.sum(c)
    }, 1e-6);
}

fn plan_a() -> Tensor<f64> {
    Tensor::filled(4, 5, 1.0 / 20.0)
}

fn plan_b() -> Tensor<f64> {
    let mut p = Tensor::zeros(4, 5);
    for (i, j, v) in [(0, 0, 0.2), (0, 1, 0.05), (1, 1, 0.15), (1, 2, 0.1), (2, 2, 0.1), (2, 3, 0.15), (3, 3, 0.05), (3, 4, 0.2)] {
        p.set(i, j, v);
    }
    p
}

#[test]
fn replay_is_bit_deterministic() {
    let run = || {
        let mut r = rng(5);
        let w = uniform(&mut r, 6, 6, -1.0, 1.0);
        let mut tape = Tape::new();
        let p = tape.param(ParamId(0), w);
        let h = tape.matmul(p, p).unwrap();
        let d = tape.dropout(h, 0.3, true, &mut r).unwrap();
        let s = tape.sigmoid(d);
        let l = tape.log_sum_exp(s).unwrap();
        let g = tape.backward(l).unwrap();
        (tape.value(l).clone(), g.param(&tape, ParamId(0)).unwrap())
    };
    let (a, ga) = run();
    let (b, gb) = run();
    assert_eq!(a.data()[0].to_bits(), b.data()[0].to_bits());
    assert!(ga.data().iter().zip(gb.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

proptest! {
    #[test]
    fn backward_is_linear_in_upstream(vals in proptest::collection::vec(-1.0f64..1.0, 12), k in -3.0f64..3.0) {
        let x = Tensor::from_vec(3, 4, vals).unwrap();
        let mut tape = Tape::new();
        let p = tape.param(ParamId(0), x);
        let w = tape.constant(Tensor::from_fn(4, 2, |i, j| (i as f64) - 0.5 * j as f64));
        let h = tape.matmul(p, w).unwrap();
        let s = tape.sigmoid(h);
        let r = tape.relu(s);
        let up = Tensor::from_fn(3, 2, |i, j| 0.3 * i as f64 - 0.2 * j as f64 + 0.1);
        let g1 = tape.backward_with(r, up.clone()).unwrap().node(p).unwrap().clone();
        let g2 = tape.backward_with(r, up.scaled(k)).unwrap().node(p).unwrap().clone();
        for (a, b) in g1.data().iter().zip(g2.data()) {
            prop_assert!((a * k - b).abs() < 1e-12);
        }
    }
}
