mod common;

use common::{determinant, rng, symmetric_eigenvalues, uniform};
use otgnn::gradcore::Tensor;
use otgnn::otcore::{
    cost_matrix, emd_exact, is_feasible, oracle, sinkhorn_project, transport_objective, wasserstein, CostKind,
    PointCloud,
};
use proptest::prelude::*;
use rand::Rng;

fn gram_clouds() -> Vec<PointCloud<f64>> {
    let u: Vec<[f64; 2]> = (0..4).map(|i| [(i / 2) as f64, (i % 2) as f64]).collect();
    [(0, 1), (0, 2), (0, 3), (1, 2)]
        .iter()
        .map(|&(a, b)| PointCloud::from_rows(&[u[a], u[b]]).unwrap())
        .collect()
}

#[test]
fn non_positive_definite_gram_matrix() {
    let clouds = gram_clouds();
    let mut gram = vec![vec![0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let (w, _) = wasserstein(&clouds[i], &clouds[j], CostKind::NegativeDot).unwrap();
            // Per-point mass 1: n × normalized value, and W_dot maximizes the inner product.
            gram[i][j] = -2.0 * w;
        }
    }
    let expected = [
        [1.0, 0.0, 1.0, 1.0],
        [0.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 2.0, 1.0],
        [1.0, 1.0, 1.0, 2.0],
    ];
    for i in 0..4 {
        for j in 0..4 {
            assert!((gram[i][j] - expected[i][j]).abs() < 1e-12, "{gram:?}");
        }
    }
    // The integer (mass-1) matrix has determinant -1; with the normalized
    // marginals 1/n every entry halves and the determinant becomes -1/16.
    assert!((determinant(&gram) + 1.0).abs() < 1e-12);
    let normalized: Vec<Vec<f64>> = gram.iter().map(|r| r.iter().map(|v| v / 2.0).collect()).collect();
    assert!((determinant(&normalized) + 1.0 / 16.0).abs() < 1e-12);
    assert!(symmetric_eigenvalues(&gram)[0] < 0.0);
    assert!((symmetric_eigenvalues(&gram)[0] - (2.0 - 5f64.sqrt())).abs() < 1e-9);
}

#[test]
fn square_instances_match_permutation_enumeration() {
    let mut r = rng(11);
    for _ in 0..200 {
        let n = r.gen_range(2..=6);
        let c = uniform(&mut r, n, n, -2.0, 5.0);
        let exact = emd_exact(&c).unwrap();
        let brute = oracle::permutation_min(&c);
        assert!((exact.cost() - brute).abs() < 1e-8, "{} vs {brute}", exact.cost());
        assert!(exact.marginal_violation() < 1e-12);
    }
}

#[test]
fn rectangular_instances_match_vertex_enumeration() {
    let mut r = rng(12);
    for _ in 0..200 {
        let n = r.gen_range(1..=5);
        let m = r.gen_range(1..=5);
        let c = uniform(&mut r, n, m, 0.0, 3.0);
        let exact = emd_exact(&c).unwrap();
        let brute = oracle::brute_force(&c).unwrap();
        assert!((exact.cost() - brute).abs() < 1e-8, "{n}x{m}: {} vs {brute}", exact.cost());
        assert!(exact.support_size() <= n + m - 1);
    }
}

#[test]
fn degenerate_integer_costs_agree_with_oracle() {
    // Small integer costs produce many ties and degenerate pivots.
    let mut r = rng(13);
    for _ in 0..200 {
        let n = r.gen_range(1..=5);
        let m = r.gen_range(1..=5);
        let c = Tensor::from_fn(n, m, |_, _| r.gen_range(0..3) as f64);
        let exact = emd_exact(&c).unwrap();
        let brute = oracle::brute_force(&c).unwrap();
        assert!((exact.cost() - brute).abs() < 1e-12);
    }
}

#[test]
fn emd_beats_random_feasible_plans() {
    let mut r = rng(14);
    for _ in 0..5 {
        let (n, m) = (r.gen_range(2..=6), r.gen_range(2..=6));
        let c = uniform(&mut r, n, m, -1.0, 1.0);
        let best = emd_exact(&c).unwrap().cost();
        for _ in 0..1000 {
            let raw = uniform(&mut r, n, m, 0.01, 10.0);
            let p = sinkhorn_project(&raw, 1e-13, 10_000).unwrap();
            assert!(is_feasible(&p.plan, 1e-12));
            assert!(best <= transport_objective(&p.plan, &c) + 1e-10);
        }
    }
}

#[test]
fn sinkhorn_converges_on_uniform_random_matrices() {
    let mut r = rng(15);
    for _ in 0..100 {
        let raw = uniform(&mut r, 4, 4, 1e-9, 10.0);
        let p = sinkhorn_project(&raw, 1e-3, 50).unwrap();
        assert!(p.violation < 1e-3, "violation {} after {}", p.violation, p.iterations);
        assert!(p.iterations <= 50);
    }
}

/// Instances where the vertex oracle certifies a unique optimum.
fn unique_instances(seed: u64, count: usize) -> Vec<(PointCloud<f64>, PointCloud<f64>)> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let (n, m, d) = (r.gen_range(1..=4), r.gen_range(1..=4), r.gen_range(1..=3));
        let x = PointCloud::new(uniform(&mut r, n, d, -1.0, 1.0)).unwrap();
        let y = PointCloud::new(uniform(&mut r, m, d, -1.0, 1.0)).unwrap();
        let c = cost_matrix(&x, &y, CostKind::SquaredL2).unwrap();
        if oracle::optimal_vertices(&c, 1e-9).len() == 1 {
            out.push((x, y));
        }
    }
    out
}

#[test]
fn both_costs_yield_identical_plans_on_unique_optima() {
    for (x, y) in unique_instances(16, 100) {
        let (wl2, pl2) = wasserstein(&x, &y, CostKind::SquaredL2).unwrap();
        let (wdot, pdot) = wasserstein(&x, &y, CostKind::NegativeDot).unwrap();
        assert_eq!(pl2.matrix(), pdot.matrix());
        let sq = |p: &[f64]| p.iter().map(|v| v * v).sum::<f64>();
        let constant = (0..x.len()).map(|i| sq(x.point(i))).sum::<f64>() / x.len() as f64
            + (0..y.len()).map(|j| sq(y.point(j))).sum::<f64>() / y.len() as f64;
        assert!((wl2 - (constant + 2.0 * wdot)).abs() < 1e-8);
    }
}

fn cloud_strategy(max_n: usize, d: usize) -> impl Strategy<Value = PointCloud<f64>> {
    (1..=max_n)
        .prop_flat_map(move |n| proptest::collection::vec(-3.0f64..3.0, n * d))
        .prop_map(move |v| PointCloud::new(Tensor::from_vec(v.len() / d, d, v).unwrap()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wasserstein_is_symmetric(x in cloud_strategy(7, 3), y in cloud_strategy(7, 3)) {
        for kind in [CostKind::SquaredL2, CostKind::NegativeDot] {
            let (a, pa) = wasserstein(&x, &y, kind).unwrap();
            let (b, _) = wasserstein(&y, &x, kind).unwrap();
            prop_assert!((a - b).abs() < 1e-8);
            let c = cost_matrix(&y, &x, kind).unwrap();
            prop_assert!((transport_objective(pa.transpose().matrix(), &c) - b).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_plans_are_feasible(x in cloud_strategy(12, 2), y in cloud_strategy(12, 2)) {
        let (_, plan) = wasserstein(&x, &y, CostKind::SquaredL2).unwrap();
        prop_assert!(is_feasible(plan.matrix(), 1e-6));
        prop_assert!(plan.support_size() <= x.len() + y.len() - 1);
    }

    #[test]
    fn square_optimum_is_a_permutation_value(x in cloud_strategy(6, 2), seed in 0u64..1000) {
        let mut r = rng(seed);
        let y = PointCloud::new(uniform(&mut r, x.len(), 2, -3.0, 3.0)).unwrap();
        let c = cost_matrix(&x, &y, CostKind::SquaredL2).unwrap();
        let exact = emd_exact(&c).unwrap().cost();
        prop_assert!((exact - oracle::permutation_min(&c)).abs() < 1e-8);
    }
}
