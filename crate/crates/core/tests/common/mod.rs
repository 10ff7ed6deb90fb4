#![allow(dead_code)]

use otgnn::gradcore::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

/// Relative error `|a − b| / max(|a|, |b|, floor)`, entrywise maximum.
pub fn rel_err(a: &Tensor<f64>, b: &Tensor<f64>, floor: f64) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central finite differences of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &Tensor<f64>, step: f64, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Tensor<f64> {
    let mut g = Tensor::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for k in 0..x.len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + step;
        let up = f(&probe);
        probe.data_mut()[k] = orig - step;
        let down = f(&probe);
        probe.data_mut()[k] = orig;
        g.data_mut()[k] = (up - down) / (2.0 * step);
    }
    g
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Random graph on `n` nodes with the given undirected edges and
/// nonnegative features.
pub fn random_graph(
    rng: &mut impl Rng,
    n: usize,
    edges: &[(usize, usize)],
    node_width: usize,
    edge_width: usize,
) -> otgnn::graphdata::MolecularGraph {
    otgnn::graphdata::MolecularGraph {
        id: format!("g{n}"),
        nodes: uniform(rng, n, node_width, 0.0, 1.0),
        edges: edges
            .iter()
            .map(|&(src, dst)| otgnn::graphdata::Edge {
                src,
                dst,
                features: (0..edge_width).map(|_| rng.gen_range(0.0..1.0)).collect(),
            })
            .collect(),
        label: Some(rng.gen_range(-1.0..1.0)),
    }
}

fn relu_affine(w: &Tensor<f64>, x: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|i| w.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>().max(0.0))
        .collect()
}

/// Direct transcription of the message passing equations over neighbor
/// sets, written independently of the batched encoder.
pub fn reference_encoder(
    g: &otgnn::graphdata::MolecularGraph,
    w_i: &Tensor<f64>,
    w_m: &Tensor<f64>,
    w_o: &Tensor<f64>,
    steps: usize,
) -> Vec<Vec<f64>> {
    use std::collections::BTreeMap;
    let n = g.node_count();
    let hidden = w_i.rows();
    let mut neighbors = vec![Vec::new(); n];
    let mut edge_feat = BTreeMap::new();
    for e in &g.edges {
        neighbors[e.src].push(e.dst);
        neighbors[e.dst].push(e.src);
        edge_feat.insert((e.src, e.dst), e.features.clone());
        edge_feat.insert((e.dst, e.src), e.features.clone());
    }
    let mut h0 = BTreeMap::new();
    for (&(v, w), f) in &edge_feat {
        let mut x = g.nodes.row(v).to_vec();
        x.extend_from_slice(f);
        h0.insert((v, w), relu_affine(w_i, &x));
    }
    let mut h = h0.clone();
    for _ in 0..steps {
        let mut next = BTreeMap::new();
        for &(v, w) in h0.keys() {
            let mut m = vec![0.0; hidden];
            for &k in &neighbors[v] {
                if k != w {
                    for (a, b) in m.iter_mut().zip(&h[&(k, v)]) {
                        *a += b;
                    }
                }
            }
            let wm: Vec<f64> = (0..hidden)
                .map(|i| w_m.row(i).iter().zip(&m).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let upd = h0[&(v, w)].iter().zip(&wm).map(|(a, b)| (a + b).max(0.0)).collect();
            next.insert((v, w), upd);
        }
        h = next;
    }
    (0..n)
        .map(|v| {
            let mut m = vec![0.0; hidden];
            for &w in &neighbors[v] {
                for (a, b) in m.iter_mut().zip(&h[&(v, w)]) {
                    *a += b;
                }
            }
            let mut x = g.nodes.row(v).to_vec();
            x.extend_from_slice(&m);
            relu_affine(w_o, &x)
        })
        .collect()
}

/// (SMILES, heavy atoms, bonds, total hydrogens) as reported by RDKit 2026.09.1
/// `MolFromSmiles` with default sanitization. Counts were produced once and frozen.
pub const REFERENCE: [(&str, usize, usize, u32); 20] = [
    ("OCC3OC(OCC2OC(OC(C#N)c1ccccc1)C(O)C(O)C2O)C(O)C(O)C3O", 32, 34, 27),
    ("COP(=S)(OC)SCC(=O)N(C)C=O", 14, 13, 12),
    ("CSc1nnc(c(=O)n1N)C(C)(C)C", 14, 14, 14),
    ("O=C1CCCCC1", 7, 7, 10),
    ("COc1ccc(cc1)C(O)(C2CC2)c3cncnc3", 19, 21, 16),
    ("CC1=C(SCCO1)C(=O)Nc2ccccc2", 16, 17, 13),
    ("CCc1cccc(C)c1N(C(C)COC)C(=O)CCl", 19, 19, 22),
    ("Clc1ccc(c(Cl)c1Cl)c2ccc(Cl)c(Cl)c2Cl", 18, 19, 4),
    (
        "CC1OC(CC(O)C1O)OC2C(O)CC(OC2C)OC8C(O)CC(OC7CCC3(C)C(CCC4C3CCC5(C)C(CCC45O)C6=CC(=O)OC6)C7)OC8C",
        54, 61, 64,
    ),
    ("ClC=C", 3, 2, 3),
    ("CCC(C)(C)C", 6, 5, 14),
    ("CCOP(=S)(OCC)SCCSCC", 14, 13, 19),
    ("Cc1ccc(O)cc1C", 9, 9, 10),
    ("c1ccc2ccccc2c1", 10, 11, 8),
    ("C1CC1CC1CC1", 7, 8, 12),
    ("[NH4+].[Cl-]", 2, 0, 4),
    ("CC(=O)[O-].[Na+]", 5, 3, 3),
    ("c1cc[nH]c1", 5, 5, 5),
    ("C[C@@H](O)C(=O)O", 6, 5, 6),
    ("F/C=C/F", 4, 3, 2),
];
