use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

pub fn rmse(pred: &[Real], target: &[Real]) -> Result<Real> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Metric(format!(
            "RMSE needs equal nonempty inputs, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let mse = pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum::<Real>() / pred.len() as Real;
    Ok(mse.sqrt())
}

/// 1-based ranks with tied values sharing their average rank.
pub fn average_ranks(values: &[Real]) -> Vec<Real> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as Real / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Area under the ROC curve via the Mann-Whitney rank statistic.
pub fn roc_auc(scores: &[Real], labels: &[Real]) -> Result<Real> {
    if scores.len() != labels.len() {
        return Err(Error::Metric("AUC needs one label per score".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metric("AUC needs both classes in the labels".into()));
    }
    let ranks = average_ranks(scores);
    let rank_sum: Real = ranks.iter().zip(labels).filter(|(_, &y)| y == 1.0).map(|(r, _)| r).sum();
    let p = positives as Real;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as Real))
}

pub fn pearson(x: &[Real], y: &[Real]) -> Result<Real> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Metric("correlation needs two equal-length samples of size ≥ 2".into()));
    }
    let n = x.len() as Real;
    let mx = x.iter().sum::<Real>() / n;
    let my = y.iter().sum::<Real>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Metric("correlation undefined for a constant sample".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[Real], y: &[Real]) -> Result<Real> {
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub spearman: Real,
    pub pearson: Real,
}

/// Correlation between pairwise embedding distances and pairwise label gaps
/// over all unordered pairs.
pub fn correlation_analysis(embeddings: &[Vec<Real>], labels: &[Real]) -> Result<Correlation> {
    if embeddings.len() != labels.len() || labels.len() < 2 {
        return Err(Error::Metric(format!(
            "correlation analysis needs ≥ 2 points with labels, got {} embeddings and {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    let mut dist = Vec::new();
    let mut gap = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let d2: Real = embeddings[i]
                .iter()
                .zip(&embeddings[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            dist.push(d2.sqrt());
            gap.push((labels[i] - labels[j]).abs());
        }
    }
    Ok(Correlation {
        spearman: spearman(&dist, &gap)?,
        pearson: pearson(&dist, &gap)?,
    })
}
