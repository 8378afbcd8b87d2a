//! Rank-based comparison of strategies and a normality diagnostic.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

/// Significance level for omnibus and pairwise decisions.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleGroup {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleGroup {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self { label: label.into(), values }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group `{0}` has fewer than two values")]
    TooFewValues(String),
    #[error("group `{0}` contains a non-finite value")]
    NonFinite(String),
}

/// Midranks of `values` (1-based) and the tie term `sum (t^3 - t)`.
pub fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KruskalWallis {
    pub h: f64,
    pub df: usize,
    pub p: f64,
    /// Mean joint rank of each group, in input order.
    pub mean_ranks: Vec<f64>,
    pub n_total: usize,
    /// `sum (t^3 - t)` over tie blocks of the joint ranking.
    pub tie_term: f64,
}

fn check(groups: &[SampleGroup]) -> Result<(), StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    for g in groups {
        if g.values.len() < 2 {
            return Err(StatsError::TooFewValues(g.label.clone()));
        }
        if g.values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(g.label.clone()));
        }
    }
    Ok(())
}

/// Tie-corrected H with a chi-square p-value on `k - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[SampleGroup]) -> Result<KruskalWallis, StatsError> {
    check(groups)?;
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.values.iter().copied()).collect();
    let n = pooled.len() as f64;
    let (ranks, tie_term) = midranks(&pooled);
    let mut offset = 0;
    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.values.len()].iter().sum();
        sum += r * r / g.values.len() as f64;
        mean_ranks.push(r / g.values.len() as f64);
        offset += g.values.len();
    }
    let df = groups.len() - 1;
    let correction = 1.0 - tie_term / (n * n * n - n);
    let (h, p) = if correction <= 0.0 {
        (0.0, 1.0)
    } else {
        let h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
        let h = h.max(0.0);
        let chi = ChiSquared::new(df as f64).expect("positive degrees of freedom");
        (h, chi.sf(h))
    };
    Ok(KruskalWallis { h, df, p, mean_ranks, n_total: pooled.len(), tie_term })
}

/// Outcome of comparing the row strategy against the column strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    Outperforms,
    DominatedBy,
    NoDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub omnibus: KruskalWallis,
    /// Bonferroni-adjusted two-sided p-values; the diagonal is 1.
    pub adjusted_p: Vec<Vec<f64>>,
    pub dominance: Vec<Vec<Dominance>>,
}

impl Comparison {
    /// Indices of the groups that outperform group `i`.
    pub fn dominators_of(&self, i: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&j| self.dominance[i][j] == Dominance::DominatedBy).collect()
    }

    pub fn dominated_by(&self, i: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&j| self.dominance[i][j] == Dominance::Outperforms).collect()
    }
}

/// Dunn's pairwise test on the joint ranking with Bonferroni adjustment.
///
/// Lower values are better when `lower_is_better`; pairs are only declared
/// different when the omnibus test rejects at [`ALPHA`].
pub fn posthoc_bonferroni(groups: &[SampleGroup], lower_is_better: bool) -> Result<Comparison, StatsError> {
    let omnibus = kruskal_wallis(groups)?;
    let k = groups.len();
    let pairs = (k * (k - 1) / 2) as f64;
    let n = omnibus.n_total as f64;
    let variance = n * (n + 1.0) / 12.0 - omnibus.tie_term / (12.0 * (n - 1.0));
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut adjusted_p = vec![vec![1.0; k]; k];
    let mut dominance = vec![vec![Dominance::NoDifference; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let se = (variance * (1.0 / groups[i].values.len() as f64 + 1.0 / groups[j].values.len() as f64)).sqrt();
            let diff = omnibus.mean_ranks[i] - omnibus.mean_ranks[j];
            let raw = if se > 0.0 { 2.0 * normal.sf((diff / se).abs()) } else { 1.0 };
            let adj = (raw * pairs).min(1.0);
            adjusted_p[i][j] = adj;
            adjusted_p[j][i] = adj;
            if omnibus.p < ALPHA && adj < ALPHA {
                let i_better = (diff < 0.0) == lower_is_better;
                let (di, dj) = if i_better {
                    (Dominance::Outperforms, Dominance::DominatedBy)
                } else {
                    (Dominance::DominatedBy, Dominance::Outperforms)
                };
                dominance[i][j] = di;
                dominance[j][i] = dj;
            }
        }
    }
    Ok(Comparison { labels: groups.iter().map(|g| g.label.clone()).collect(), omnibus, adjusted_p, dominance })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityTest {
    pub d: f64,
    pub p: f64,
}

/// Kolmogorov–Smirnov distance to a normal fitted by sample mean and std,
/// with a Lilliefors p-value (Dallal–Wilkinson approximation).
///
/// A sample without spread gets `p = 0`. Samples of fewer than five values
/// get `p = NaN`.
pub fn ks_normality(values: &[f64]) -> NormalityTest {
    let n = values.len();
    if n < 5 {
        return NormalityTest { d: f64::NAN, p: f64::NAN };
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    if std.is_nan() || std <= 0.0 {
        return NormalityTest { d: 1.0, p: 0.0 };
    }
    let normal = Normal::new(mean, std).expect("positive std");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = normal.cdf(x);
            (cdf - i as f64 / nf).max((i + 1) as f64 / nf - cdf)
        })
        .fold(0.0, f64::max);
    NormalityTest { d, p: lilliefors_p(d, n) }
}

fn lilliefors_p(d: f64, n: usize) -> f64 {
    let nf = n as f64;
    let (dd, nd) = if n > 100 { (d * (nf / 100.0).powf(0.49), 100.0) } else { (d, nf) };
    let p = (-7.01256 * dd * dd * (nd + 2.78019) + 2.99587 * dd * (nd + 2.78019).sqrt() - 0.122119
        + 0.974598 / nd.sqrt()
        + 1.67997 / nd)
        .exp();
    if p <= 0.1 {
        return p;
    }
    let kk = (nf.sqrt() - 0.01 + 0.85 / nf.sqrt()) * d;
    let p = if kk <= 0.302 {
        1.0
    } else if kk <= 0.5 {
        2.76773 - 19.828315 * kk + 80.709644 * kk.powi(2) - 138.55152 * kk.powi(3) + 81.218052 * kk.powi(4)
    } else if kk <= 0.9 {
        -4.901232 + 40.662806 * kk - 97.490286 * kk.powi(2) + 94.029866 * kk.powi(3) - 32.355711 * kk.powi(4)
    } else if kk <= 1.31 {
        6.198765 - 19.558097 * kk + 23.186922 * kk.powi(2) - 12.234627 * kk.powi(3) + 2.423045 * kk.powi(4)
    } else {
        0.0
    };
    p.clamp(0.0, 1.0)
}
