//! Evaluation statistics: binomial intervals, McNemar's test, stratified and
//! credit-quantile accuracy, credit/correctness correlation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("successes {successes} out of range for n = {n}")]
    InvalidCounts { successes: u64, n: u64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    Empty,
    #[error("bin edges must be strictly increasing with at least two entries")]
    InvalidBins,
    #[error("quantile count must be at least 1")]
    InvalidQuantiles,
}

pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn check_counts(successes: u64, n: u64) -> Result<f64, StatsError> {
    if n == 0 || successes > n {
        return Err(StatsError::InvalidCounts { successes, n });
    }
    Ok(successes as f64 / n as f64)
}

/// Normal-approximation interval in percentage points, clamped to [0, 100].
pub fn normal_ci(successes: u64, n: u64, z: f64) -> Result<Interval, StatsError> {
    let p = check_counts(successes, n)?;
    let half = z * (p * (1.0 - p) / n as f64).sqrt();
    Ok(Interval { lo: (100.0 * (p - half)).max(0.0), hi: (100.0 * (p + half)).min(100.0) })
}

/// Wilson score interval as proportions.
pub fn wilson_ci(successes: u64, n: u64, z: f64) -> Result<Interval, StatsError> {
    let p = check_counts(successes, n)?;
    let n = n as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Guard rounding at the boundaries; analytically lo >= 0 and hi <= 1.
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    Ok(Interval { lo, hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaInterval {
    /// Accuracy difference A − B in percentage points.
    pub delta: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Interval for the difference of two independent proportions, in percentage points.
pub fn unpaired_delta_ci(
    successes_a: u64,
    n_a: u64,
    successes_b: u64,
    n_b: u64,
    z: f64,
) -> Result<DeltaInterval, StatsError> {
    let pa = check_counts(successes_a, n_a)?;
    let pb = check_counts(successes_b, n_b)?;
    let se = (pa * (1.0 - pa) / n_a as f64 + pb * (1.0 - pb) / n_b as f64).sqrt();
    let d = pa - pb;
    Ok(DeltaInterval { delta: 100.0 * d, lo: 100.0 * (d - z * se), hi: 100.0 * (d + z * se) })
}

/// Interval for a paired accuracy difference from discordant counts
/// (`b` = only A correct, `c` = only B correct) over `n` shared items.
pub fn paired_delta_ci(b: u64, c: u64, n: u64, z: f64) -> Result<DeltaInterval, StatsError> {
    if n == 0 || b + c > n {
        return Err(StatsError::InvalidCounts { successes: b + c, n });
    }
    let nf = n as f64;
    let (bf, cf) = (b as f64, c as f64);
    let d = (bf - cf) / nf;
    let var = ((bf + cf) - (bf - cf).powi(2) / nf).max(0.0) / (nf * nf);
    let se = var.sqrt();
    Ok(DeltaInterval { delta: 100.0 * d, lo: 100.0 * (d - z * se), hi: 100.0 * (d + z * se) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ExactBinomial,
    ChiSquareCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    pub b: u64,
    pub c: u64,
    pub p_value: f64,
    pub method: McNemarMethod,
    /// Set when `b + c == 0`; `p_value` is then 1.
    pub no_discordant_pairs: bool,
}

pub const MCNEMAR_EXACT_LIMIT: u64 = 25;

pub fn mcnemar(b: u64, c: u64) -> McNemar {
    mcnemar_with_threshold(b, c, MCNEMAR_EXACT_LIMIT)
}

/// Exact two-sided binomial test when `b + c <= exact_limit`, otherwise
/// chi-square with continuity correction.
pub fn mcnemar_with_threshold(b: u64, c: u64, exact_limit: u64) -> McNemar {
    let n = b + c;
    if n == 0 {
        return McNemar { b, c, p_value: 1.0, method: McNemarMethod::ExactBinomial, no_discordant_pairs: true };
    }
    if n <= exact_limit {
        let k = b.min(c);
        let tail = binomial_half_cdf(k, n);
        return McNemar {
            b,
            c,
            p_value: (2.0 * tail).min(1.0),
            method: McNemarMethod::ExactBinomial,
            no_discordant_pairs: false,
        };
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let stat = diff.max(0.0).powi(2) / n as f64;
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    let p = chi.sf(stat);
    McNemar { b, c, p_value: p.min(1.0), method: McNemarMethod::ChiSquareCorrected, no_discordant_pairs: false }
}

/// P(X <= k) for X ~ Binomial(n, 1/2).
fn binomial_half_cdf(k: u64, n: u64) -> f64 {
    if n <= 120 {
        // exact integer sum; 2^n fits in u128 up to n = 127
        let mut coef: u128 = 1;
        let mut sum: u128 = 0;
        for i in 0..=k {
            if i > 0 {
                coef = coef * u128::from(n - i + 1) / u128::from(i);
            }
            sum += coef;
        }
        return sum as f64 / (2.0f64).powi(n as i32);
    }
    Binomial::new(0.5, n).expect("valid binomial").cdf(k)
}

/// Discordant counts from per-item correctness of two systems.
pub fn discordant_counts(a_correct: &[bool], b_correct: &[bool]) -> Result<(u64, u64), StatsError> {
    if a_correct.len() != b_correct.len() {
        return Err(StatsError::LengthMismatch(a_correct.len(), b_correct.len()));
    }
    let b = a_correct.iter().zip(b_correct).filter(|(a, b)| **a && !**b).count() as u64;
    let c = a_correct.iter().zip(b_correct).filter(|(a, b)| !**a && **b).count() as u64;
    Ok((b, c))
}

/// One graded prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub sample_id: String,
    #[serde(default)]
    pub prediction: String,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credit: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub difficulty: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub wilson: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub factor: String,
    pub bins: Vec<BinReport>,
    /// Results without a value for the factor or outside every bin.
    pub unbinned: usize,
}

impl StratifiedReport {
    /// Accuracy never rises from one non-empty bin to the next.
    pub fn is_non_increasing(&self) -> bool {
        let acc: Vec<f64> = self.bins.iter().filter(|b| b.n > 0).map(|b| b.accuracy).collect();
        acc.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Accuracy per difficulty bin. `edges` has one more entry than there are
/// bins; bins are `[e_i, e_{i+1})` except the last, which is closed.
pub fn stratified_accuracy(
    results: &[EvalResult],
    factor: &str,
    edges: &[f64],
) -> Result<StratifiedReport, StatsError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(StatsError::InvalidBins);
    }
    let nb = edges.len() - 1;
    let mut counts = vec![(0usize, 0usize); nb];
    let mut unbinned = 0;
    for r in results {
        let Some(&v) = r.difficulty.get(factor) else {
            unbinned += 1;
            continue;
        };
        let idx = (0..nb).find(|&i| v >= edges[i] && (v < edges[i + 1] || (i == nb - 1 && v <= edges[i + 1])));
        match idx {
            Some(i) => {
                counts[i].0 += 1;
                counts[i].1 += usize::from(r.correct);
            }
            None => unbinned += 1,
        }
    }
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &(n, k))| BinReport {
            lo: edges[i],
            hi: edges[i + 1],
            n,
            correct: k,
            accuracy: if n == 0 { 0.0 } else { k as f64 / n as f64 },
            wilson: wilson_ci(k as u64, n as u64, Z95).ok(),
        })
        .collect();
    Ok(StratifiedReport { factor: factor.to_owned(), bins, unbinned })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileGroup {
    pub n: usize,
    pub credit_lo: f64,
    pub credit_hi: f64,
    pub accuracy: f64,
    pub wilson: Interval,
}

/// Sorts by credit and splits into `q` near-equal groups; earlier groups take
/// the remainder.
pub fn credit_quantile_accuracy(credits: &[f64], correct: &[bool], q: usize) -> Result<Vec<QuantileGroup>, StatsError> {
    if credits.len() != correct.len() {
        return Err(StatsError::LengthMismatch(credits.len(), correct.len()));
    }
    if q == 0 {
        return Err(StatsError::InvalidQuantiles);
    }
    let n = credits.len();
    if n < q {
        return Err(StatsError::Empty);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| credits[a].total_cmp(&credits[b]).then(a.cmp(&b)));
    let (base, rem) = (n / q, n % q);
    let mut out = Vec::with_capacity(q);
    let mut start = 0;
    for g in 0..q {
        let size = base + usize::from(g < rem);
        let idx = &order[start..start + size];
        let k = idx.iter().filter(|&&i| correct[i]).count();
        out.push(QuantileGroup {
            n: size,
            credit_lo: credits[idx[0]],
            credit_hi: credits[idx[size - 1]],
            accuracy: k as f64 / size as f64,
            wilson: wilson_ci(k as u64, size as u64, Z95)?,
        });
        start += size;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CreditCorrelation {
    pub spearman_rho: f64,
    /// Mean credit of correct samples minus mean credit of wrong ones.
    pub mean_gap: f64,
}

pub fn credit_correlation(credits: &[f64], correct: &[bool]) -> Result<CreditCorrelation, StatsError> {
    if credits.len() != correct.len() {
        return Err(StatsError::LengthMismatch(credits.len(), correct.len()));
    }
    if credits.is_empty() {
        return Err(StatsError::Empty);
    }
    let y: Vec<f64> = correct.iter().map(|&c| f64::from(u8::from(c))).collect();
    let rho = pearson(&average_ranks(credits), &average_ranks(&y));
    let mean = |want: bool| {
        let v: Vec<f64> = credits.iter().zip(correct).filter(|(_, &c)| c == want).map(|(x, _)| *x).collect();
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    let mean_gap = match (mean(true), mean(false)) {
        (Some(a), Some(b)) => a - b,
        _ => 0.0,
    };
    Ok(CreditCorrelation { spearman_rho: rho, mean_gap })
}

/// 1-based ranks, ties share their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Zero when either side has no variance.
fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_ci_degenerate() {
        assert_eq!(normal_ci(0, 10, Z95).unwrap(), Interval { lo: 0.0, hi: 0.0 });
        assert_eq!(normal_ci(10, 10, Z95).unwrap(), Interval { lo: 100.0, hi: 100.0 });
        assert!(normal_ci(11, 10, Z95).is_err());
        assert!(normal_ci(0, 0, Z95).is_err());
    }

    #[test]
    fn wilson_eight_of_ten() {
        let w = wilson_ci(8, 10, 1.96).unwrap();
        // (p + z²/2n ± z·sqrt(p(1-p)/n + z²/4n²)) / (1 + z²/n) by hand
        let (z, n, p): (f64, f64, f64) = (1.96, 10.0, 0.8);
        let c = (p + z * z / 20.0) / (1.0 + z * z / n);
        let h = z * (p * (1.0 - p) / n + z * z / 400.0).sqrt() / (1.0 + z * z / n);
        assert!((w.lo - (c - h)).abs() < 1e-15 && (w.hi - (c + h)).abs() < 1e-15);
        assert!((w.lo - 0.490).abs() < 5e-4 && (w.hi - 0.943).abs() < 5e-4);
        assert_eq!(wilson_ci(0, 10, Z95).unwrap().lo, 0.0);
    }

    #[test]
    fn wilson_and_normal_agree_asymptotically() {
        let n = 100_000;
        let w = wilson_ci(31_300, n, Z95).unwrap();
        let m = normal_ci(31_300, n, Z95).unwrap();
        assert!((100.0 * w.lo - m.lo).abs() < 0.1 && (100.0 * w.hi - m.hi).abs() < 0.1);
    }

    #[test]
    fn mcnemar_examples() {
        let r = mcnemar(10, 2);
        assert_eq!(r.method, McNemarMethod::ExactBinomial);
        assert!((r.p_value - 158.0 / 4096.0).abs() < 1e-15);
        assert!(mcnemar(7, 7).p_value >= 0.5);
        let z = mcnemar(0, 0);
        assert!(z.no_discordant_pairs && z.p_value == 1.0);
        assert_eq!(mcnemar(20, 6).method, McNemarMethod::ChiSquareCorrected);
        assert_eq!(mcnemar(20, 5).method, McNemarMethod::ExactBinomial);
    }

    #[test]
    fn mcnemar_chi_square_value() {
        // (|30-10|-1)^2/40 = 9.025; sf via erfc(sqrt(x/2))
        let r = mcnemar(30, 10);
        let x: f64 = 9.025;
        let expected = statrs::function::erf::erfc((x / 2.0).sqrt());
        assert!((r.p_value - expected).abs() < 1e-12);
    }

    #[test]
    fn large_exact_threshold_uses_statrs() {
        let a = mcnemar_with_threshold(70, 60, 1000);
        let b = mcnemar_with_threshold(60, 70, 1000);
        assert_eq!(a.p_value, b.p_value);
        assert!(a.p_value > 0.3 && a.p_value < 0.5);
    }

    #[test]
    fn unpaired_delta() {
        let d = unpaired_delta_ci(423, 1350, 329, 1350, Z95).unwrap();
        assert!((d.delta - 100.0 * 94.0 / 1350.0).abs() < 1e-12);
        assert!(d.lo < d.delta && d.delta < d.hi);
    }

    #[test]
    fn paired_delta_is_narrower_with_agreement() {
        let p = paired_delta_ci(120, 26, 1350, Z95).unwrap();
        let u = unpaired_delta_ci(423, 1350, 329, 1350, Z95).unwrap();
        assert!((p.delta - u.delta).abs() < 1e-12);
        assert!(p.hi - p.lo < u.hi - u.lo);
    }

    #[test]
    fn stratified_partition() {
        let mk = |d: f64, ok: bool| EvalResult {
            sample_id: String::new(),
            prediction: String::new(),
            correct: ok,
            credit: None,
            difficulty: [("hops".to_owned(), d)].into(),
        };
        let rs = vec![mk(1.0, true), mk(2.0, true), mk(3.0, false), mk(4.0, false), mk(4.0, true)];
        let one = stratified_accuracy(&rs, "hops", &[0.0, 10.0]).unwrap();
        assert_eq!(one.bins[0].n, 5);
        assert!((one.bins[0].accuracy - 0.6).abs() < 1e-15);
        let two = stratified_accuracy(&rs, "hops", &[1.0, 3.0, 4.0]).unwrap();
        assert_eq!(two.bins.iter().map(|b| b.n).sum::<usize>(), 5);
        assert_eq!(two.bins[1].n, 3);
        assert!(two.is_non_increasing());
        assert_eq!(stratified_accuracy(&rs, "distance", &[0.0, 1.0]).unwrap().unbinned, 5);
        assert!(stratified_accuracy(&rs, "hops", &[1.0]).is_err());
    }

    #[test]
    fn quantiles() {
        let credits: Vec<f64> = (0..10).map(f64::from).collect();
        let correct: Vec<bool> = (0..10).map(|i| i >= 5).collect();
        let one = credit_quantile_accuracy(&credits, &correct, 1).unwrap();
        assert_eq!(one[0].accuracy, 0.5);
        let five = credit_quantile_accuracy(&credits, &correct, 5).unwrap();
        let acc: Vec<f64> = five.iter().map(|g| g.accuracy).collect();
        assert_eq!(acc, vec![0.0, 0.0, 0.5, 1.0, 1.0]);
        let three = credit_quantile_accuracy(&credits, &correct, 3).unwrap();
        assert_eq!(three.iter().map(|g| g.n).collect::<Vec<_>>(), vec![4, 3, 3]);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn correlation_edges() {
        let c = credit_correlation(&[1.0; 4], &[true, false, true, false]).unwrap();
        assert_eq!(c, CreditCorrelation { spearman_rho: 0.0, mean_gap: 0.0 });
        let c = credit_correlation(&[0.1, 0.2, 0.3, 0.4], &[false, false, true, true]).unwrap();
        assert!(c.spearman_rho > 0.0);
        assert!((c.mean_gap - 0.2).abs() < 1e-15);
    }
}
