//! Sample summaries and two-sample comparisons for Monte Carlo output.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::rng::Randomness;
use crate::{Error, Result};

/// Scalar samples of one observable, e.g. `X_1(T)` over replications.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleSet {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleSet {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        SampleSet { label: label.into(), values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// At least two finite values, sorted ascending.
    fn sorted(&self) -> Result<Vec<f64>> {
        if self.values.len() < 2 {
            return Err(Error::EmptySample(format!("{}: {} values", self.label, self.values.len())));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{}: non-finite sample", self.label)));
        }
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Kolmogorov tail `Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`.
fn kolmogorov_tail(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = libm::exp(-2.0 * (j * j) as f64 * x * x);
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov statistic with the asymptotic p-value.
pub fn ks_distance(a: &SampleSet, b: &SampleSet) -> Result<KsResult> {
    let (sa, sb) = (a.sorted()?, b.sorted()?);
    let statistic = ks_sorted(&sa, &sb);
    let en = (sa.len() * sb.len()) as f64 / (sa.len() + sb.len()) as f64;
    let se = libm::sqrt(en);
    Ok(KsResult { statistic, p_value: kolmogorov_tail((se + 0.12 + 0.11 / se) * statistic) })
}

/// KS statistic with a permutation p-value `(1 + #{D* >= D}) / (1 + shuffles)`,
/// for samples too small for the asymptotic law.
pub fn ks_permutation<R: Randomness + ?Sized>(
    a: &SampleSet,
    b: &SampleSet,
    shuffles: usize,
    rng: &mut R,
) -> Result<KsResult> {
    let (sa, sb) = (a.sorted()?, b.sorted()?);
    let statistic = ks_sorted(&sa, &sb);
    let mut pool: Vec<f64> = sa.iter().chain(&sb).copied().collect();
    let mut hits = 0usize;
    for _ in 0..shuffles {
        for i in (1..pool.len()).rev() {
            let j = ((rng.uniform() * (i + 1) as f64) as usize).min(i);
            pool.swap(i, j);
        }
        let (x, y) = pool.split_at_mut(sa.len());
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        if ks_sorted(x, y) >= statistic - 1e-12 {
            hits += 1;
        }
    }
    Ok(KsResult { statistic, p_value: (1 + hits) as f64 / (1 + shuffles) as f64 })
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased.
    pub variance: f64,
    /// Values at [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 5],
    pub ci95: (f64, f64),
}

impl Summary {
    pub fn median(&self) -> f64 {
        self.quantiles[2]
    }
}

/// Linear interpolation between order statistics (type 7).
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(a: &SampleSet) -> Result<Summary> {
    let sorted = a.sorted()?;
    let n = sorted.len() as f64;
    let mean = a.values.iter().sum::<f64>() / n;
    let variance = a.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let half = 1.96 * libm::sqrt(variance / n);
    Ok(Summary {
        count: sorted.len(),
        mean,
        variance,
        quantiles: QUANTILE_LEVELS.map(|l| quantile_sorted(&sorted, l)),
        ci95: (mean - half, mean + half),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossDecayRow {
    pub n: u64,
    pub mean: f64,
    pub lo95: f64,
    pub hi95: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossDecayTable {
    pub rows: Vec<LossDecayRow>,
    /// Means strictly decrease in `n`; a run of zero means counts as
    /// decreasing since nothing is left to lose.
    pub decreasing: bool,
}

/// Per-`n` mean losses with normal confidence intervals.
pub fn loss_decay_table(runs: &[(u64, SampleSet)]) -> Result<LossDecayTable> {
    if runs.len() < 2 {
        return Err(Error::EmptySample(format!("loss decay needs at least two n, got {}", runs.len())));
    }
    let mut rows = runs
        .iter()
        .map(|(n, s)| {
            let sm = summarize(s)?;
            Ok(LossDecayRow { n: *n, mean: sm.mean, lo95: sm.ci95.0, hi95: sm.ci95.1 })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.n);
    let decreasing = rows.windows(2).all(|w| w[1].mean < w[0].mean || (w[0].mean == 0.0 && w[1].mean == 0.0));
    Ok(LossDecayTable { rows, decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    fn set(v: &[f64]) -> SampleSet {
        SampleSet::new("s", v.to_vec())
    }

    #[test]
    fn ks_examples() {
        let a = set(&[0.3, 0.1, 0.7]);
        assert_eq!(ks_distance(&a, &a).unwrap().statistic, 0.0);
        assert_eq!(ks_distance(&a, &a).unwrap().p_value, 1.0);
        assert_eq!(ks_distance(&set(&[0.0; 3]), &set(&[1.0; 3])).unwrap().statistic, 1.0);
        let d = ks_distance(&set(&[1.0, 2.0, 3.0, 4.0]), &set(&[2.0, 3.0, 4.0, 5.0])).unwrap();
        assert!((d.statistic - 0.25).abs() < 1e-15);
        assert!(matches!(ks_distance(&set(&[1.0]), &a), Err(Error::EmptySample(_))));
    }

    #[test]
    fn ks_p_value_calibration() {
        // Same law: p-values roughly uniform. Shifted law: tiny p.
        let mut rng = stream_rng(5);
        let mut small = 0;
        for _ in 0..200 {
            let a = SampleSet::new("a", (0..500).map(|_| rng.standard_normal()).collect());
            let b = SampleSet::new("b", (0..500).map(|_| rng.standard_normal()).collect());
            if ks_distance(&a, &b).unwrap().p_value < 0.05 {
                small += 1;
            }
        }
        assert!(small <= 25, "{small} rejections of 200");
        let a = SampleSet::new("a", (0..500).map(|_| rng.standard_normal()).collect());
        let b = SampleSet::new("b", (0..500).map(|_| rng.standard_normal() + 0.5).collect());
        assert!(ks_distance(&a, &b).unwrap().p_value < 1e-6);
        // Kolmogorov tail at a known point: Q(1.36) ~ 0.0494.
        assert!((kolmogorov_tail(1.36) - 0.0494).abs() < 5e-4);
    }

    #[test]
    fn permutation_agrees_in_the_extremes() {
        let mut rng = stream_rng(9);
        let a = set(&[0.0, 0.1, 0.2, 0.3, 0.4]);
        let b = set(&[1.0, 1.1, 1.2, 1.3, 1.4]);
        let r = ks_permutation(&a, &b, 1000, &mut rng).unwrap();
        assert_eq!(r.statistic, 1.0);
        // only 2 of 252 splits separate the samples completely
        assert!(r.p_value < 0.03);
        let r = ks_permutation(&a, &a, 1000, &mut rng).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&set(&[1.0; 4])).unwrap();
        assert_eq!((s.mean, s.variance), (1.0, 0.0));
        assert_eq!(s.ci95, (1.0, 1.0));
        let s = summarize(&set(&[0.0, 2.0])).unwrap();
        assert_eq!((s.mean, s.variance), (1.0, 2.0));
        assert_eq!(summarize(&set(&[5.0, 1.0, 4.0, 2.0, 3.0])).unwrap().median(), 3.0);
        let s = summarize(&set(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(s.quantiles[1], 1.75);
        assert!(summarize(&set(&[])).is_err());
    }

    #[test]
    fn loss_decay_examples() {
        let zeros = |n| (n, set(&[0.0; 4]));
        let t = loss_decay_table(&[zeros(400), zeros(1600), zeros(6400)]).unwrap();
        assert!(t.decreasing);
        assert!(t.rows.iter().all(|r| r.mean == 0.0));

        let t = loss_decay_table(&[(6400, set(&[0.01, 0.01])), (400, set(&[0.5, 0.5])), (1600, set(&[0.2, 0.2]))])
            .unwrap();
        assert_eq!(t.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![400, 1600, 6400]);
        assert!(t.decreasing);

        let t = loss_decay_table(&[(400, set(&[0.1, 0.1])), (1600, set(&[0.3, 0.3]))]).unwrap();
        assert!(!t.decreasing);
        assert!(loss_decay_table(&[(400, set(&[0.1, 0.1]))]).is_err());
    }

    fn samples() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-100.0f64..100.0, 2..40)
    }

    proptest! {
        #[test]
        fn ks_symmetric(a in samples(), b in samples()) {
            let (a, b) = (set(&a), set(&b));
            prop_assert_eq!(ks_distance(&a, &b).unwrap(), ks_distance(&b, &a).unwrap());
        }

        #[test]
        fn ks_monotone_invariant(a in samples(), b in samples()) {
            let f = |v: &[f64]| set(&v.iter().map(|x| libm::atan(*x) * 3.0 + x * x * x).collect::<Vec<_>>());
            let d = ks_distance(&set(&a), &set(&b)).unwrap().statistic;
            prop_assert_eq!(d, ks_distance(&f(&a), &f(&b)).unwrap().statistic);
        }

        #[test]
        fn quantiles_monotone(a in samples()) {
            let s = summarize(&set(&a)).unwrap();
            prop_assert!(s.quantiles.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(s.ci95.0 <= s.mean && s.mean <= s.ci95.1);
        }
    }
}
