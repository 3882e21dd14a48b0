//! Model data, per-`n` derived parameters and the SLQ selection rule.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Tolerance on the critical-load condition `sum_i lambda_i / mu_i = 1`.
pub const LOAD_TOLERANCE: f64 = 1e-12;

/// Law of the diffusion-scaled initial condition `X_0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum InitialLaw {
    /// A fixed vector. An empty vector stands for the origin.
    Deterministic { value: Vec<f64> },
    /// Independent Gaussians per class.
    Gaussian { mean: Vec<f64>, variance: Vec<f64> },
}

impl Default for InitialLaw {
    fn default() -> Self {
        InitialLaw::Deterministic { value: Vec::new() }
    }
}

/// First- and second-order data together with the buffer scalings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ModelData {
    pub mu: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    /// Arrival CLT variance factors.
    pub sigma_sq: Vec<f64>,
    /// Service-time squared coefficients of variation (conventional regime).
    pub gamma_sq: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub initial: InitialLaw,
    /// Halfin–Whitt buffer coefficient: every buffer holds `floor(beta1 sqrt(n))`.
    pub beta1: f64,
    /// Conventional buffer coefficient.
    pub beta: f64,
    /// Conventional buffer perturbation coefficients; the class-`i` buffer is
    /// `floor((beta + eps_i n^{-1/4}) sqrt(n))`. Empty means all zero.
    #[cfg_attr(feature = "serde", serde(default))]
    pub eps: Vec<f64>,
}

impl ModelData {
    /// Rates only; every second-order term zero, both buffer coefficients one.
    pub fn with_rates(lambda: Vec<f64>, mu: Vec<f64>) -> Self {
        let n = lambda.len();
        ModelData {
            mu,
            mu_hat: vec![0.0; n],
            lambda,
            lambda_hat: vec![0.0; n],
            sigma_sq: vec![0.0; n],
            gamma_sq: vec![0.0; n],
            initial: InitialLaw::default(),
            beta1: 1.0,
            beta: 1.0,
            eps: vec![0.0; n],
        }
    }

    /// Two classes with `lambda_i = 1`, `mu_i = 2` and zero second-order
    /// data: the setting of the non-uniqueness construction.
    pub fn symmetric_pair(beta1: f64) -> Self {
        ModelData {
            beta1,
            ..Self::with_rates(vec![1.0, 1.0], vec![2.0, 2.0])
        }
    }

    pub fn num_classes(&self) -> usize {
        self.mu.len()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.lambda.iter().zip(&self.mu).map(|(l, m)| l / m).collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// A single failed standing assumption.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewClasses(usize),
    LengthMismatch { field: &'static str, len: usize },
    NonPositive { field: &'static str, class: usize, value: f64 },
    Negative { field: &'static str, class: usize, value: f64 },
    NonFinite { field: &'static str, class: usize },
    NotCritical { load: f64 },
    NonPositiveBuffer { field: &'static str, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewClasses(n) => write!(f, "need at least 2 classes, got {n}"),
            Violation::LengthMismatch { field, len } => {
                write!(f, "`{field}` has {len} entries, expected one per class")
            }
            Violation::NonPositive { field, class, value } => {
                write!(f, "`{field}[{class}]` = {value} is not > 0")
            }
            Violation::Negative { field, class, value } => {
                write!(f, "`{field}[{class}]` = {value} is negative")
            }
            Violation::NonFinite { field, class } => write!(f, "`{field}[{class}]` is not finite"),
            Violation::NotCritical { load } => write!(f, "sum of rho is {load}, not 1"),
            Violation::NonPositiveBuffer { field, value } => {
                write!(f, "`{field}` = {value} is not > 0")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_pass() {
            return Ok(());
        }
        let msg: Vec<String> = self.violations.iter().map(|v| format!("{v}")).collect();
        Err(Error::InvalidModel(msg.join("; ")))
    }
}

/// Checks every standing assumption and lists the ones that fail.
pub fn validate(model: &ModelData) -> ValidationReport {
    let mut out = Vec::new();
    let n = model.num_classes();
    if n < 2 {
        out.push(Violation::TooFewClasses(n));
    }

    let vectors: [(&'static str, &[f64]); 7] = [
        ("mu", &model.mu),
        ("mu_hat", &model.mu_hat),
        ("lambda", &model.lambda),
        ("lambda_hat", &model.lambda_hat),
        ("sigma_sq", &model.sigma_sq),
        ("gamma_sq", &model.gamma_sq),
        ("eps", &model.eps),
    ];
    for (field, v) in vectors {
        // An empty `eps` means no perturbation.
        if v.len() != n && !(field == "eps" && v.is_empty()) {
            out.push(Violation::LengthMismatch { field, len: v.len() });
        }
        for (class, x) in v.iter().enumerate() {
            if !x.is_finite() {
                out.push(Violation::NonFinite { field, class });
            }
        }
    }
    for (field, v) in [("mu", &model.mu), ("lambda", &model.lambda)] {
        for (class, &value) in v.iter().enumerate() {
            if value.is_finite() && value <= 0.0 {
                out.push(Violation::NonPositive { field, class, value });
            }
        }
    }
    for (field, v) in [("sigma_sq", &model.sigma_sq), ("gamma_sq", &model.gamma_sq)] {
        for (class, &value) in v.iter().enumerate() {
            if value < 0.0 {
                out.push(Violation::Negative { field, class, value });
            }
        }
    }
    for (field, value) in [("beta1", model.beta1), ("beta", model.beta)] {
        if !(value > 0.0 && value.is_finite()) {
            out.push(Violation::NonPositiveBuffer { field, value });
        }
    }
    match &model.initial {
        InitialLaw::Deterministic { value } => {
            if !value.is_empty() && value.len() != n {
                out.push(Violation::LengthMismatch { field: "initial.value", len: value.len() });
            }
        }
        InitialLaw::Gaussian { mean, variance } => {
            if mean.len() != n {
                out.push(Violation::LengthMismatch { field: "initial.mean", len: mean.len() });
            }
            if variance.len() != n {
                out.push(Violation::LengthMismatch {
                    field: "initial.variance",
                    len: variance.len(),
                });
            }
            for (class, &value) in variance.iter().enumerate() {
                if value < 0.0 {
                    out.push(Violation::Negative { field: "initial.variance", class, value });
                }
            }
        }
    }

    if model.mu.len() == model.lambda.len() {
        let load: f64 = model.lambda.iter().zip(&model.mu).map(|(l, m)| l / m).sum();
        if !((load - 1.0).abs() <= LOAD_TOLERANCE) {
            out.push(Violation::NotCritical { load });
        }
    }

    ValidationReport { violations: out }
}

/// Which buffer scaling applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    HalfinWhitt,
    Conventional,
}

/// Quantities of the `n`-th system.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    pub n: u64,
    /// Exponent of the pattern period, `m = floor(n^a)`.
    pub a: f64,
    pub regime: Regime,
    pub mu_n: Vec<f64>,
    pub lambda_n: Vec<f64>,
    /// Per-class buffer sizes; all equal in the Halfin–Whitt regime.
    pub buffers: Vec<u64>,
    /// Arrivals per class per pattern period.
    pub m: u64,
    pub rho: Vec<f64>,
}

impl DerivedParams {
    pub fn num_classes(&self) -> usize {
        self.mu_n.len()
    }

    /// Pattern period `m / n`.
    pub fn tau(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn sqrt_n(&self) -> f64 {
        libm::sqrt(self.n as f64)
    }
}

/// `floor(x^a)` for integer `x`, immune to `powf` landing one ulp under an
/// exact integer.
pub(crate) fn floor_pow(x: u64, a: f64) -> u64 {
    let p = libm::pow(x as f64, a);
    let mut m = libm::floor(p) as u64;
    let next = (m + 1) as f64;
    if (next - p) <= 1e-12 * next {
        m += 1;
    }
    m
}

fn floor_scaled_sqrt(coef: f64, n: u64) -> u64 {
    let v = coef * libm::sqrt(n as f64);
    if v <= 0.0 {
        return 0;
    }
    let r = libm::round(v);
    if (v - r).abs() <= 1e-12 * r.max(1.0) {
        r as u64
    } else {
        libm::floor(v) as u64
    }
}

/// Per-`n` parameters: `mu_i + n^{-1/2} mu_hat_i`, `n lambda_i + n^{1/2}
/// lambda_hat_i`, the buffers and the pattern size `m = floor(n^a)`.
///
/// `a` must lie in `(0, 1)`; the limit theory wants `a < 1/2`.
pub fn derive(model: &ModelData, n: u64, a: f64, regime: Regime) -> Result<DerivedParams> {
    model.validate().into_result()?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!("a = {a} is outside (0, 1)")));
    }
    let nf = n as f64;
    let sn = libm::sqrt(nf);

    let mu_n: Vec<f64> = model.mu.iter().zip(&model.mu_hat).map(|(m, h)| m + h / sn).collect();
    let lambda_n: Vec<f64> =
        model.lambda.iter().zip(&model.lambda_hat).map(|(l, h)| nf * l + sn * h).collect();
    for (class, &value) in mu_n.iter().enumerate().chain(lambda_n.iter().enumerate()) {
        if !(value > 0.0) {
            return Err(Error::NonPositiveRate { class, value });
        }
    }

    let buffers: Vec<u64> = match regime {
        Regime::HalfinWhitt => vec![floor_scaled_sqrt(model.beta1, n); model.num_classes()],
        Regime::Conventional => {
            let decay = libm::pow(nf, -0.25);
            (0..model.num_classes())
                .map(|i| floor_scaled_sqrt(model.beta + model.eps.get(i).copied().unwrap_or(0.0) * decay, n))
                .collect()
        }
    };
    if buffers.contains(&0) {
        return Err(Error::DegenerateScale("buffer size floors to zero"));
    }

    let m = floor_pow(n, a);
    if m == 0 {
        return Err(Error::DegenerateScale("pattern size m = floor(n^a) is zero"));
    }

    Ok(DerivedParams { n, a, regime, mu_n, lambda_n, buffers, m, rho: model.rho() })
}

/// Serve-the-longest-queue: index of a longest queue, or `None` when every
/// queue is empty. Ties go to the `floor(draw * j)`-th of the `j` longest
/// queues in index order, so a uniform `draw` picks uniformly among them.
pub fn slq_select(queue_lengths: &[u64], draw: f64) -> Option<usize> {
    let max = *queue_lengths.iter().max()?;
    if max == 0 {
        return None;
    }
    let ties = queue_lengths.iter().filter(|&&q| q == max).count();
    let pick = if ties == 1 {
        0
    } else {
        (libm::floor(draw * ties as f64) as usize).min(ties - 1)
    };
    queue_lengths
        .iter()
        .enumerate()
        .filter(|(_, &q)| q == max)
        .nth(pick)
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_examples() {
        assert!(ModelData::with_rates(vec![1.0, 1.0], vec![2.0, 2.0]).validate().is_pass());

        let r = ModelData::with_rates(vec![1.0, 1.0], vec![1.0, 1.0]).validate();
        assert_eq!(r.violations, vec![Violation::NotCritical { load: 2.0 }]);

        let r = ModelData::with_rates(vec![1.0, 0.0], vec![2.0, 2.0]).validate();
        assert!(r
            .violations
            .contains(&Violation::NonPositive { field: "lambda", class: 1, value: 0.0 }));
    }

    #[test]
    fn validate_catches_shape_errors() {
        let mut m = ModelData::symmetric_pair(1.0);
        m.sigma_sq = vec![0.0];
        m.gamma_sq[0] = -1.0;
        m.beta = 0.0;
        let r = m.validate();
        assert!(r.violations.contains(&Violation::LengthMismatch { field: "sigma_sq", len: 1 }));
        assert!(r
            .violations
            .contains(&Violation::Negative { field: "gamma_sq", class: 0, value: -1.0 }));
        assert!(r.violations.contains(&Violation::NonPositiveBuffer { field: "beta", value: 0.0 }));
        assert!(matches!(r.into_result(), Err(Error::InvalidModel(_))));

        let single = ModelData::with_rates(vec![1.0], vec![1.0]);
        assert!(single.validate().violations.contains(&Violation::TooFewClasses(1)));
    }

    #[test]
    fn derive_example_n100() {
        let p = derive(&ModelData::symmetric_pair(1.0), 100, 0.5, Regime::HalfinWhitt).unwrap();
        assert_eq!(p.mu_n, vec![2.0, 2.0]);
        assert_eq!(p.lambda_n, vec![100.0, 100.0]);
        assert_eq!(p.buffers, vec![10, 10]);
        assert_eq!(p.m, 10);
        assert_eq!(p.tau(), 0.1);
    }

    #[test]
    fn derive_small_n() {
        let p = derive(&ModelData::symmetric_pair(1.0), 4, 0.3, Regime::HalfinWhitt).unwrap();
        assert_eq!(p.m, 1);
        assert_eq!(p.tau(), 0.25);
    }

    #[test]
    fn derive_rejects_negative_service_rate() {
        let mut m = ModelData::symmetric_pair(1.0);
        m.mu_hat = vec![-3.0, 0.0];
        assert_eq!(
            derive(&m, 1, 0.3, Regime::HalfinWhitt),
            Err(Error::NonPositiveRate { class: 0, value: -1.0 })
        );
    }

    #[test]
    fn derive_degenerate_buffer() {
        let m = ModelData::symmetric_pair(0.05);
        assert!(matches!(
            derive(&m, 100, 0.3, Regime::HalfinWhitt),
            Err(Error::DegenerateScale(_))
        ));
    }

    #[test]
    fn derive_conventional_buffers() {
        let mut m = ModelData::symmetric_pair(1.0);
        m.beta = 1.0;
        m.eps = vec![0.0, 0.5];
        let p = derive(&m, 6400, 0.3, Regime::Conventional).unwrap();
        // 80 and floor((1 + 0.5 / 6400^{1/4}) * 80) = floor(84.47...) = 84
        assert_eq!(p.buffers, vec![80, 84]);
    }

    #[test]
    fn floor_pow_exact_powers() {
        assert_eq!(floor_pow(100, 0.5), 10);
        assert_eq!(floor_pow(1000, 1.0 / 3.0), 10);
        assert_eq!(floor_pow(6400, 0.3), 13);
        assert_eq!(floor_pow(10_000, 0.3), 15);
    }

    #[test]
    fn slq_examples() {
        assert_eq!(slq_select(&[3, 1], 0.9), Some(0));
        assert_eq!(slq_select(&[2, 2], 0.49), Some(0));
        assert_eq!(slq_select(&[2, 2], 0.51), Some(1));
        assert_eq!(slq_select(&[0, 0], 0.3), None);
        assert_eq!(slq_select(&[1, 4, 0, 4, 4], 0.7), Some(4));
    }

    #[test]
    fn slq_tie_frequency() {
        use crate::rng::{stream_rng, Randomness};
        let mut rng = stream_rng(11);
        let draws = 100_000;
        let ones = (0..draws).filter(|_| slq_select(&[2, 2], rng.uniform()) == Some(0)).count();
        let freq = ones as f64 / draws as f64;
        assert!((0.49..=0.51).contains(&freq), "{freq}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn slq_returns_a_longest_queue(q in proptest::collection::vec(0u64..6, 2..6), draw in 0.0f64..1.0) {
            let max = *q.iter().max().unwrap();
            match slq_select(&q, draw) {
                None => prop_assert_eq!(max, 0),
                Some(i) => {
                    prop_assert!(max > 0);
                    prop_assert_eq!(q[i], max);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn derive_monotone_in_n(n in 1u64..200_000, beta1 in 0.2f64..3.0, a in 0.05f64..0.49) {
            let m = ModelData::symmetric_pair(beta1);
            let lo = derive(&m, n, a, Regime::HalfinWhitt);
            let hi = derive(&m, n + 1, a, Regime::HalfinWhitt);
            if let (Ok(lo), Ok(hi)) = (&lo, &hi) {
                prop_assert!(hi.buffers[0] >= lo.buffers[0]);
                prop_assert!(hi.m >= lo.m);
            }
            prop_assert_eq!(lo, derive(&m, n, a, Regime::HalfinWhitt));
        }
    }
}
