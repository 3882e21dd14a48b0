//! Limit objects: the drift `b`, the half-space reflection map, the Euler
//! scheme for the reflected SDE of the Halfin–Whitt limit, the two-sided
//! Skorohod map on `[0, a]`, and the reflected Brownian motion of the
//! conventional limit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::conv_sim::ConvLimitConstants;
use crate::model::ModelData;
use crate::path::GridPath;
use crate::rng::Randomness;
use crate::{Error, Result};

/// `b(x)_i = -mu_i (x_i - (1.x)^+ / N)`.
pub fn drift_b(x: &[f64], mu: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    drift_into(x, mu, &mut out);
    out
}

fn drift_into(x: &[f64], mu: &[f64], out: &mut [f64]) {
    let share = x.iter().sum::<f64>().max(0.0) / x.len() as f64;
    for ((o, xi), m) in out.iter_mut().zip(x).zip(mu) {
        *o = -m * (xi - share);
    }
}

/// Reflection of `f` into `{1.x <= beta_total}` along `-e_k`.
///
/// Returns `(y, g)` with `g(t) = max_{u <= t} (1.f(u) - beta_total)^+` and
/// `y = f - g e_k`.
pub fn gamma_halfspace(f: &GridPath, beta_total: f64, k: usize) -> Result<(GridPath, GridPath)> {
    if k >= f.dim() {
        return Err(Error::InvalidParameter(format!("direction e_{k} outside dimension {}", f.dim())));
    }
    let mut g = Vec::with_capacity(f.len());
    let mut y = Vec::with_capacity(f.len() * f.dim());
    let mut run: f64 = 0.0;
    for row in f.rows() {
        run = run.max(row.iter().sum::<f64>() - beta_total);
        g.push(run);
        y.extend(row.iter().enumerate().map(|(i, v)| if i == k { v - run } else { *v }));
    }
    Ok((GridPath::new(f.times().to_vec(), f.dim(), y)?, GridPath::scalar(f.times().to_vec(), g)?))
}

/// Data of the reflected SDE
/// `X = X0 + W + int b(X) - L e_k` on `G = {1.x <= N beta}`,
/// `W` a `(lambda_hat, diag(a_diag))` Brownian motion.
#[derive(Debug, Clone, PartialEq)]
pub struct HwLimitParams {
    pub lambda_hat: Vec<f64>,
    pub a_diag: Vec<f64>,
    pub mu: Vec<f64>,
    pub beta: f64,
    /// Zero-based reflection direction.
    pub k: usize,
    pub x0: Vec<f64>,
}

impl HwLimitParams {
    /// `a_diag_i = lambda_i (sigma_i^2 + 1)`, `beta = beta1`, started at the
    /// origin.
    pub fn from_model(model: &ModelData, k: usize) -> Self {
        let n = model.num_classes();
        HwLimitParams {
            lambda_hat: model.lambda_hat.clone(),
            a_diag: model.lambda.iter().zip(&model.sigma_sq).map(|(l, s)| l * (s + 1.0)).collect(),
            mu: model.mu.clone(),
            beta: model.beta1,
            k,
            x0: vec![0.0; n],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.mu.len()
    }

    pub fn beta_total(&self) -> f64 {
        self.num_classes() as f64 * self.beta
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_classes();
        if [self.lambda_hat.len(), self.a_diag.len(), self.x0.len()].iter().any(|&l| l != n) || self.k >= n {
            return Err(Error::InvalidParameter("limit parameters disagree on dimension".into()));
        }
        if self.a_diag.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::InvalidParameter("diffusion coefficients must be >= 0".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {} must be positive", self.beta)));
        }
        if self.x0.iter().sum::<f64>() > self.beta_total() {
            return Err(Error::InvalidParameter("X0 lies outside the domain".into()));
        }
        Ok(())
    }
}

/// Number of Euler steps and their length for horizon `horizon`; the step
/// is `dt` shrunk so the steps tile `[0, horizon]` exactly.
fn step_plan(dt: f64, horizon: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    let steps = libm::ceil(horizon / dt - 1e-9).max(1.0) as usize;
    Ok((steps, horizon / steps as f64))
}

fn step_times(steps: usize, h: f64, horizon: f64) -> Vec<f64> {
    (0..=steps).map(|j| if j == steps { horizon } else { j as f64 * h }).collect()
}

struct HwEuler<'a> {
    p: &'a HwLimitParams,
    h: f64,
    vol: Vec<f64>,
    x: Vec<f64>,
    drift: Vec<f64>,
    regulator: f64,
}

impl<'a> HwEuler<'a> {
    fn new(p: &'a HwLimitParams, h: f64) -> Self {
        let sh = libm::sqrt(h);
        HwEuler {
            p,
            h,
            vol: p.a_diag.iter().map(|a| libm::sqrt(*a) * sh).collect(),
            x: p.x0.clone(),
            drift: vec![0.0; p.num_classes()],
            regulator: 0.0,
        }
    }

    /// One step; returns the regulator increment.
    fn step<R: Randomness + ?Sized>(&mut self, rng: &mut R) -> f64 {
        drift_into(&self.x, &self.p.mu, &mut self.drift);
        for i in 0..self.x.len() {
            let noise = if self.vol[i] > 0.0 { self.vol[i] * rng.standard_normal() } else { 0.0 };
            self.x[i] += (self.drift[i] + self.p.lambda_hat[i]) * self.h + noise;
        }
        let excess = (self.x.iter().sum::<f64>() - self.p.beta_total()).max(0.0);
        self.x[self.p.k] -= excess;
        self.regulator += excess;
        excess
    }
}

/// Euler path of the reflected SDE and its regulator `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct HwLimitPath {
    pub x: GridPath,
    pub regulator: GridPath,
}

/// Step-and-project Euler scheme: `x' = x + (b(x) + lambda_hat) dt +
/// sqrt(A dt) xi`, then `x = x' - (1.x' - N beta)^+ e_k`.
pub fn simulate_hw_limit<R: Randomness + ?Sized>(
    p: &HwLimitParams,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<HwLimitPath> {
    p.validate()?;
    let (steps, h) = step_plan(dt, horizon)?;
    let n = p.num_classes();
    let mut e = HwEuler::new(p, h);
    let mut xs = Vec::with_capacity((steps + 1) * n);
    let mut ls = Vec::with_capacity(steps + 1);
    xs.extend_from_slice(&e.x);
    ls.push(0.0);
    for _ in 0..steps {
        e.step(rng);
        xs.extend_from_slice(&e.x);
        ls.push(e.regulator);
    }
    let times = step_times(steps, h, horizon);
    Ok(HwLimitPath { x: GridPath::new(times.clone(), n, xs)?, regulator: GridPath::scalar(times, ls)? })
}

/// `X(horizon)` of the same scheme, without storing the path.
pub fn hw_limit_terminal<R: Randomness + ?Sized>(
    p: &HwLimitParams,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    p.validate()?;
    let (steps, h) = step_plan(dt, horizon)?;
    let mut e = HwEuler::new(p, h);
    for _ in 0..steps {
        e.step(rng);
    }
    Ok(e.x)
}

/// Skorohod map on `[0, a]` with its two regulators.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalReflection {
    pub phi: GridPath,
    /// Pushes up at 0.
    pub lower: GridPath,
    /// Pushes down at `a`.
    pub upper: GridPath,
}

/// `phi_0 = clamp(psi_0)`, `phi_{j+1} = clamp(phi_j + psi_{j+1} - psi_j)`,
/// with whatever the clamp removes credited to the active regulator.
pub fn gamma_interval_regulated(psi: &GridPath, a: f64) -> Result<IntervalReflection> {
    if psi.dim() != 1 {
        return Err(Error::InvalidParameter("the interval map acts on scalar paths".into()));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("interval length {a} must be positive")));
    }
    let len = psi.len();
    let (mut phi, mut lo, mut hi) = (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len));
    let (mut eta1, mut eta2) = (0.0, 0.0);
    let mut prev_psi = 0.0;
    let mut cur = 0.0;
    for (j, v) in psi.component(0).enumerate() {
        let proposal = if j == 0 { v } else { cur + (v - prev_psi) };
        if proposal < 0.0 {
            eta1 += -proposal;
            cur = 0.0;
        } else if proposal > a {
            eta2 += proposal - a;
            cur = a;
        } else {
            cur = proposal;
        }
        prev_psi = v;
        phi.push(cur);
        lo.push(eta1);
        hi.push(eta2);
    }
    let t = psi.times().to_vec();
    Ok(IntervalReflection {
        phi: GridPath::scalar(t.clone(), phi)?,
        lower: GridPath::scalar(t.clone(), lo)?,
        upper: GridPath::scalar(t, hi)?,
    })
}

pub fn gamma_interval(psi: &GridPath, a: f64) -> Result<GridPath> {
    Ok(gamma_interval_regulated(psi, a)?.phi)
}

/// Reflected `(m_tilde, a_tilde)` Brownian motion on `[0, beta]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvLimitParams {
    pub m_tilde: f64,
    pub a_tilde: f64,
    pub beta: f64,
}

impl ConvLimitParams {
    pub fn new(constants: &ConvLimitConstants, beta: f64) -> Self {
        ConvLimitParams { m_tilde: constants.m_tilde, a_tilde: constants.a_tilde, beta }
    }

    fn validate(&self) -> Result<()> {
        if !(self.a_tilde >= 0.0) || !(self.beta > 0.0) {
            return Err(Error::InvalidParameter("need a_tilde >= 0 and beta > 0".into()));
        }
        Ok(())
    }
}

/// Brownian path from 0 with increments `m dt + sqrt(A dt) xi`, reflected
/// into `[0, beta]`.
pub fn simulate_conv_limit<R: Randomness + ?Sized>(
    p: &ConvLimitParams,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<GridPath> {
    p.validate()?;
    let (steps, h) = step_plan(dt, horizon)?;
    let vol = libm::sqrt(p.a_tilde * h);
    let mut w = Vec::with_capacity(steps + 1);
    let mut cur = 0.0;
    w.push(cur);
    for _ in 0..steps {
        let noise = if vol > 0.0 { vol * rng.standard_normal() } else { 0.0 };
        cur += p.m_tilde * h + noise;
        w.push(cur);
    }
    gamma_interval(&GridPath::scalar(step_times(steps, h, horizon), w)?, p.beta)
}

/// Terminal value of [`simulate_conv_limit`] without storing the path; it
/// consumes the generator identically.
pub fn conv_limit_terminal<R: Randomness + ?Sized>(
    p: &ConvLimitParams,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<f64> {
    p.validate()?;
    let (steps, h) = step_plan(dt, horizon)?;
    let vol = libm::sqrt(p.a_tilde * h);
    let mut phi: f64 = 0.0;
    for _ in 0..steps {
        let noise = if vol > 0.0 { vol * rng.standard_normal() } else { 0.0 };
        phi = (phi + p.m_tilde * h + noise).clamp(0.0, p.beta);
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::uniform_grid;
    use crate::rng::{stream_rng, StreamRng};
    use proptest::prelude::*;
    use std::vec::Vec;

    const SQRT2: f64 = core::f64::consts::SQRT_2;

    #[test]
    fn drift_examples() {
        assert_eq!(drift_b(&[0.0, 0.0], &[2.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(drift_b(&[1.0, 1.0], &[2.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(drift_b(&[1.0, -1.0], &[2.0, 2.0]), vec![-2.0, 2.0]);
        // (1.x)^+ = 3, share 1.5
        assert_eq!(drift_b(&[2.0, 1.0], &[1.0, 4.0]), vec![-0.5, 2.0]);
    }

    #[test]
    fn halfspace_interior_path_untouched() {
        let t = uniform_grid(1.0, 11).unwrap();
        let f = GridPath::from_fn(t, 2, |_, s, r| {
            r[0] = s * 0.1;
            r[1] = -s;
        })
        .unwrap();
        let (y, g) = gamma_halfspace(&f, 1.0, 0).unwrap();
        assert_eq!(y, f);
        assert!(g.rows().all(|r| r[0] == 0.0));
    }

    #[test]
    fn halfspace_diagonal_example() {
        let t = uniform_grid(1.0, 9).unwrap();
        let f = GridPath::from_fn(t, 2, |_, s, r| {
            r[0] = s;
            r[1] = s;
        })
        .unwrap();
        let (y, g) = gamma_halfspace(&f, 1.0, 0).unwrap();
        for (j, &s) in f.times().iter().enumerate() {
            let want = (2.0 * s - 1.0).max(0.0);
            assert!((g.value(j)[0] - want).abs() < 1e-15);
            assert!((y.value(j)[0] - (s - want)).abs() < 1e-15);
            assert_eq!(y.value(j)[1], s);
        }
    }

    #[test]
    fn halfspace_constant_outside() {
        let f = GridPath::new(vec![0.0, 1.0], 2, vec![1.5, 0.5, 1.5, 0.5]).unwrap();
        let (y, g) = gamma_halfspace(&f, 1.0, 1).unwrap();
        assert!(g.rows().all(|r| r[0] == 1.0));
        assert!(y.rows().all(|r| r[0] + r[1] == 1.0));
    }

    fn random_walk(rng: &mut StreamRng, len: usize, dim: usize, scale: f64) -> GridPath {
        let t = uniform_grid(1.0, len).unwrap();
        let mut cur = vec![0.0; dim];
        GridPath::from_fn(t, dim, |_, _, r| {
            for (c, v) in cur.iter_mut().zip(r.iter_mut()) {
                *c += scale * rng.standard_normal();
                *v = *c;
            }
        })
        .unwrap()
    }

    #[test]
    fn halfspace_lipschitz_and_modulus() {
        let mut rng = stream_rng(17);
        let c = 1.0 + SQRT2;
        for _ in 0..1000 {
            let f = random_walk(&mut rng, 64, 2, 0.2);
            let g = random_walk(&mut rng, 64, 2, 0.2);
            let beta = 0.5 * rng.uniform();
            let (yf, lf) = gamma_halfspace(&f, beta, 0).unwrap();
            let (yg, _) = gamma_halfspace(&g, beta, 0).unwrap();
            let lhs = yf.sup_distance(&yg).unwrap();
            let rhs = f.sup_distance(&g).unwrap();
            assert!(lhs <= c * rhs * (1.0 + 1e-12), "{lhs} > {c} * {rhs}");
            for theta in [0.125, 0.25] {
                assert!(yf.modulus(theta) <= c * f.modulus(theta) * (1.0 + 1e-12));
            }
            // domain and complementarity
            for j in 0..yf.len() {
                let s: f64 = yf.value(j).iter().sum();
                assert!(s <= beta + 1e-12);
                if j > 0 && lf.value(j)[0] > lf.value(j - 1)[0] {
                    assert!((s - beta).abs() <= 1e-12);
                }
            }
        }
    }

    fn hw_params(a: f64, lambda_hat: f64, beta: f64, k: usize) -> HwLimitParams {
        HwLimitParams {
            lambda_hat: vec![lambda_hat; 2],
            a_diag: vec![a; 2],
            mu: vec![2.0, 2.0],
            beta,
            k,
            x0: vec![0.0, 0.0],
        }
    }

    #[test]
    fn hw_limit_fixed_point() {
        let p = hw_params(0.0, 0.0, 0.5, 0);
        let path = simulate_hw_limit(&p, 1e-3, 1.0, &mut stream_rng(0)).unwrap();
        assert!(path.x.rows().all(|r| r == [0.0, 0.0]));
        assert!(path.regulator.rows().all(|r| r[0] == 0.0));
    }

    #[test]
    fn hw_limit_self_convergence() {
        let p = hw_params(0.0, 3.0, 0.25, 0);
        let dt = 1e-3;
        let coarse = hw_limit_terminal(&p, dt, 1.0, &mut stream_rng(0)).unwrap();
        let fine = hw_limit_terminal(&p, dt / 10.0, 1.0, &mut stream_rng(0)).unwrap();
        let d = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 5.0 * dt, "{d}");
        // slid along the boundary with all the excess taken from class 1
        assert!((coarse[0] + coarse[1] - 0.5).abs() < 1e-12);
        assert!(coarse[0] < 0.0 && coarse[1] > 1.0);
        // and the full path agrees with the terminal-only run
        let path = simulate_hw_limit(&p, dt, 1.0, &mut stream_rng(0)).unwrap();
        assert_eq!(path.x.terminal(), coarse.as_slice());
    }

    #[test]
    fn hw_limit_stays_in_domain() {
        let p = hw_params(1.0, 0.0, 0.5, 1);
        for seed in 0..20 {
            let path = simulate_hw_limit(&p, 1e-3, 1.0, &mut stream_rng(seed)).unwrap();
            for j in 0..path.x.len() {
                let s: f64 = path.x.value(j).iter().sum();
                assert!(s <= 1.0 + 1e-12);
                if j > 0 {
                    let dl = path.regulator.value(j)[0] - path.regulator.value(j - 1)[0];
                    assert!(dl >= 0.0);
                    if dl > 0.0 {
                        assert!((s - 1.0).abs() <= 1e-12);
                    }
                }
            }
        }
        let a = simulate_hw_limit(&p, 1e-3, 1.0, &mut stream_rng(3)).unwrap();
        let b = simulate_hw_limit(&p, 1e-3, 1.0, &mut stream_rng(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hw_limit_rejects_bad_input() {
        let p = hw_params(1.0, 0.0, 0.5, 0);
        assert_eq!(simulate_hw_limit(&p, 0.0, 1.0, &mut stream_rng(0)), Err(Error::NonPositiveStep(0.0)));
        let mut outside = p.clone();
        outside.x0 = vec![1.0, 1.0];
        assert!(simulate_hw_limit(&outside, 1e-3, 1.0, &mut stream_rng(0)).is_err());
    }

    #[test]
    fn interval_examples() {
        let t = uniform_grid(1.0, 101).unwrap();
        let flat = GridPath::scalar(t.clone(), vec![0.5; 101]).unwrap();
        assert!(gamma_interval(&flat, 1.0).unwrap().component(0).all(|v| v == 0.5));

        let up = GridPath::scalar(t.clone(), t.iter().map(|s| 2.0 * s).collect()).unwrap();
        let phi = gamma_interval(&up, 1.0).unwrap();
        for (s, v) in t.iter().zip(phi.component(0)) {
            assert!((v - (2.0 * s).min(1.0)).abs() < 1e-12);
        }

        let down = GridPath::scalar(t.clone(), t.iter().map(|s| -s).collect()).unwrap();
        assert!(gamma_interval(&down, 1.0).unwrap().component(0).all(|v| v == 0.0));
    }

    fn walk_1d(rng: &mut StreamRng, len: usize, dyadic: bool) -> GridPath {
        let mut cur = 0.0;
        let values = (0..len)
            .map(|_| {
                let step = rng.standard_normal() * 0.1;
                cur += if dyadic { libm::round(step * 1024.0) / 1024.0 } else { step };
                cur
            })
            .collect();
        GridPath::scalar(uniform_grid(1.0, len).unwrap(), values).unwrap()
    }

    fn check_comparison(rng: &mut StreamRng, dyadic: bool, slack: f64) {
        for _ in 0..1000 {
            let psi = walk_1d(rng, 200, dyadic);
            let (mut a1, mut a2) = (rng.uniform() + 0.01, rng.uniform() + 0.01);
            if dyadic {
                a1 = libm::round(a1 * 64.0).max(1.0) / 64.0;
                a2 = libm::round(a2 * 64.0).max(1.0) / 64.0;
            }
            if a1 == a2 {
                continue;
            }
            let (a1, a2) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
            let d = gamma_interval(&psi, a1).unwrap().sup_distance(&gamma_interval(&psi, a2).unwrap()).unwrap();
            assert!(d <= a2 - a1 + slack, "{d} > {}", a2 - a1);
        }
    }

    #[test]
    fn interval_comparison_bound() {
        let mut rng = stream_rng(23);
        // On a dyadic lattice every operation is exact.
        check_comparison(&mut rng, true, 0.0);
        check_comparison(&mut rng, false, 1e-12);
    }

    #[test]
    fn interval_complementarity() {
        let mut rng = stream_rng(29);
        for _ in 0..1000 {
            let psi = walk_1d(&mut rng, 200, false);
            let a = 0.05 + rng.uniform();
            let r = gamma_interval_regulated(&psi, a).unwrap();
            for j in 0..psi.len() {
                let phi = r.phi.value(j)[0];
                assert!((0.0..=a).contains(&phi));
                let (l, u) = (r.lower.value(j)[0], r.upper.value(j)[0]);
                assert!((phi - (psi.value(j)[0] + l - u)).abs() < 1e-9);
                let (pl, pu) = if j == 0 { (0.0, 0.0) } else { (r.lower.value(j - 1)[0], r.upper.value(j - 1)[0]) };
                assert!(l >= pl && u >= pu);
                if l > pl {
                    assert_eq!(phi, 0.0);
                }
                if u > pu {
                    assert_eq!(phi, a);
                }
            }
        }
    }

    #[test]
    fn conv_limit_deterministic_cases() {
        let zero = ConvLimitParams { m_tilde: 0.0, a_tilde: 0.0, beta: 1.0 };
        let p = simulate_conv_limit(&zero, 1e-3, 1.0, &mut stream_rng(0)).unwrap();
        assert!(p.component(0).all(|v| v == 0.0));

        let drift = ConvLimitParams { m_tilde: 1.0, a_tilde: 0.0, beta: 0.5 };
        let p = simulate_conv_limit(&drift, 1e-3, 1.0, &mut stream_rng(0)).unwrap();
        for (t, v) in p.times().iter().zip(p.component(0)) {
            assert!((v - t.min(0.5)).abs() < 1e-12, "{t} {v}");
        }
    }

    #[test]
    fn conv_limit_determinism_and_terminal() {
        let p = ConvLimitParams { m_tilde: 0.0, a_tilde: 1.0, beta: 1.0 };
        let a = simulate_conv_limit(&p, 1e-3, 1.0, &mut stream_rng(8)).unwrap();
        let b = simulate_conv_limit(&p, 1e-3, 1.0, &mut stream_rng(8)).unwrap();
        assert_eq!(a, b);
        let t = conv_limit_terminal(&p, 1e-3, 1.0, &mut stream_rng(8)).unwrap();
        assert!((a.terminal()[0] - t).abs() < 1e-12);
        assert!(simulate_conv_limit(&p, -1.0, 1.0, &mut stream_rng(0)).is_err());
    }

    /// Two fine Gaussian draws per coordinate merged into one coarse draw,
    /// so the coarse and fine schemes share their Brownian path.
    struct Coarsened<'a> {
        inner: &'a mut StreamRng,
        dim: usize,
        buf: Vec<f64>,
        next: usize,
    }

    impl Randomness for Coarsened<'_> {
        fn uniform(&mut self) -> f64 {
            unreachable!()
        }
        fn exponential(&mut self, _: f64) -> f64 {
            unreachable!()
        }
        fn gamma(&mut self, _: f64, _: f64) -> f64 {
            unreachable!()
        }
        fn standard_normal(&mut self) -> f64 {
            if self.next == 0 {
                self.buf.clear();
                for _ in 0..2 * self.dim {
                    let z = self.inner.standard_normal();
                    self.buf.push(z);
                }
            }
            let i = self.next;
            self.next = (self.next + 1) % self.dim;
            (self.buf[i] + self.buf[self.dim + i]) / SQRT2
        }
    }

    #[test]
    fn hw_euler_weak_self_convergence() {
        let p = hw_params(1.0, 0.0, 0.5, 0);
        let dt = 1e-3;
        let paths = 10_000;
        let (mut coarse, mut fine) = ([0.0; 2], [0.0; 2]);
        for seed in 0..paths {
            let mut rng = stream_rng(seed);
            let f = hw_limit_terminal(&p, dt / 2.0, 1.0, &mut rng).unwrap();
            let mut rng = stream_rng(seed);
            let mut merged = Coarsened { inner: &mut rng, dim: 2, buf: Vec::new(), next: 0 };
            let c = hw_limit_terminal(&p, dt, 1.0, &mut merged).unwrap();
            for i in 0..2 {
                coarse[i] += c[i] / paths as f64;
                fine[i] += f[i] / paths as f64;
            }
        }
        for i in 0..2 {
            let d = (coarse[i] - fine[i]).abs();
            assert!(d < 3.0 * dt, "coordinate {i}: {d}");
        }
    }

    proptest! {
        #[test]
        fn halfspace_regulator_monotone(vals in proptest::collection::vec(-3.0f64..3.0, 4..60), beta in 0.1f64..2.0, k in 0usize..2) {
            let len = vals.len() / 2;
            let f = GridPath::new(uniform_grid(1.0, len).unwrap(), 2, vals[..2 * len].to_vec()).unwrap();
            let (y, g) = gamma_halfspace(&f, beta, k).unwrap();
            let gs: Vec<f64> = g.component(0).collect();
            prop_assert!(gs.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(gs[0] >= 0.0);
            for row in y.rows() {
                prop_assert!(row.iter().sum::<f64>() <= beta + 1e-12);
            }
        }
    }
}
