//! Diffusion scaling of simulated trajectories and state-space-collapse
//! diagnostics.

use alloc::vec::Vec;

use crate::conv_sim::{conv_limit_params, ConvTrajectory};
use crate::hw_sim::HwTrajectory;
use crate::model::{DerivedParams, ModelData};
use crate::path::GridPath;
use crate::{Error, Result};

/// `X_hat`, `Q_hat`, `Psi_hat` and `R_hat` of a Halfin–Whitt run.
#[derive(Debug, Clone, PartialEq)]
pub struct HwScaled {
    pub x: GridPath,
    pub q: GridPath,
    pub psi: GridPath,
    pub r: GridPath,
}

fn check_grid(grid: &[f64], horizon: f64) -> Result<()> {
    for &t in grid {
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::GridOutOfRange(t));
        }
    }
    Ok(())
}

/// `Q_hat = Q / sqrt(n)`, `Psi_hat = (Psi - n rho) / sqrt(n)`,
/// `R_hat = R / sqrt(n)` and `X_hat = Q_hat + Psi_hat`, sampled
/// right-continuously on `grid`.
pub fn diffusion_scale_hw(traj: &HwTrajectory, params: &DerivedParams, grid: &[f64]) -> Result<HwScaled> {
    check_grid(grid, traj.horizon())?;
    let n = traj.num_classes();
    let sn = params.sqrt_n();
    let nf = params.n as f64;
    let centre: Vec<f64> = params.rho.iter().map(|r| nf * r).collect();

    let rows = grid.len() * n;
    let (mut x, mut q, mut psi, mut r) =
        (Vec::with_capacity(rows), Vec::with_capacity(rows), Vec::with_capacity(rows), Vec::with_capacity(rows));
    for &t in grid {
        let s = traj.state_at(t);
        for (i, c) in centre.iter().enumerate() {
            let qi = s.q()[i] as f64 / sn;
            let pi = (s.psi()[i] as f64 - c) / sn;
            q.push(qi);
            psi.push(pi);
            x.push(qi + pi);
            r.push(s.r()[i] as f64 / sn);
        }
    }
    let g = grid.to_vec();
    Ok(HwScaled {
        x: GridPath::new(g.clone(), n, x)?,
        q: GridPath::new(g.clone(), n, q)?,
        psi: GridPath::new(g.clone(), n, psi)?,
        r: GridPath::new(g, n, r)?,
    })
}

/// `max_{i,t} |Q_hat_i(t) - (1.X_hat(t))^+ / N|`.
pub fn ssc_deviation_hw(x: &GridPath, q: &GridPath) -> Result<f64> {
    if !x.same_grid(q) || x.dim() != q.dim() {
        return Err(Error::GridMismatch);
    }
    let n = x.dim() as f64;
    Ok(x.rows()
        .zip(q.rows())
        .map(|(xr, qr)| {
            let share = xr.iter().sum::<f64>().max(0.0) / n;
            qr.iter().map(|v| (v - share).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvScaled {
    /// `X_hat_i = X_i / sqrt(n)`.
    pub x: GridPath,
    /// `X_tilde = alpha sum_i X_hat_i / mu_i`.
    pub workload: GridPath,
    /// `max_{i,j} sup_t |X_hat_i - X_hat_j|`.
    pub ssc: f64,
}

pub fn conv_scale(traj: &ConvTrajectory, model: &ModelData, n: u64, grid: &[f64]) -> Result<ConvScaled> {
    check_grid(grid, traj.horizon())?;
    let mu = &model.mu;
    let alpha = conv_limit_params(model)?.alpha;
    let classes = traj.num_classes();
    if mu.len() != classes {
        return Err(Error::InvalidParameter("one service rate per class required".into()));
    }
    let sn = libm::sqrt(n as f64);
    let mut x = Vec::with_capacity(grid.len() * classes);
    let mut w = Vec::with_capacity(grid.len());
    let mut ssc: f64 = 0.0;
    for &t in grid {
        let s = traj.state_at(t);
        let row: Vec<f64> = s.x().iter().map(|&v| v as f64 / sn).collect();
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        ssc = ssc.max(hi - lo);
        w.push(alpha * row.iter().zip(mu).map(|(v, m)| v / m).sum::<f64>());
        x.extend(row);
    }
    Ok(ConvScaled {
        x: GridPath::new(grid.to_vec(), classes, x)?,
        workload: GridPath::scalar(grid.to_vec(), w)?,
        ssc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrivals::{ArrivalEvent, ArrivalSource};
    use crate::conv_sim::{simulate_conventional, ConvConfig};
    use crate::distribution::TimeDistribution;
    use crate::hw_sim::{simulate_hw, HwConfig, HwState};
    use crate::model::{derive, Regime};
    use crate::path::uniform_grid;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    fn params(n: u64) -> DerivedParams {
        derive(&ModelData::symmetric_pair(1.0), n, 0.3, Regime::HalfinWhitt).unwrap()
    }

    fn frozen(n: u64, q: Vec<u64>, psi: Vec<u64>) -> HwTrajectory {
        let cfg = HwConfig { servers: n, service_rates: vec![0.0, 0.0], buffer: 1000 };
        let none = ArrivalSource::poisson(0, 0.0).unwrap();
        simulate_hw(&cfg, HwState::with_queues(q, psi), vec![none], 1.0, &mut stream_rng(0)).unwrap()
    }

    #[test]
    fn empty_system_scaling() {
        let p = params(400);
        let t = frozen(400, vec![0, 0], vec![0, 0]);
        let s = diffusion_scale_hw(&t, &p, &uniform_grid(1.0, 16).unwrap()).unwrap();
        assert!(s.x.rows().all(|r| r == [-10.0, -10.0]));
        assert!(s.r.rows().all(|r| r == [0.0, 0.0]));
    }

    #[test]
    fn centred_and_queue_scaling() {
        let p = params(400);
        let t = frozen(400, vec![5, 0], vec![200, 200]);
        let s = diffusion_scale_hw(&t, &p, &[0.0, 0.5, 1.0]).unwrap();
        assert!(s.psi.rows().all(|r| r == [0.0, 0.0]));
        assert!(s.q.rows().all(|r| r == [0.25, 0.0]));
        assert!(diffusion_scale_hw(&t, &p, &[0.0, 1.5]).is_err());
    }

    #[test]
    fn ssc_examples() {
        let g = vec![0.0, 1.0];
        let x = GridPath::new(g.clone(), 2, vec![0.5, 0.5, 1.0, 1.0]).unwrap();
        let q = GridPath::new(g.clone(), 2, vec![0.5, 0.5, 1.0, 1.0]).unwrap();
        assert_eq!(ssc_deviation_hw(&x, &q).unwrap(), 0.0);

        let x = GridPath::new(g.clone(), 2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let q = GridPath::new(g.clone(), 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(ssc_deviation_hw(&x, &q).unwrap(), 0.5);

        let z = GridPath::new(g.clone(), 2, vec![0.0; 4]).unwrap();
        assert_eq!(ssc_deviation_hw(&z, &z).unwrap(), 0.0);

        let other = GridPath::new(vec![0.0, 2.0], 2, vec![0.0; 4]).unwrap();
        assert_eq!(ssc_deviation_hw(&z, &other), Err(Error::GridMismatch));
    }

    #[test]
    fn conv_scaling_example() {
        // X = (4, 1) held from t = 0 by a long deterministic service.
        let cfg = ConvConfig { service: vec![TimeDistribution::deterministic(10.0).unwrap(); 2], buffers: vec![9, 9] };
        let ev = [(0, 0), (0, 0), (0, 0), (0, 0), (0, 1)]
            .iter()
            .map(|&(_, class)| ArrivalEvent { time: 0.0, class, multiplicity: 1 })
            .collect();
        let t = simulate_conventional(&cfg, vec![ArrivalSource::scripted(ev).unwrap()], 1.0, &mut stream_rng(0)).unwrap();
        let model = ModelData::with_rates(vec![1.0, 1.0], vec![2.0, 2.0]);
        let s = conv_scale(&t, &model, 4, &[0.0, 1.0]).unwrap();
        assert_eq!(s.x.terminal(), &[2.0, 0.5]);
        assert_eq!(s.workload.terminal(), &[1.25]);
        assert_eq!(s.ssc, 1.5);
    }

    #[test]
    fn conv_scaling_empty() {
        let cfg = ConvConfig { service: vec![TimeDistribution::deterministic(1.0).unwrap(); 2], buffers: vec![9, 9] };
        let t = simulate_conventional(&cfg, vec![ArrivalSource::poisson(0, 0.0).unwrap()], 1.0, &mut stream_rng(0)).unwrap();
        let model = ModelData::with_rates(vec![1.0, 1.0], vec![2.0, 2.0]);
        let s = conv_scale(&t, &model, 100, &uniform_grid(1.0, 8).unwrap()).unwrap();
        assert!(s.x.rows().all(|r| r == [0.0, 0.0]));
        assert!(s.workload.rows().all(|r| r == [0.0]));
        assert_eq!(s.ssc, 0.0);
    }

    proptest! {
        #[test]
        fn x_is_q_plus_psi_and_linear(q1 in 0u64..50, q2 in 0u64..50, p1 in 0u64..100, p2 in 0u64..100) {
            let p = params(400);
            let grid = [0.0, 0.3, 1.0];
            // Keep non-idling: queues only when servers are full.
            let (p1, p2) = if q1 + q2 > 0 { (200, 200) } else { (p1, p2) };
            let s = diffusion_scale_hw(&frozen(400, vec![q1, q2], vec![p1, p2]), &p, &grid).unwrap();
            for ((x, q), psi) in s.x.rows().zip(s.q.rows()).zip(s.psi.rows()) {
                for i in 0..2 {
                    prop_assert_eq!(x[i], q[i] + psi[i]);
                }
            }
            let d = diffusion_scale_hw(&frozen(400, vec![2 * q1, 2 * q2], vec![200, 200]), &p, &grid).unwrap();
            for (a, b) in s.q.rows().zip(d.q.rows()) {
                for i in 0..2 {
                    prop_assert_eq!(2.0 * a[i], b[i]);
                }
            }
            prop_assert!(ssc_deviation_hw(&s.x, &s.q).unwrap() >= 0.0);
        }
    }
}
