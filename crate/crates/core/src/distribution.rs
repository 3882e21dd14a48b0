//! Positive time distributions parameterized by mean and squared coefficient
//! of variation (scv).

use alloc::format;
use alloc::string::ToString;

use crate::rng::Randomness;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DistKind {
    Deterministic,
    Exponential,
    Gamma,
    LogNormal,
}

impl DistKind {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "deterministic" => Ok(DistKind::Deterministic),
            "exponential" => Ok(DistKind::Exponential),
            "gamma" => Ok(DistKind::Gamma),
            "lognormal" | "log-normal" => Ok(DistKind::LogNormal),
            other => Err(Error::UnsupportedDistribution(other.to_string())),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            DistKind::Deterministic => "deterministic",
            DistKind::Exponential => "exponential",
            DistKind::Gamma => "gamma",
            DistKind::LogNormal => "lognormal",
        }
    }
}

/// A service or inter-arrival law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeDistribution {
    kind: DistKind,
    mean: f64,
    scv: f64,
}

impl TimeDistribution {
    /// Deterministic laws need `scv = 0` and exponential ones `scv = 1`;
    /// gamma and lognormal accept any `scv > 0`.
    pub fn new(kind: DistKind, mean: f64, scv: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::InvalidParameter(format!("mean {mean} must be positive")));
        }
        let ok = match kind {
            DistKind::Deterministic => scv == 0.0,
            DistKind::Exponential => scv == 1.0,
            DistKind::Gamma | DistKind::LogNormal => scv > 0.0 && scv.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "scv {scv} is inconsistent with a {} law",
                kind.tag()
            )));
        }
        Ok(TimeDistribution { kind, mean, scv })
    }

    pub fn from_tag(tag: &str, mean: f64, scv: f64) -> Result<Self> {
        Self::new(DistKind::from_tag(tag)?, mean, scv)
    }

    pub fn deterministic(mean: f64) -> Result<Self> {
        Self::new(DistKind::Deterministic, mean, 0.0)
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        Self::new(DistKind::Exponential, mean, 1.0)
    }

    /// The simplest law with the requested scv: deterministic at 0,
    /// exponential at 1, gamma otherwise.
    pub fn for_scv(mean: f64, scv: f64) -> Result<Self> {
        let kind = if scv == 0.0 {
            DistKind::Deterministic
        } else if scv == 1.0 {
            DistKind::Exponential
        } else {
            DistKind::Gamma
        };
        Self::new(kind, mean, scv)
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn scv(&self) -> f64 {
        self.scv
    }

    /// Same shape, different mean.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        Self::new(self.kind, mean, self.scv)
    }

    pub fn sample<R: Randomness + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DistKind::Deterministic => self.mean,
            DistKind::Exponential => rng.exponential(1.0 / self.mean),
            DistKind::Gamma => rng.gamma(1.0 / self.scv, self.mean * self.scv),
            DistKind::LogNormal => {
                let s2 = libm::log1p(self.scv);
                let mu = libm::log(self.mean) - 0.5 * s2;
                libm::exp(mu + libm::sqrt(s2) * rng.standard_normal())
            }
        }
    }
}
