use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::KpiRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveMode {
    #[serde(rename = "delay")]
    DelayOnly,
    #[serde(rename = "delay+co2")]
    DelayCo2,
    #[serde(rename = "delay+bc")]
    DelayBc,
}

impl ObjectiveMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DelayOnly => "delay",
            Self::DelayCo2 => "delay+co2",
            Self::DelayBc => "delay+bc",
        }
    }
}

impl fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delay" | "delay-only" => Ok(Self::DelayOnly),
            "delay+co2" => Ok(Self::DelayCo2),
            "delay+bc" => Ok(Self::DelayBc),
            _ => Err(Error::InvalidArgument(format!(
                "unknown objective {s:?}, expected delay, delay+co2 or delay+bc"
            ))),
        }
    }
}

/// Weighted, normalized sum of delay and one emission species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub mode: ObjectiveMode,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    /// Delay normalizer, s/veh.
    pub n1: f64,
    /// CO₂ normalizer, kg.
    pub n2: f64,
    /// BC normalizer, g.
    pub n3: f64,
}

impl ObjectiveSpec {
    /// Unit weights and normalizers.
    pub fn new(mode: ObjectiveMode) -> Self {
        Self {
            mode,
            w1: 1.0,
            w2: 1.0,
            w3: 1.0,
            n1: 1.0,
            n2: 1.0,
            n3: 1.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let weights_ok = [self.w1, self.w2, self.w3]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0);
        let norms_ok = [self.n1, self.n2, self.n3]
            .iter()
            .all(|n| n.is_finite() && *n > 0.0);
        if !weights_ok || !norms_ok {
            return Err(Error::InvalidArgument(
                "objective weights must be >= 0 and normalizers > 0".into(),
            ));
        }
        if self.w1 == 0.0 && self.emission_weight() == 0.0 {
            return Err(Error::InvalidArgument("all active objective weights are zero".into()));
        }
        Ok(())
    }

    fn emission_weight(&self) -> f64 {
        match self.mode {
            ObjectiveMode::DelayOnly => 0.0,
            ObjectiveMode::DelayCo2 => self.w2,
            ObjectiveMode::DelayBc => self.w3,
        }
    }

    /// Set normalizers from baseline KPI means, keeping 1 where a mean is zero.
    pub fn with_normalizers(mut self, delay: f64, co2: f64, bc: f64) -> Self {
        let pick = |v: f64| if v.is_finite() && v > 0.0 { v } else { 1.0 };
        self.n1 = pick(delay);
        self.n2 = pick(co2);
        self.n3 = pick(bc);
        self
    }

    /// Scalar objective of one run.
    pub fn scalar(&self, k: &KpiRecord) -> f64 {
        let delay = self.w1 * k.mean_delay / self.n1;
        match self.mode {
            ObjectiveMode::DelayOnly => delay,
            ObjectiveMode::DelayCo2 => delay + self.w2 * k.co2 / self.n2,
            ObjectiveMode::DelayBc => delay + self.w3 * k.bc / self.n3,
        }
    }
}
