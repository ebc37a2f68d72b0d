use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::network::VehicleClass;

/// Maximum magnitude of any applied acceleration, m/s².
pub const MAX_ACCEL_MAGNITUDE: f64 = 5.0;

/// Intelligent Driver Model parameters for one vehicle class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverParams {
    /// Vehicle length, m.
    pub length: f64,
    /// Upper bound on desired speed, m/s; links may impose a lower one.
    pub desired_speed: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    /// Minimum bumper-to-bumper gap when stopped, m.
    pub jam_spacing: f64,
    /// Desired time headway, s.
    pub time_headway: f64,
}

impl DriverParams {
    pub(crate) fn check(&self) -> Result<(), String> {
        let positive = [
            self.length,
            self.desired_speed,
            self.max_accel,
            self.comfortable_decel,
            self.jam_spacing,
            self.time_headway,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("driver parameters must be finite and > 0".into());
        }
        if self.max_accel > MAX_ACCEL_MAGNITUDE {
            return Err(format!("max_accel must be <= {MAX_ACCEL_MAGNITUDE}"));
        }
        Ok(())
    }

    fn default_for(class: VehicleClass) -> Self {
        let (length, desired_speed, max_accel, comfortable_decel, jam_spacing, time_headway) = match class {
            VehicleClass::Car => (5.0, 16.7, 1.5, 2.0, 2.0, 1.2),
            VehicleClass::Lgv => (6.0, 16.7, 1.3, 2.0, 2.0, 1.3),
            VehicleClass::Bus => (12.0, 13.9, 1.0, 1.5, 2.5, 1.5),
            VehicleClass::Hgv => (12.0, 13.9, 0.8, 1.5, 2.5, 1.6),
        };
        Self {
            length,
            desired_speed,
            max_accel,
            comfortable_decel,
            jam_spacing,
            time_headway,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverTable(pub BTreeMap<VehicleClass, DriverParams>);

impl Default for DriverTable {
    fn default() -> Self {
        Self(
            VehicleClass::ALL
                .into_iter()
                .map(|c| (c, DriverParams::default_for(c)))
                .collect(),
        )
    }
}

/// What a vehicle sees ahead: bumper-to-bumper gap and the obstacle's speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lead {
    pub gap: f64,
    pub speed: f64,
}

/// IDM acceleration, clamped to ±[`MAX_ACCEL_MAGNITUDE`].
///
/// `scale` shrinks jam spacing and headway on multi-lane links.
pub fn idm_acceleration(p: &DriverParams, speed: f64, desired: f64, lead: Option<Lead>, scale: f64) -> f64 {
    let free = 1.0 - (speed / desired).powi(4);
    let interaction = match lead {
        None => 0.0,
        Some(Lead { gap, .. }) if gap <= 0.0 => return -MAX_ACCEL_MAGNITUDE,
        Some(Lead { gap, speed: lead_speed }) => {
            let dv = speed - lead_speed;
            let s_star = p.jam_spacing * scale
                + (speed * p.time_headway * scale
                    + speed * dv / (2.0 * (p.max_accel * p.comfortable_decel).sqrt()))
                .max(0.0);
            (s_star / gap).powi(2)
        }
    };
    (p.max_accel * (free - interaction)).clamp(-MAX_ACCEL_MAGNITUDE, p.max_accel)
}
