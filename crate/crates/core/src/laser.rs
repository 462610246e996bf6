//! Lumped laser-ablation thrust model.
//!
//! Thrust is `F = P·C_m` and the mass ejection rate is `P/Q*` with the
//! specific ablation energy `Q* = 2η/C_m²`. All quantities here are SI.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LaserError {
    #[error("power {power} W outside [0, {max}] W")]
    PowerOutOfRange { power: f64, max: f64 },
    #[error("mass must be positive, got {0} kg")]
    NonPositiveMass(f64),
    #[error("acceleration must be non-negative, got {0}")]
    NegativeAccel(f64),
    #[error("acceleration {accel} m/s² needs {power} W, above the {max} W limit")]
    Infeasible { accel: f64, power: f64, max: f64 },
    #[error("invalid laser configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserConfig {
    /// Maximum laser power, W.
    pub power_max: f64,
    /// Momentum coupling coefficient C_m, N·s/J.
    pub coupling_cm: f64,
    /// Ablation efficiency η.
    pub ablation_eff: f64,
    /// Specific ablation energy Q*, J/kg.
    pub q_star: f64,
}

impl LaserConfig {
    pub fn new(power_max: f64, coupling_cm: f64, ablation_eff: f64) -> Result<Self, LaserError> {
        if !(power_max > 0.0 && power_max.is_finite()) {
            return Err(LaserError::InvalidConfig(format!("power_max must be positive, got {power_max}")));
        }
        if !(coupling_cm > 0.0 && coupling_cm.is_finite()) {
            return Err(LaserError::InvalidConfig(format!("coupling_cm must be positive, got {coupling_cm}")));
        }
        if !(ablation_eff > 0.0 && ablation_eff <= 1.0) {
            return Err(LaserError::InvalidConfig(format!("ablation_eff must be in (0, 1], got {ablation_eff}")));
        }
        Ok(Self {
            power_max,
            coupling_cm,
            ablation_eff,
            q_star: 2.0 * ablation_eff / (coupling_cm * coupling_cm),
        })
    }

    fn check_power(&self, power: f64) -> Result<(), LaserError> {
        if !(0.0..=self.power_max).contains(&power) {
            return Err(LaserError::PowerOutOfRange { power, max: self.power_max });
        }
        Ok(())
    }

    /// Acceleration (m/s²) on a body of `mass` kg for laser power `power` W.
    pub fn accel_from_power(&self, power: f64, mass: f64) -> Result<f64, LaserError> {
        self.check_power(power)?;
        if !(mass > 0.0) {
            return Err(LaserError::NonPositiveMass(mass));
        }
        Ok(power * self.coupling_cm / mass)
    }

    /// Ablated mass rate (kg/s).
    pub fn mass_loss_rate(&self, power: f64) -> Result<f64, LaserError> {
        self.check_power(power)?;
        Ok(power / self.q_star)
    }

    /// Laser power (W) needed for `accel` m/s² on `mass` kg.
    pub fn power_from_accel(&self, accel: f64, mass: f64) -> Result<f64, LaserError> {
        if !(accel >= 0.0) {
            return Err(LaserError::NegativeAccel(accel));
        }
        if !(mass > 0.0) {
            return Err(LaserError::NonPositiveMass(mass));
        }
        let power = accel * mass / self.coupling_cm;
        // Allow round-off at the upper limit.
        if power > self.power_max * (1.0 + 1e-12) {
            return Err(LaserError::Infeasible { accel, power, max: self.power_max });
        }
        Ok(power.min(self.power_max))
    }

    /// Full-power acceleration at `mass`.
    pub fn max_accel(&self, mass: f64) -> f64 {
        self.power_max * self.coupling_cm / mass
    }
}

/// Sphere mass from diameter (m) and bulk density (kg/m³).
pub fn sphere_mass(diameter: f64, density: f64) -> f64 {
    std::f64::consts::PI / 6.0 * diameter.powi(3) * density
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_laser() -> LaserConfig {
        LaserConfig::new(10e6, 5e-5, 1.0).unwrap()
    }

    #[test]
    fn q_star_definition() {
        let l = table_laser();
        assert_eq!(l.q_star, 2.0 * 1.0 / (5e-5 * 5e-5));
        assert!((l.q_star - 8e8).abs() < 1e-3);
    }

    #[test]
    fn zero_power_zero_thrust() {
        let l = table_laser();
        assert_eq!(l.accel_from_power(0.0, 1.6e9).unwrap(), 0.0);
        assert_eq!(l.mass_loss_rate(0.0).unwrap(), 0.0);
        assert_eq!(l.power_from_accel(0.0, 1.6e9).unwrap(), 0.0);
    }

    #[test]
    fn table_values() {
        let l = table_laser();
        let a = l.accel_from_power(10e6, 1.6e9).unwrap();
        assert!((a - 3.125e-7).abs() < 1e-20);
        let mdot = l.mass_loss_rate(10e6).unwrap();
        assert!((mdot - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn linear_in_power() {
        let l = table_laser();
        let a1 = l.accel_from_power(2e6, 1e9).unwrap();
        let a2 = l.accel_from_power(4e6, 1e9).unwrap();
        assert!((a2 - 2.0 * a1).abs() < 1e-22);
        let m1 = l.mass_loss_rate(2e6).unwrap();
        let m2 = l.mass_loss_rate(4e6).unwrap();
        assert!((m2 - 2.0 * m1).abs() < 1e-18);
    }

    #[test]
    fn power_round_trip() {
        let l = table_laser();
        for &p in &[1.0, 1e3, 3.3e6, 10e6] {
            let a = l.accel_from_power(p, 1.57e9).unwrap();
            let back = l.power_from_accel(a, 1.57e9).unwrap();
            assert!((back - p).abs() / p < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let l = table_laser();
        assert!(l.accel_from_power(-1.0, 1e9).is_err());
        assert!(l.accel_from_power(11e6, 1e9).is_err());
        assert!(l.accel_from_power(1e6, 0.0).is_err());
        assert!(l.mass_loss_rate(-5.0).is_err());
        assert!(matches!(l.power_from_accel(1.0, 1e9), Err(LaserError::Infeasible { .. })));
        assert!(LaserConfig::new(1e6, 5e-5, 1.5).is_err());
    }

    #[test]
    fn full_power_energy_matches_table_row() {
        // 10 MW for 8.98 days, expressed in kW·day.
        let l = table_laser();
        let energy = l.power_max / 1e3 * 8.98;
        assert!((energy - 89_800.0).abs() < 1e-6);
        assert!((energy - 89_846.0).abs() / 89_846.0 < 1e-3);
    }

    #[test]
    fn sphere_mass_matches_table_size() {
        let m = sphere_mass(100.0, 3e3);
        assert!((m - 1.5708e9).abs() / 1.5708e9 < 1e-4);
    }
}
