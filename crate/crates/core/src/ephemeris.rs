//! Analytic Earth (and Moon) ephemerides.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::elements::CartesianState;

/// Heliocentric Earth state provider.
pub trait EarthEphemeris {
    fn state_at(&self, epoch: f64) -> CartesianState;
}

/// Earth on a circular, coplanar heliocentric orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularEarth {
    /// Orbit radius, LU.
    pub radius: f64,
    /// Longitude at epoch zero, rad.
    pub phase_at_zero: f64,
    /// Mean motion, rad/TU.
    pub mean_motion: f64,
}

impl CircularEarth {
    pub fn new(radius: f64, phase_at_zero: f64, mu_sun: f64) -> Self {
        Self { radius, phase_at_zero, mean_motion: (mu_sun / radius.powi(3)).sqrt() }
    }

    pub fn longitude_at(&self, epoch: f64) -> f64 {
        self.phase_at_zero + self.mean_motion * epoch
    }
}

impl EarthEphemeris for CircularEarth {
    fn state_at(&self, epoch: f64) -> CartesianState {
        let (s, c) = self.longitude_at(epoch).sin_cos();
        let speed = self.radius * self.mean_motion;
        CartesianState::new(
            Vector3::new(self.radius * c, self.radius * s, 0.0),
            Vector3::new(-speed * s, speed * c, 0.0),
            epoch,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_circle_period() {
        let e = CircularEarth::new(1.0, 0.3, 1.0);
        let a = e.state_at(0.0);
        let b = e.state_at(std::f64::consts::TAU);
        assert!((a.position - b.position).norm() < 1e-14);
        assert!((a.velocity.norm() - 1.0).abs() < 1e-15);
        assert!(a.position.dot(&a.velocity).abs() < 1e-15);
    }
}
