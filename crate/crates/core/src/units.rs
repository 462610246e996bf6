//! Canonical unit system and fixed physical constants.
//!
//! Lengths are measured in astronomical units and time in units of
//! `P / 2π`, where `P` is the period of a massless body on a circular
//! 1 au heliocentric orbit. With that choice the Sun's gravitational
//! parameter is exactly one.

use serde::{Deserialize, Serialize};

/// Astronomical unit in meters (IAU 2012 Resolution B2, exact).
pub const AU_M: f64 = 1.495_978_707e11;
/// Nominal solar mass parameter in m³/s² (IAU 2015 Resolution B3).
pub const GM_SUN_SI: f64 = 1.327_124_4e20;
/// Nominal terrestrial mass parameter in m³/s² (IAU 2015 Resolution B3).
pub const GM_EARTH_SI: f64 = 3.986_004e14;
/// Lunar gravitational parameter in m³/s².
pub const GM_MOON_SI: f64 = 4.902_800_066e12;
/// Mean Earth radius used for miss-distance bookkeeping, meters.
pub const EARTH_RADIUS_M: f64 = 6.371e6;
/// Mean lunar radius, meters.
pub const MOON_RADIUS_M: f64 = 1.737_4e6;
/// Radius of Earth's sphere of influence, meters.
pub const EARTH_SOI_M: f64 = 9.31e8;
pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Conversion factors between SI and heliocentric canonical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalUnits {
    /// Meters per length unit.
    pub length_unit: f64,
    /// Seconds per time unit.
    pub time_unit: f64,
    /// Meters per second per speed unit.
    pub speed_unit: f64,
    pub grav_param_sun: f64,
    pub grav_param_earth: f64,
    pub grav_param_moon: f64,
}

impl CanonicalUnits {
    pub fn heliocentric() -> Self {
        let length_unit = AU_M;
        let time_unit = (length_unit.powi(3) / GM_SUN_SI).sqrt();
        let speed_unit = length_unit / time_unit;
        let mu_unit = length_unit.powi(3) / time_unit.powi(2);
        Self {
            length_unit,
            time_unit,
            speed_unit,
            grav_param_sun: GM_SUN_SI / mu_unit,
            grav_param_earth: GM_EARTH_SI / mu_unit,
            grav_param_moon: GM_MOON_SI / mu_unit,
        }
    }

    /// Meters per second squared per canonical acceleration unit.
    pub fn accel_unit(&self) -> f64 {
        self.length_unit / (self.time_unit * self.time_unit)
    }

    pub fn days_per_tu(&self) -> f64 {
        self.time_unit / SECONDS_PER_DAY
    }

    pub fn meters_to_lu(&self, m: f64) -> f64 {
        m / self.length_unit
    }

    pub fn lu_to_meters(&self, lu: f64) -> f64 {
        lu * self.length_unit
    }

    pub fn earth_radius_lu(&self) -> f64 {
        EARTH_RADIUS_M / self.length_unit
    }

    pub fn tu_to_days(&self, tu: f64) -> f64 {
        tu * self.days_per_tu()
    }

    pub fn days_to_tu(&self, days: f64) -> f64 {
        days / self.days_per_tu()
    }

    pub fn su_to_mps(&self, su: f64) -> f64 {
        su * self.speed_unit
    }

    pub fn mps_to_su(&self, mps: f64) -> f64 {
        mps / self.speed_unit
    }
}

impl Default for CanonicalUnits {
    fn default() -> Self {
        Self::heliocentric()
    }
}

/// Builds the heliocentric canonical unit set.
pub fn make_canonical_units() -> CanonicalUnits {
    CanonicalUnits::heliocentric()
}
