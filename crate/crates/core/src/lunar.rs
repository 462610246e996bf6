//! Earth-centred close pass with lunar gravity.
//!
//! Integration runs in Earth canonical units: one length unit is the Earth
//! radius and μ⊕ = 1, so a time unit is √(R⊕³/μ⊕) ≈ 806.8 s. The Moon moves on
//! a fixed Kepler ellipse about Earth; the indirect term accounts for
//! Earth's own acceleration toward the Moon.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elements::{kepler_state_at, CartesianState, ElementsError, OrbitElements};
use crate::ephemeris::EarthEphemeris;
use crate::flyby::{hyperbola_perigee, impact_parameter, planar_hyperbola_state, FlybyError};
use crate::ode::{integrate_adaptive, AdaptiveOptions, OdeError, StepControl, Tolerances};
use crate::roots::brent;
use crate::scenario::Scenario;
use crate::units::{EARTH_RADIUS_M, GM_EARTH_SI, GM_MOON_SI};

/// Lunar semimajor axis, meters.
pub const MOON_A_M: f64 = 3.844e8;
pub const MOON_E: f64 = 0.0549;
/// Neighbour-to-neighbour change in miss distance flagged for inspection.
const JUMP_FLAG: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LunarError {
    #[error("nominal miss distance must be positive, got {0}")]
    BadMiss(f64),
    #[error("anomaly grid is empty")]
    EmptyGrid,
    #[error("no perigee before the time limit")]
    NoPerigee,
    #[error(transparent)]
    Flyby(#[from] FlybyError),
    #[error(transparent)]
    Elements(#[from] ElementsError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Earth-centred unit system: length R⊕, μ⊕ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthUnits {
    pub length_m: f64,
    pub time_s: f64,
    pub speed_mps: f64,
}

impl EarthUnits {
    pub fn new() -> Self {
        let time_s = (EARTH_RADIUS_M.powi(3) / GM_EARTH_SI).sqrt();
        Self { length_m: EARTH_RADIUS_M, time_s, speed_mps: EARTH_RADIUS_M / time_s }
    }
}

impl Default for EarthUnits {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LunarSweepConfig {
    /// Earth radii.
    pub nominal_miss: f64,
    /// Moon about Earth in Earth units; `anomaly` is overwritten per grid point.
    pub moon_elements: OrbitElements,
    /// μ_moon/μ⊕; zero gives the Moon-free control case.
    pub mu_moon: f64,
    /// Moon true anomaly at SOI entry, degrees.
    pub anomaly_grid: Vec<f64>,
    /// Earth-relative state at SOI entry, Earth units, epoch 0.
    pub entry_state: CartesianState,
    pub tol: Tolerances,
}

impl LunarSweepConfig {
    /// Sweep at 1° spacing with the entry state derived from `sc`.
    pub fn from_scenario(sc: &Scenario, nominal_miss: f64) -> Result<Self, LunarError> {
        let u = EarthUnits::new();
        let mu_moon = GM_MOON_SI / GM_EARTH_SI;
        Ok(Self {
            nominal_miss,
            moon_elements: OrbitElements::planar(MOON_A_M / u.length_m, MOON_E, 0.0, 0.0, 0.0),
            mu_moon,
            anomaly_grid: (0..360).map(f64::from).collect(),
            entry_state: build_entry_state(sc, nominal_miss)?,
            tol: Tolerances::new(1e-12, 1e-12),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LunarRow {
    pub f_deg: f64,
    /// Minimum Earth separation, Earth radii; NaN when the point failed.
    pub miss_re: f64,
    pub rel_error: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LunarSweep {
    pub nominal_miss: f64,
    pub rows: Vec<LunarRow>,
    pub max_abs_rel_error: f64,
    /// Anomaly of the largest reduction in miss distance, degrees.
    pub f_max_reduction: f64,
    /// Anomaly of the largest gain in miss distance, degrees.
    pub f_max_gain: f64,
    /// Grid neighbours whose miss distances differ by more than 5%.
    pub jumps: Vec<(f64, f64)>,
}

impl LunarSweep {
    /// Circular grid distance between the two extremes, degrees.
    pub fn extreme_separation(&self) -> f64 {
        let d = (self.f_max_reduction - self.f_max_gain).rem_euclid(360.0);
        d.min(360.0 - d)
    }
}

/// Earth-relative SOI entry state, in Earth units, targeting `nominal_miss`
/// Earth radii with the scenario's approach velocity.
pub fn build_entry_state(sc: &Scenario, nominal_miss: f64) -> Result<CartesianState, LunarError> {
    if !(nominal_miss > 0.0) {
        return Err(LunarError::BadMiss(nominal_miss));
    }
    let u = EarthUnits::new();
    let ast = kepler_state_at(&sc.eco_elements, sc.impact_epoch, sc.mu_sun())?;
    let earth = sc.earth.state_at(sc.impact_epoch);
    let v_rel = (ast.velocity - earth.velocity) * sc.units.speed_unit / u.speed_mps;
    let v_inf = v_rel.norm();
    let b = impact_parameter(nominal_miss, v_inf, 1.0)?;
    let soi = sc.units.lu_to_meters(sc.soi_radius) / u.length_m;
    Ok(planar_hyperbola_state(v_inf, b, 1.0, soi, v_rel.y.atan2(v_rel.x), false, 0.0)?)
}

fn moon_position(el: &OrbitElements, t: f64, mu: f64) -> Vector3<f64> {
    kepler_state_at(el, t, mu).map(|s| s.position).unwrap_or_else(|_| Vector3::repeat(f64::NAN))
}

/// Minimum Earth separation for one Moon anomaly, Earth radii.
pub fn perturbed_miss(cfg: &LunarSweepConfig, f_deg: f64) -> Result<f64, LunarError> {
    let mut moon = cfg.moon_elements;
    moon.anomaly = f_deg.to_radians();
    moon.epoch = cfg.entry_state.epoch;
    let mu_m = cfg.mu_moon;
    let mu_rel = 1.0 + mu_m;
    let rhs = |t: f64, y: &[f64; 6]| -> [f64; 6] {
        let r = Vector3::new(y[0], y[1], y[2]);
        let mut acc = -r / r.norm().powi(3);
        if mu_m > 0.0 {
            let rm = moon_position(&moon, t, mu_rel);
            let d = r - rm;
            acc -= mu_m * (d / d.norm().powi(3) + rm / rm.norm().powi(3));
        }
        [y[3], y[4], y[5], acc.x, acc.y, acc.z]
    };
    let s = &cfg.entry_state;
    let y0 = [s.position.x, s.position.y, s.position.z, s.velocity.x, s.velocity.y, s.velocity.z];
    let rdot = |y: &[f64; 6]| y[0] * y[3] + y[1] * y[4] + y[2] * y[5];
    // Four times the straight-line crossing time bounds the pass.
    let t_max = s.epoch + 4.0 * s.position.norm() / s.velocity.norm();
    let opts = AdaptiveOptions { tol: cfg.tol, ..Default::default() };
    let mut found = None;
    integrate_adaptive(rhs, s.epoch, y0, t_max, &opts, |step| {
        if rdot(&step.y0) < 0.0 && rdot(&step.y1) >= 0.0 {
            let tp = brent(|t| rdot(&step.eval(t)), step.t0, step.t1, 1e-14, 200).unwrap_or(step.t1);
            let y = step.eval(tp);
            found = Some((y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt());
            StepControl::Stop
        } else {
            StepControl::Continue
        }
    })?;
    found.ok_or(LunarError::NoPerigee)
}

/// Miss distance against Moon anomaly over the configured grid.
pub fn sweep_moon_anomaly(cfg: &LunarSweepConfig) -> Result<LunarSweep, LunarError> {
    if cfg.anomaly_grid.is_empty() {
        return Err(LunarError::EmptyGrid);
    }
    let nominal = cfg.nominal_miss;
    let rows: Vec<LunarRow> = cfg
        .anomaly_grid
        .par_iter()
        .map(|&f| match perturbed_miss(cfg, f) {
            Ok(m) => LunarRow { f_deg: f, miss_re: m, rel_error: (m - nominal) / nominal, error: None },
            Err(e) => LunarRow { f_deg: f, miss_re: f64::NAN, rel_error: f64::NAN, error: Some(e.to_string()) },
        })
        .collect();
    let ok = || rows.iter().filter(|r| r.rel_error.is_finite());
    let lo = ok().min_by(|a, b| a.rel_error.total_cmp(&b.rel_error));
    let hi = ok().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error));
    let max_abs = ok().map(|r| r.rel_error.abs()).fold(0.0, f64::max);
    let mut jumps = Vec::new();
    for k in 0..rows.len() {
        let (a, b) = (&rows[k], &rows[(k + 1) % rows.len()]);
        if k + 1 == rows.len() && (b.f_deg + 360.0 - a.f_deg - 1.0).abs() > 1e-9 {
            continue;
        }
        if (b.miss_re - a.miss_re).abs() > JUMP_FLAG * a.miss_re.abs() {
            jumps.push((a.f_deg, b.f_deg));
        }
    }
    Ok(LunarSweep {
        nominal_miss: nominal,
        max_abs_rel_error: max_abs,
        f_max_reduction: lo.map_or(f64::NAN, |r| r.f_deg),
        f_max_gain: hi.map_or(f64::NAN, |r| r.f_deg),
        rows,
        jumps,
    })
}

/// Perigee of the Moon-free conic through the entry state, Earth radii.
pub fn conic_perigee(entry: &CartesianState) -> f64 {
    let r = entry.position;
    let v = entry.velocity;
    let v_inf = (v.norm_squared() - 2.0 / r.norm()).sqrt();
    let b = r.cross(&v).norm() / v_inf;
    hyperbola_perigee(b, v_inf, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;

    fn config() -> LunarSweepConfig {
        LunarSweepConfig::from_scenario(&default_scenario(), 10.0).unwrap()
    }

    #[test]
    fn entry_state_is_inbound_on_the_soi() {
        let cfg = config();
        let s = cfg.entry_state;
        let soi = crate::units::EARTH_SOI_M / EARTH_RADIUS_M;
        assert!((s.position.norm() - soi).abs() < 1e-9 * soi);
        assert!(s.position.dot(&s.velocity) < 0.0);
        assert!((conic_perigee(&s) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn moon_free_pass_hits_the_nominal_miss() {
        let cfg = LunarSweepConfig { mu_moon: 0.0, ..config() };
        for f in [0.0, 123.0] {
            let m = perturbed_miss(&cfg, f).unwrap();
            assert!((m - 10.0).abs() < 1e-6, "{m}");
        }
    }

    #[test]
    fn zero_miss_is_rejected() {
        assert!(matches!(build_entry_state(&default_scenario(), 0.0), Err(LunarError::BadMiss(_))));
    }
}
