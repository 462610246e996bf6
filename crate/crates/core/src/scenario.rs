//! Collision-scenario construction and the JSON scenario file.
//!
//! The Earth moves on a circular coplanar orbit. The object's phase is chosen
//! so that the unperturbed object reaches Earth's centre at epoch 0.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::elements::{
    self, elements_to_cartesian, kepler_propagate, spherical_from_cartesian, wrap_pi, ElementsError, OrbitElements,
    SphericalState,
};
use crate::ephemeris::CircularEarth;
use crate::laser::{sphere_mass, LaserConfig, LaserError};
use crate::units::{CanonicalUnits, EARTH_RADIUS_M, EARTH_SOI_M};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("orbits do not cross: perihelion {perihelion} and aphelion {aphelion} do not bracket {earth_radius}")]
    NonCrossing { perihelion: f64, aphelion: f64, earth_radius: f64 },
    #[error("inclined orbit has no node at the Earth orbit radius")]
    NoNodeIntersection,
    #[error("lead time must be positive, got {0}")]
    BadLeadTime(f64),
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("scenario file is not valid JSON: {0}")]
    Parse(String),
    #[error(transparent)]
    Elements(#[from] ElementsError),
    #[error(transparent)]
    Laser(#[from] LaserError),
}

/// Which of the two orbit crossings is the impact point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Crossing {
    /// Descending toward perihelion (true anomaly in (180°, 360°)).
    #[default]
    Inbound,
    /// Receding from perihelion (true anomaly in (0°, 180°)).
    Outbound,
}

impl fmt::Display for Crossing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Crossing::Inbound => "inbound",
            Crossing::Outbound => "outbound",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Object elements with `anomaly` at the impact point and `epoch` = 0.
    pub eco_elements: OrbitElements,
    pub earth: CircularEarth,
    pub laser: LaserConfig,
    pub eco_mass: f64,
    /// True when `eco_mass` came from diameter and density.
    pub mass_from_size: bool,
    pub diameter: f64,
    pub density: f64,
    /// ℓ_m, LU.
    pub miss_distance: f64,
    pub soi_radius: f64,
    pub impact_epoch: f64,
    pub crossing: Crossing,
    pub units: CanonicalUnits,
    pub mass_loss: bool,
    pub planar: bool,
}

impl Scenario {
    pub fn mu_sun(&self) -> f64 {
        self.units.grav_param_sun
    }

    pub fn mu_earth(&self) -> f64 {
        self.units.grav_param_earth
    }

    /// Object period, TU.
    pub fn eco_period(&self) -> f64 {
        eco_period(&self.eco_elements)
    }

    /// Full-power acceleration at the initial mass, canonical units.
    pub fn max_accel(&self) -> f64 {
        self.laser.max_accel(self.eco_mass) / self.units.accel_unit()
    }

    /// d(M/M₀)/dt per unit canonical commanded acceleration when mass loss is on.
    pub fn mass_loss_coeff(&self) -> Option<f64> {
        self.mass_loss.then(|| {
            self.units.accel_unit() * self.units.time_unit / (self.laser.coupling_cm * self.laser.q_star)
        })
    }

    /// Object elements at `epoch` (TU).
    pub fn eco_elements_at(&self, epoch: f64) -> Result<OrbitElements, ElementsError> {
        kepler_propagate(&self.eco_elements, epoch - self.eco_elements.epoch, self.mu_sun())
    }

    /// Unperturbed state `lead_time` object periods before impact.
    pub fn initial_state(&self, lead_time: f64) -> Result<SphericalState, ScenarioError> {
        if !(lead_time > 0.0) {
            return Err(ScenarioError::BadLeadTime(lead_time));
        }
        let t0 = self.impact_epoch - lead_time * self.eco_period();
        let el = self.eco_elements_at(t0)?;
        let c = elements_to_cartesian(&el, self.mu_sun())?;
        Ok(spherical_from_cartesian(&c, self.eco_mass)?)
    }

    pub fn tp_to_tu(&self, tp: f64) -> f64 {
        tp * self.eco_period()
    }
}

/// Period 2π·a^{3/2} in TU for μ = 1.
pub fn eco_period(el: &OrbitElements) -> f64 {
    el.period(1.0)
}

/// True anomaly at which the orbit reaches `radius`.
pub fn crossing_anomaly(el: &OrbitElements, radius: f64, crossing: Crossing) -> Result<f64, ScenarioError> {
    let peri = el.a * (1.0 - el.e);
    let apo = el.a * (1.0 + el.e);
    if !(peri < radius && radius < apo) {
        return Err(ScenarioError::NonCrossing { perihelion: peri, aphelion: apo, earth_radius: radius });
    }
    let c = (el.a * (1.0 - el.e * el.e) / radius - 1.0) / el.e;
    let f = c.clamp(-1.0, 1.0).acos();
    Ok(match crossing {
        Crossing::Outbound => f,
        Crossing::Inbound => std::f64::consts::TAU - f,
    })
}

/// Parameters other than the orbits that define a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub name: String,
    pub laser: LaserConfig,
    pub diameter: f64,
    pub density: f64,
    pub mass_override: Option<f64>,
    pub miss_distance_m: f64,
    pub soi_radius_m: f64,
    pub mass_loss: bool,
    pub planar: bool,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            name: "default".into(),
            laser: LaserConfig::new(10e6, 5e-5, 1.0).expect("valid defaults"),
            diameter: 100.0,
            density: 3000.0,
            mass_override: None,
            miss_distance_m: 2.0 * EARTH_RADIUS_M,
            soi_radius_m: EARTH_SOI_M,
            mass_loss: false,
            planar: true,
        }
    }
}

/// Phases the object and Earth so that the unperturbed object meets Earth's
/// centre at epoch 0. `shape` supplies a, e, i, Ω, ω; its anomaly is ignored.
pub fn build_collision_scenario(
    shape: &OrbitElements,
    earth_orbit_radius: f64,
    crossing: Crossing,
    params: &ScenarioParams,
    units: CanonicalUnits,
) -> Result<Scenario, ScenarioError> {
    let mut el = OrbitElements { anomaly: 0.0, epoch: 0.0, ..*shape };
    if !(el.e < 1.0) {
        return Err(ElementsError::NotElliptic(el.e).into());
    }
    el.validate()?;
    let f = crossing_anomaly(&el, earth_orbit_radius, crossing)?;
    if el.i.abs() > 1e-12 {
        // Only a node can lie on the ecliptic circle.
        let u = wrap_pi(el.argp + f);
        if u.abs() > 1e-9 && (u.abs() - std::f64::consts::PI).abs() > 1e-9 {
            return Err(ScenarioError::NoNodeIntersection);
        }
    }
    el.anomaly = f;
    let impact = elements_to_cartesian(&el, units.grav_param_sun)?;
    let phase = impact.position.y.atan2(impact.position.x);
    let earth = CircularEarth::new(earth_orbit_radius, phase, units.grav_param_sun);
    let (eco_mass, from_size) = match params.mass_override {
        Some(m) => (m, false),
        None => (sphere_mass(params.diameter, params.density), true),
    };
    Ok(Scenario {
        name: params.name.clone(),
        eco_elements: el,
        earth,
        laser: params.laser,
        eco_mass,
        mass_from_size: from_size,
        diameter: params.diameter,
        density: params.density,
        miss_distance: units.meters_to_lu(params.miss_distance_m),
        soi_radius: units.meters_to_lu(params.soi_radius_m),
        impact_epoch: 0.0,
        crossing,
        units,
        mass_loss: params.mass_loss,
        planar: params.planar,
    })
}

/// Orbit and target of the continuous-control case study.
pub fn default_scenario() -> Scenario {
    let shape = OrbitElements::planar(1.2, 0.6, 0.0, 0.0, 0.0);
    build_collision_scenario(&shape, 1.0, Crossing::Inbound, &ScenarioParams::default(), CanonicalUnits::heliocentric())
        .expect("default scenario is valid")
}

/// Near-Earth object with a 10 Earth-radius miss target used for impulsive studies.
pub fn bennu_like_scenario() -> Scenario {
    let shape = OrbitElements::planar(1.1264, 0.2037, 0.0, 0.0, 0.0);
    let params = ScenarioParams {
        name: "bennu_like".into(),
        miss_distance_m: 10.0 * EARTH_RADIUS_M,
        ..ScenarioParams::default()
    };
    build_collision_scenario(&shape, 1.0, Crossing::Inbound, &params, CanonicalUnits::heliocentric())
        .expect("bennu-like scenario is valid")
}

// ---- scenario file ----

const TOP_KEYS: &[&str] = &[
    "name", "eco", "earth", "crossing", "laser", "asteroid", "miss_re", "soi_m", "mass_loss", "planar",
];
const ECO_KEYS: &[&str] = &["a_au", "e", "i_deg", "raan_deg", "argp_deg"];
const EARTH_KEYS: &[&str] = &["orbit_radius_au"];
const LASER_KEYS: &[&str] = &["power_mw", "cm_ns_per_j", "eta_ab"];
const ASTEROID_KEYS: &[&str] = &["diameter_m", "density_kg_m3", "mass_kg"];

/// On-disk scenario, SI or named units in every key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub eco: EcoSection,
    pub earth: EarthSection,
    pub crossing: Crossing,
    pub laser: LaserSection,
    pub asteroid: AsteroidSection,
    pub miss_re: f64,
    pub soi_m: f64,
    pub mass_loss: Switch,
    pub planar: Switch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcoSection {
    pub a_au: f64,
    pub e: f64,
    pub i_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarthSection {
    pub orbit_radius_au: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserSection {
    pub power_mw: f64,
    pub cm_ns_per_j: f64,
    pub eta_ab: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsteroidSection {
    pub diameter_m: f64,
    pub density_kg_m3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn is_on(self) -> bool {
        self == Switch::On
    }
}

impl From<bool> for Switch {
    fn from(b: bool) -> Self {
        if b {
            Switch::On
        } else {
            Switch::Off
        }
    }
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> Self {
        let el = &s.eco_elements;
        ScenarioFile {
            name: s.name.clone(),
            eco: EcoSection {
                a_au: el.a,
                e: el.e,
                i_deg: el.i.to_degrees(),
                raan_deg: el.raan.to_degrees(),
                argp_deg: el.argp.to_degrees(),
            },
            earth: EarthSection { orbit_radius_au: s.earth.radius },
            crossing: s.crossing,
            laser: LaserSection {
                power_mw: s.laser.power_max / 1e6,
                cm_ns_per_j: s.laser.coupling_cm,
                eta_ab: s.laser.ablation_eff,
            },
            asteroid: AsteroidSection {
                diameter_m: s.diameter,
                density_kg_m3: s.density,
                mass_kg: (!s.mass_from_size).then_some(s.eco_mass),
            },
            miss_re: s.units.lu_to_meters(s.miss_distance) / EARTH_RADIUS_M,
            soi_m: s.units.lu_to_meters(s.soi_radius),
            mass_loss: s.mass_loss.into(),
            planar: s.planar.into(),
        }
    }

    pub fn to_scenario(&self) -> Result<Scenario, ScenarioError> {
        let units = CanonicalUnits::heliocentric();
        let shape = OrbitElements {
            a: self.eco.a_au,
            e: self.eco.e,
            i: self.eco.i_deg.to_radians(),
            raan: self.eco.raan_deg.to_radians(),
            argp: self.eco.argp_deg.to_radians(),
            anomaly: 0.0,
            epoch: 0.0,
        };
        let params = ScenarioParams {
            name: self.name.clone(),
            laser: LaserConfig::new(self.laser.power_mw * 1e6, self.laser.cm_ns_per_j, self.laser.eta_ab)?,
            diameter: self.asteroid.diameter_m,
            density: self.asteroid.density_kg_m3,
            mass_override: self.asteroid.mass_kg,
            miss_distance_m: self.miss_re * EARTH_RADIUS_M,
            soi_radius_m: self.soi_m,
            mass_loss: self.mass_loss.is_on(),
            planar: self.planar.is_on(),
        };
        build_collision_scenario(&shape, self.earth.orbit_radius_au, self.crossing, &params, units)
    }
}

fn check_keys(obj: &Value, path: &str, allowed: &[&str], errors: &mut Vec<String>) {
    let Some(map) = obj.as_object() else {
        errors.push(format!("{path}: expected an object"));
        return;
    };
    for k in map.keys() {
        if !allowed.contains(&k.as_str()) {
            errors.push(format!("{path}.{k}: unknown key"));
        }
    }
    for k in allowed {
        if !map.contains_key(*k) && !(path == "asteroid" && *k == "mass_kg") {
            errors.push(format!("{path}.{k}: missing"));
        }
    }
}

fn num(v: &Value, path: &str, key: &str, errors: &mut Vec<String>) -> Option<f64> {
    match v.get(key) {
        None => None,
        Some(x) => match x.as_f64() {
            Some(f) if f.is_finite() => Some(f),
            _ => {
                errors.push(format!("{path}.{key}: expected a finite number"));
                None
            }
        },
    }
}

fn range_check(errors: &mut Vec<String>, field: &str, value: Option<f64>, ok: impl Fn(f64) -> bool, rule: &str) {
    if let Some(v) = value {
        if !ok(v) {
            errors.push(format!("{field}: {v} violates {rule}"));
        }
    }
}

/// Parses and validates scenario JSON, collecting every problem found.
pub fn validate_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let mut errors = Vec::new();
    check_keys(&root, "scenario", TOP_KEYS, &mut errors);
    let empty = Value::Null;
    let sect = |k: &str| root.get(k).unwrap_or(&empty);
    for (key, allowed) in [("eco", ECO_KEYS), ("earth", EARTH_KEYS), ("laser", LASER_KEYS), ("asteroid", ASTEROID_KEYS)] {
        if root.get(key).is_some() {
            check_keys(sect(key), key, allowed, &mut errors);
        }
    }
    let a = num(sect("eco"), "eco", "a_au", &mut errors);
    let e = num(sect("eco"), "eco", "e", &mut errors);
    let i = num(sect("eco"), "eco", "i_deg", &mut errors);
    num(sect("eco"), "eco", "raan_deg", &mut errors);
    num(sect("eco"), "eco", "argp_deg", &mut errors);
    let r_earth = num(sect("earth"), "earth", "orbit_radius_au", &mut errors);
    let p = num(sect("laser"), "laser", "power_mw", &mut errors);
    let cm = num(sect("laser"), "laser", "cm_ns_per_j", &mut errors);
    let eta = num(sect("laser"), "laser", "eta_ab", &mut errors);
    let d = num(sect("asteroid"), "asteroid", "diameter_m", &mut errors);
    let rho = num(sect("asteroid"), "asteroid", "density_kg_m3", &mut errors);
    let m = num(sect("asteroid"), "asteroid", "mass_kg", &mut errors);
    let miss = num(&root, "scenario", "miss_re", &mut errors);
    let soi = num(&root, "scenario", "soi_m", &mut errors);

    range_check(&mut errors, "eco.a_au", a, |v| v > 0.0, "a > 0");
    range_check(&mut errors, "eco.e", e, |v| (0.0..1.0).contains(&v), "0 <= e < 1");
    range_check(&mut errors, "eco.i_deg", i, |v| (0.0..180.0).contains(&v), "0 <= i < 180");
    range_check(&mut errors, "earth.orbit_radius_au", r_earth, |v| v > 0.0, "radius > 0");
    range_check(&mut errors, "laser.power_mw", p, |v| v > 0.0, "power > 0");
    range_check(&mut errors, "laser.cm_ns_per_j", cm, |v| v > 0.0, "C_m > 0");
    range_check(&mut errors, "laser.eta_ab", eta, |v| v > 0.0 && v <= 1.0, "0 < eta <= 1");
    range_check(&mut errors, "asteroid.diameter_m", d, |v| v > 0.0, "diameter > 0");
    range_check(&mut errors, "asteroid.density_kg_m3", rho, |v| v > 0.0, "density > 0");
    range_check(&mut errors, "asteroid.mass_kg", m, |v| v > 0.0, "mass > 0");
    range_check(&mut errors, "miss_re", miss, |v| v > 0.0, "miss > 0");
    range_check(&mut errors, "soi_m", soi, |v| v > 0.0, "soi > 0");
    if let (Some(miss), Some(soi)) = (miss, soi) {
        if miss * EARTH_RADIUS_M >= soi {
            errors.push(format!("miss_re: {miss} Earth radii is outside the sphere of influence"));
        }
    }
    if let (Some(a), Some(e), Some(r)) = (a, e, r_earth) {
        if (0.0..1.0).contains(&e) && a > 0.0 && !(a * (1.0 - e) < r && r < a * (1.0 + e)) {
            errors.push(format!(
                "eco: orbit does not cross the Earth orbit (perihelion {:.6} au, aphelion {:.6} au, Earth {r} au)",
                a * (1.0 - e),
                a * (1.0 + e)
            ));
        }
    }
    for key in ["mass_loss", "planar"] {
        if let Some(v) = root.get(key) {
            if !matches!(v.as_str(), Some("on" | "off")) {
                errors.push(format!("{key}: expected \"on\" or \"off\""));
            }
        }
    }
    if let Some(v) = root.get("crossing") {
        if !matches!(v.as_str(), Some("inbound" | "outbound")) {
            errors.push("crossing: expected \"inbound\" or \"outbound\"".into());
        }
    }
    if root.get("name").is_some_and(|v| !v.is_string()) {
        errors.push("name: expected a string".into());
    }
    if !errors.is_empty() {
        return Err(ScenarioError::Invalid(errors));
    }
    let file: ScenarioFile = serde_json::from_value(root).map_err(|e| ScenarioError::Invalid(vec![e.to_string()]))?;
    file.to_scenario()
}

pub fn validate_scenario(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
    validate_scenario_str(&text)
}

/// Serializes a scenario to its file form.
pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_scenario(s)).expect("scenario serializes")
}

/// Unperturbed Earth-object separation at epoch `t`, LU.
pub fn unperturbed_separation(s: &Scenario, t: f64) -> Result<f64, ElementsError> {
    use crate::ephemeris::EarthEphemeris;
    let c = elements::kepler_state_at(&s.eco_elements, t, s.mu_sun())?;
    Ok((c.position - s.earth.state_at(t).position).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_anomaly_value() {
        let el = OrbitElements::planar(1.2, 0.6, 0.0, 0.0, 0.0);
        let f = crossing_anomaly(&el, 1.0, Crossing::Outbound).unwrap();
        let c = (1.2 * (1.0 - 0.36) / 1.0 - 1.0) / 0.6;
        assert!((f.cos() - c).abs() < 1e-15);
        assert!((c + 0.386_666_666_666_667).abs() < 1e-12);
        assert!((f.to_degrees() - 112.75).abs() < 0.01);
        let g = crossing_anomaly(&el, 1.0, Crossing::Inbound).unwrap();
        assert!((g.to_degrees() - (360.0 - 112.75)).abs() < 0.01);
    }

    #[test]
    fn impact_at_epoch_zero() {
        let s = default_scenario();
        assert!(unperturbed_separation(&s, 0.0).unwrap() < 1e-12);
        // One period earlier the object sits at the same anomaly.
        let el = s.eco_elements_at(-s.eco_period()).unwrap();
        assert!(wrap_pi(el.anomaly - s.eco_elements.anomaly).abs() < 1e-10);
    }

    #[test]
    fn period_values() {
        assert!((eco_period(&OrbitElements::planar(1.0, 0.0, 0.0, 0.0, 0.0)) - std::f64::consts::TAU).abs() < 1e-15);
        let tp = eco_period(&OrbitElements::planar(1.2, 0.6, 0.0, 0.0, 0.0)) / std::f64::consts::TAU;
        assert!((tp - 1.2f64.powf(1.5)).abs() < 1e-14);
        assert!((tp - 1.3145).abs() < 1e-4);
        let tb = eco_period(&OrbitElements::planar(1.1264, 0.2037, 0.0, 0.0, 0.0)) / std::f64::consts::TAU;
        assert!((tb - 1.1955).abs() < 1e-4);
        assert!((tb - 1.1996).abs() > 1e-3);
    }

    #[test]
    fn non_crossing_rejected() {
        let shape = OrbitElements::planar(2.5, 0.2, 0.0, 0.0, 0.0);
        let r = build_collision_scenario(&shape, 1.0, Crossing::Inbound, &ScenarioParams::default(), CanonicalUnits::heliocentric());
        assert!(matches!(r, Err(ScenarioError::NonCrossing { .. })));
    }

    #[test]
    fn default_file_round_trip_is_exact() {
        let s = default_scenario();
        let text = scenario_to_json(&s);
        let back = validate_scenario_str(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn validation_aggregates_errors() {
        let mut v: Value = serde_json::from_str(&scenario_to_json(&default_scenario())).unwrap();
        v["eco"]["e"] = 1.2.into();
        v["laser"]["bogus"] = 1.into();
        v["miss_re"] = (-1.0).into();
        let err = validate_scenario_str(&v.to_string()).unwrap_err();
        let ScenarioError::Invalid(list) = err else { panic!("expected Invalid") };
        assert!(list.iter().any(|m| m.starts_with("eco.e")));
        assert!(list.iter().any(|m| m.contains("laser.bogus")));
        assert!(list.iter().any(|m| m.starts_with("miss_re")));
    }

    #[test]
    fn non_crossing_file_cites_invariant() {
        let mut v: Value = serde_json::from_str(&scenario_to_json(&default_scenario())).unwrap();
        v["eco"]["a_au"] = 3.0.into();
        v["eco"]["e"] = 0.1.into();
        let ScenarioError::Invalid(list) = validate_scenario_str(&v.to_string()).unwrap_err() else { panic!() };
        assert!(list.iter().any(|m| m.contains("does not cross")));
    }

    #[test]
    fn initial_state_one_period_is_impact_point() {
        let s = default_scenario();
        let st = s.initial_state(1.0).unwrap();
        let imp = elements_to_cartesian(&s.eco_elements, 1.0).unwrap();
        assert!((st.r - imp.position.norm()).abs() < 1e-10);
        assert!(st.u < 0.0, "inbound crossing approaches perihelion");
    }
}
