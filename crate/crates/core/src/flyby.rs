//! Patched-conic encounter geometry at the sphere of influence and the
//! analytic hyperbolic flyby map.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::elements::CartesianState;
use crate::ephemeris::EarthEphemeris;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlybyError {
    #[error("coincident positions: relative distance is zero")]
    Coincident,
    #[error("relative velocity is zero")]
    ZeroRelativeVelocity,
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("radial encounter (b = 0): center impact, encounter plane undefined")]
    Degenerate,
    #[error("Earth-frame energy {0:e} is not positive: captured orbit is outside the model")]
    Captured(f64),
    #[error("radius {radius} is inside perigee {perigee}")]
    InsidePerigee { radius: f64, perigee: f64 },
}

/// Encounter quantities at SOI entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlybyGeometry {
    pub ell: f64,
    pub ell_dot: f64,
    /// Relative velocity of the object with respect to Earth.
    pub v_inf_in: Vector3<f64>,
    /// Elevation φ_e of the relative position seen against the approach direction.
    pub elevation: f64,
    pub b: f64,
    pub b_required: f64,
    pub soi_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlybyOutcome {
    pub perigee_distance: f64,
    /// Outbound asymptotic relative velocity.
    pub v_inf_out: Vector3<f64>,
    pub turn_angle: f64,
    pub eccentricity: f64,
    /// Transit time from entry to exit on the hyperbola, TU.
    pub time_of_flight: f64,
    /// Earth-relative state on leaving the sphere.
    pub exit_relative: CartesianState,
    /// Heliocentric state on leaving the sphere.
    pub post_state: CartesianState,
}

/// Earth–object distance ℓ and its rate ℓ̇.
pub fn relative_distance(r_earth: &CartesianState, r_ast: &CartesianState) -> Result<(f64, f64), FlybyError> {
    let re = &r_earth.position;
    let ra = &r_ast.position;
    let ell2 = re.dot(re) + ra.dot(ra) - 2.0 * re.dot(ra);
    let ell = ell2.max(0.0).sqrt();
    let diff = ra - re;
    if diff.norm() == 0.0 {
        return Err(FlybyError::Coincident);
    }
    let ell_dot = diff.dot(&(r_ast.velocity - r_earth.velocity)) / ell;
    Ok((ell, ell_dot))
}

/// Offset of the approach line from Earth's centre: the component of the
/// relative position orthogonal to the relative velocity.
pub fn approach_distance(rel_position: &Vector3<f64>, rel_velocity: &Vector3<f64>) -> Result<f64, FlybyError> {
    let vn = rel_velocity.norm();
    if vn == 0.0 {
        return Err(FlybyError::ZeroRelativeVelocity);
    }
    let vhat = rel_velocity / vn;
    let lead = -rel_position;
    Ok((lead - lead.dot(&vhat) * vhat).norm())
}

/// Elevation angle φ_e with cos(φ_e + π/2) = v̂·ℓ̂.
pub fn elevation_angle(rel_position: &Vector3<f64>, rel_velocity: &Vector3<f64>) -> Result<f64, FlybyError> {
    let (ln, vn) = (rel_position.norm(), rel_velocity.norm());
    if ln == 0.0 {
        return Err(FlybyError::Coincident);
    }
    if vn == 0.0 {
        return Err(FlybyError::ZeroRelativeVelocity);
    }
    let c = (rel_velocity.dot(rel_position) / (vn * ln)).clamp(-1.0, 1.0);
    Ok(c.acos() - std::f64::consts::FRAC_PI_2)
}

/// Approach distance that focuses down to a perigee of `miss`.
pub fn impact_parameter(miss: f64, v_inf: f64, mu_earth: f64) -> Result<f64, FlybyError> {
    if !(miss > 0.0) {
        return Err(FlybyError::NonPositive { name: "miss distance", value: miss });
    }
    if !(v_inf > 0.0) {
        return Err(FlybyError::NonPositive { name: "v_inf", value: v_inf });
    }
    Ok(miss * (1.0 + 2.0 * mu_earth / (v_inf * v_inf * miss)).sqrt())
}

/// Perigee of the hyperbola with asymptotic offset `b` and excess speed `v_inf`.
pub fn hyperbola_perigee(b: f64, v_inf: f64, mu: f64) -> f64 {
    let k = mu / (v_inf * v_inf);
    // k(√(1+(b/k)²) − 1) without cancellation for small b/k.
    let x = b / k;
    k * x * x / ((1.0 + x * x).sqrt() + 1.0)
}

/// Encounter geometry from heliocentric Earth and object states.
pub fn soi_geometry(
    earth: &CartesianState,
    ast: &CartesianState,
    soi_radius: f64,
    miss: f64,
    mu_earth: f64,
) -> Result<FlybyGeometry, FlybyError> {
    let (ell, ell_dot) = relative_distance(earth, ast)?;
    let rel = ast.position - earth.position;
    let v_rel = ast.velocity - earth.velocity;
    Ok(FlybyGeometry {
        ell,
        ell_dot,
        v_inf_in: v_rel,
        elevation: elevation_angle(&rel, &v_rel)?,
        b: approach_distance(&rel, &v_rel)?,
        b_required: impact_parameter(miss, v_rel.norm(), mu_earth)?,
        soi_radius,
    })
}

/// Earth-relative state at distance `radius` on the inbound leg of the
/// planar hyperbola with excess speed `v_inf` and asymptotic offset `b`.
/// The incoming asymptote points along `+x` rotated by `rotation`; `retrograde`
/// mirrors the pass to the other side of Earth.
pub fn planar_hyperbola_state(
    v_inf: f64,
    b: f64,
    mu: f64,
    radius: f64,
    rotation: f64,
    retrograde: bool,
    epoch: f64,
) -> Result<CartesianState, FlybyError> {
    if !(v_inf > 0.0) {
        return Err(FlybyError::NonPositive { name: "v_inf", value: v_inf });
    }
    if !(b > 0.0) {
        return Err(FlybyError::Degenerate);
    }
    let k = mu / (v_inf * v_inf);
    let e = (1.0 + (b / k).powi(2)).sqrt();
    let p = b * b / k;
    let rp = hyperbola_perigee(b, v_inf, mu);
    if radius < rp {
        return Err(FlybyError::InsidePerigee { radius, perigee: rp });
    }
    let cos_nu = ((p / radius - 1.0) / e).clamp(-1.0, 1.0);
    let nu = -cos_nu.acos();
    let (sn, cn) = nu.sin_cos();
    let vs = (mu / p).sqrt();
    let flip = if retrograde { -1.0 } else { 1.0 };
    let pos = Vector3::new(radius * cn, flip * radius * sn, 0.0);
    let vel = Vector3::new(-vs * sn, flip * vs * (e + cn), 0.0);
    // Perifocal direction of the incoming asymptote.
    let sin_inf = (1.0 - 1.0 / (e * e)).sqrt();
    let ang = rotation - (flip * (e - 1.0 / e)).atan2(sin_inf);
    let (sa, ca) = ang.sin_cos();
    let rot = |w: Vector3<f64>| Vector3::new(ca * w.x - sa * w.y, sa * w.x + ca * w.y, 0.0);
    Ok(CartesianState::new(rot(pos), rot(vel), epoch))
}

/// Maps an Earth-relative SOI entry state through the hyperbolic pass.
pub fn flyby_map<E: EarthEphemeris>(entry: &CartesianState, mu_earth: f64, earth: &E) -> Result<FlybyOutcome, FlybyError> {
    let r = entry.position;
    let v = entry.velocity;
    let rn = r.norm();
    if rn == 0.0 {
        return Err(FlybyError::Coincident);
    }
    let energy = 0.5 * v.norm_squared() - mu_earth / rn;
    if !(energy > 0.0) {
        return Err(FlybyError::Captured(energy));
    }
    let h = r.cross(&v);
    let hn = h.norm();
    if hn <= 1e-15 * rn * v.norm() {
        return Err(FlybyError::Degenerate);
    }
    let v_inf = (2.0 * energy).sqrt();
    let e_vec = v.cross(&h) / mu_earth - r / rn;
    let e = e_vec.norm();
    let p = hn * hn / mu_earth;
    let a_abs = mu_earth / (v_inf * v_inf);
    let perigee = p / (1.0 + e);
    let turn_angle = 2.0 * (1.0 / e).asin();

    let p_hat = e_vec / e;
    let q_hat = h.cross(&p_hat) / hn;
    let sin_inf = (1.0 - 1.0 / (e * e)).sqrt();
    let v_out_dir = (-sin_inf * p_hat + (e - 1.0 / e) * q_hat).normalize();
    let v_inf_out = v_inf * v_out_dir;

    // Entry anomaly and hyperbolic time of flight to the mirrored exit.
    let cos_nu = (r.dot(&p_hat) / rn).clamp(-1.0, 1.0);
    let cosh_f = ((e + cos_nu) / (1.0 + e * cos_nu)).max(1.0);
    let big_f = cosh_f.acosh();
    let n = (mu_earth / a_abs.powi(3)).sqrt();
    let inbound = r.dot(&v) < 0.0;
    let half = (e * big_f.sinh() - big_f) / n;
    let time_of_flight = if inbound { 2.0 * half } else { 0.0 };

    let (r_exit, v_exit) = if inbound {
        (2.0 * r.dot(&p_hat) * p_hat - r, v - 2.0 * v.dot(&p_hat) * p_hat)
    } else {
        (r, v)
    };
    let exit_epoch = entry.epoch + time_of_flight;
    let exit_relative = CartesianState::new(r_exit, v_exit, exit_epoch);
    let e_state = earth.state_at(exit_epoch);
    let post_state = CartesianState::new(e_state.position + r_exit, e_state.velocity + v_exit, exit_epoch);
    Ok(FlybyOutcome {
        perigee_distance: perigee,
        v_inf_out,
        turn_angle,
        eccentricity: e,
        time_of_flight,
        exit_relative,
        post_state,
    })
}
