//! Classical orbit elements, Cartesian and heliocentric spherical states,
//! and two-body Kepler propagation.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

const KEPLER_MAX_ITER: usize = 50;
const KEPLER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ElementsError {
    #[error("eccentricity {0} is not elliptic (hyperbolic/parabolic heliocentric elements unsupported)")]
    NotElliptic(f64),
    #[error("semimajor axis must be positive, got {0}")]
    NonPositiveSemimajorAxis(f64),
    #[error("gravitational parameter must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("inclination {0} rad outside [0, π)")]
    InclinationOutOfRange(f64),
    #[error("state has zero angular momentum (rectilinear)")]
    Degenerate,
    #[error("state is unbound (specific energy {0} >= 0)")]
    Unbound(f64),
    #[error("Kepler iteration did not converge (M = {mean_anomaly}, e = {ecc})")]
    KeplerNoConvergence { mean_anomaly: f64, ecc: f64 },
    #[error("position must be nonzero and finite")]
    BadPosition,
    #[error("state too close to the polar singularity (cos φ = {0:e})")]
    PolarSingularity(f64),
}

/// Classical elements; `anomaly` is the true anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitElements {
    pub a: f64,
    pub e: f64,
    pub i: f64,
    pub raan: f64,
    pub argp: f64,
    pub anomaly: f64,
    pub epoch: f64,
}

impl OrbitElements {
    /// Coplanar elements in the reference plane.
    pub fn planar(a: f64, e: f64, argp: f64, anomaly: f64, epoch: f64) -> Self {
        Self { a, e, i: 0.0, raan: 0.0, argp, anomaly, epoch }
    }

    pub fn validate(&self) -> Result<(), ElementsError> {
        if !(self.e >= 0.0 && self.e < 1.0) {
            return Err(ElementsError::NotElliptic(self.e));
        }
        if !(self.a > 0.0) {
            return Err(ElementsError::NonPositiveSemimajorAxis(self.a));
        }
        if !(self.i >= 0.0 && self.i < PI) {
            return Err(ElementsError::InclinationOutOfRange(self.i));
        }
        Ok(())
    }

    pub fn period(&self, mu: f64) -> f64 {
        TAU * (self.a.powi(3) / mu).sqrt()
    }

    pub fn mean_motion(&self, mu: f64) -> f64 {
        (mu / self.a.powi(3)).sqrt()
    }

    pub fn semi_latus_rectum(&self) -> f64 {
        self.a * (1.0 - self.e * self.e)
    }

    pub fn radius(&self) -> f64 {
        self.semi_latus_rectum() / (1.0 + self.e * self.anomaly.cos())
    }

    pub fn specific_energy(&self, mu: f64) -> f64 {
        -mu / (2.0 * self.a)
    }

    pub fn mean_anomaly(&self) -> f64 {
        eccentric_to_mean(true_to_eccentric(self.anomaly, self.e), self.e)
    }
}

/// Position/velocity pair in an inertial frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub epoch: f64,
}

impl CartesianState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>, epoch: f64) -> Self {
        Self { position, velocity, epoch }
    }

    pub fn specific_energy(&self, mu: f64) -> f64 {
        0.5 * self.velocity.norm_squared() - mu / self.position.norm()
    }

    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.position.cross(&self.velocity)
    }
}

/// Heliocentric spherical state: radius, radial/tangential/normal speeds,
/// longitude Θ, latitude φ, plus the object's mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalState {
    pub r: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub theta: f64,
    pub phi: f64,
    pub mass: f64,
    pub epoch: f64,
}

impl SphericalState {
    pub fn speed(&self) -> f64 {
        (self.u * self.u + self.v * self.v + self.w * self.w).sqrt()
    }

    /// Flight-path angle measured from the local horizontal toward the radial direction.
    pub fn flight_path_angle(&self) -> f64 {
        self.u.atan2(self.v)
    }
}

/// Rotation taking ecliptic Cartesian components to the local (u, v, w) frame.
pub fn ecliptic_to_local(theta: f64, phi: f64) -> Matrix3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Matrix3::new(
        ct * cp, st * cp, sp, //
        -st, ct, 0.0, //
        -ct * sp, -st * sp, cp,
    )
}

pub fn spherical_from_cartesian(st: &CartesianState, mass: f64) -> Result<SphericalState, ElementsError> {
    let p = st.position;
    let r = p.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(ElementsError::BadPosition);
    }
    let rho = (p.x * p.x + p.y * p.y).sqrt();
    let cos_phi = rho / r;
    if cos_phi < 1e-9 {
        return Err(ElementsError::PolarSingularity(cos_phi));
    }
    let theta = p.y.atan2(p.x);
    let phi = p.z.atan2(rho);
    let local = ecliptic_to_local(theta, phi) * st.velocity;
    Ok(SphericalState {
        r,
        u: local.x,
        v: local.y,
        w: local.z,
        theta,
        phi,
        mass,
        epoch: st.epoch,
    })
}

pub fn cartesian_from_spherical(s: &SphericalState) -> Result<CartesianState, ElementsError> {
    if !(s.r > 0.0) {
        return Err(ElementsError::BadPosition);
    }
    let cp = s.phi.cos();
    if cp < 1e-9 {
        return Err(ElementsError::PolarSingularity(cp));
    }
    let position = Vector3::new(
        s.r * cp * s.theta.cos(),
        s.r * cp * s.theta.sin(),
        s.r * s.phi.sin(),
    );
    let velocity = ecliptic_to_local(s.theta, s.phi).transpose() * Vector3::new(s.u, s.v, s.w);
    Ok(CartesianState::new(position, velocity, s.epoch))
}

fn perifocal_to_inertial(i: f64, raan: f64, argp: f64) -> Matrix3<f64> {
    let (so, co) = raan.sin_cos();
    let (si, ci) = i.sin_cos();
    let (sw, cw) = argp.sin_cos();
    Matrix3::new(
        co * cw - so * sw * ci,
        -co * sw - so * cw * ci,
        so * si,
        so * cw + co * sw * ci,
        -so * sw + co * cw * ci,
        -co * si,
        sw * si,
        cw * si,
        ci,
    )
}

pub fn elements_to_cartesian(el: &OrbitElements, mu: f64) -> Result<CartesianState, ElementsError> {
    if !(mu > 0.0) {
        return Err(ElementsError::NonPositiveMu(mu));
    }
    el.validate()?;
    let p = el.semi_latus_rectum();
    let (sf, cf) = el.anomaly.sin_cos();
    let r = p / (1.0 + el.e * cf);
    let sqrt_mu_p = (mu / p).sqrt();
    let r_pf = Vector3::new(r * cf, r * sf, 0.0);
    let v_pf = Vector3::new(-sqrt_mu_p * sf, sqrt_mu_p * (el.e + cf), 0.0);
    let rot = perifocal_to_inertial(el.i, el.raan, el.argp);
    Ok(CartesianState::new(rot * r_pf, rot * v_pf, el.epoch))
}

/// Inverse of [`elements_to_cartesian`]. Circular orbits report `argp = 0`
/// with the anomaly measured from the node (or the x axis when equatorial);
/// equatorial orbits report `raan = 0`.
pub fn cartesian_to_elements(st: &CartesianState, mu: f64) -> Result<OrbitElements, ElementsError> {
    if !(mu > 0.0) {
        return Err(ElementsError::NonPositiveMu(mu));
    }
    let r_vec = st.position;
    let v_vec = st.velocity;
    let r = r_vec.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(ElementsError::BadPosition);
    }
    let h_vec = r_vec.cross(&v_vec);
    let h = h_vec.norm();
    if h <= 1e-14 * r * v_vec.norm().max(f64::MIN_POSITIVE) {
        return Err(ElementsError::Degenerate);
    }
    let energy = st.specific_energy(mu);
    if energy >= 0.0 {
        return Err(ElementsError::Unbound(energy));
    }
    let a = -mu / (2.0 * energy);
    let e_vec = v_vec.cross(&h_vec) / mu - r_vec / r;
    let mut e = e_vec.norm();
    let i = (h_vec.z / h).clamp(-1.0, 1.0).acos();
    let node = Vector3::z().cross(&h_vec);
    let n = node.norm();

    const SMALL: f64 = 1e-11;
    let equatorial = n < SMALL * h;
    let circular = e < SMALL;

    let raan = if equatorial { 0.0 } else { wrap_tau(node.y.atan2(node.x)) };
    // In-plane reference direction for measuring angles.
    let ref_dir = if equatorial { Vector3::x() } else { node / n };
    let h_hat = h_vec / h;
    let angle_in_plane = |vec: &Vector3<f64>| -> f64 {
        let c = ref_dir.dot(vec);
        let s = h_hat.dot(&ref_dir.cross(vec));
        wrap_tau(s.atan2(c))
    };

    let (argp, anomaly) = if circular {
        e = 0.0;
        (0.0, angle_in_plane(&r_vec))
    } else {
        let argp = angle_in_plane(&e_vec);
        let e_hat = e_vec / e;
        let c = e_hat.dot(&r_vec);
        let s = h_hat.dot(&e_hat.cross(&r_vec));
        (argp, wrap_tau(s.atan2(c)))
    };

    Ok(OrbitElements { a, e, i, raan, argp, anomaly, epoch: st.epoch })
}

pub fn wrap_tau(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Wraps into (−π, π].
pub fn wrap_pi(x: f64) -> f64 {
    let y = wrap_tau(x);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

pub fn true_to_eccentric(f: f64, e: f64) -> f64 {
    let (sf, cf) = f.sin_cos();
    let s = (1.0 - e * e).sqrt() * sf;
    let c = e + cf;
    // Keep the eccentric anomaly on the same revolution as f.
    let base = s.atan2(c);
    base + TAU * ((f - base) / TAU).round()
}

pub fn eccentric_to_true(ea: f64, e: f64) -> f64 {
    let (se, ce) = ea.sin_cos();
    let s = (1.0 - e * e).sqrt() * se;
    let c = ce - e;
    let base = s.atan2(c);
    base + TAU * ((ea - base) / TAU).round()
}

pub fn eccentric_to_mean(ea: f64, e: f64) -> f64 {
    ea - e * ea.sin()
}

/// Solves `M = E − e sin E` by Newton iteration seeded at `M + e sin M`.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64, ElementsError> {
    let mut ea = mean_anomaly + e * mean_anomaly.sin();
    for _ in 0..KEPLER_MAX_ITER {
        let (s, c) = ea.sin_cos();
        let residual = ea - e * s - mean_anomaly;
        let step = residual / (1.0 - e * c);
        ea -= step;
        if step.abs() < KEPLER_TOL && residual.abs() < 1e-12 {
            return Ok(ea);
        }
    }
    let residual = ea - e * ea.sin() - mean_anomaly;
    if residual.abs() < KEPLER_TOL {
        Ok(ea)
    } else {
        Err(ElementsError::KeplerNoConvergence { mean_anomaly, ecc: e })
    }
}

/// Advances the true anomaly by `dt`; shape and orientation are copied.
pub fn kepler_propagate(el: &OrbitElements, dt: f64, mu: f64) -> Result<OrbitElements, ElementsError> {
    el.validate()?;
    let n = el.mean_motion(mu);
    let m0 = el.mean_anomaly();
    let m1 = m0 + n * dt;
    // Solve on the reduced anomaly for conditioning, then restore the revolution count.
    let turns = (m1 / TAU).floor();
    let m_red = m1 - turns * TAU;
    let ea = solve_kepler(m_red, el.e)?;
    let f = eccentric_to_true(ea, el.e);
    Ok(OrbitElements { anomaly: wrap_tau(f), epoch: el.epoch + dt, ..*el })
}

/// Kepler propagation returning a Cartesian state at `epoch`.
pub fn kepler_state_at(el: &OrbitElements, epoch: f64, mu: f64) -> Result<CartesianState, ElementsError> {
    let moved = kepler_propagate(el, epoch - el.epoch, mu)?;
    elements_to_cartesian(&moved, mu)
}
