//! Thrust-perturbed heliocentric motion in spherical coordinates and
//! propagation with detection of the inbound sphere-of-influence crossing.

use serde::{Deserialize, Serialize};

use crate::elements::{cartesian_from_spherical, ElementsError, SphericalState};
use crate::ephemeris::EarthEphemeris;
use crate::ode::{self, AdaptiveOptions, DenseStep, IntegrationStats, OdeError, StepControl, Tolerances};
use crate::roots::brent;

const POLAR_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("polar singularity: cos φ = {0:e}")]
    PolarSingularity(f64),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("control nodes must have strictly increasing times (node {0})")]
    NodesNotIncreasing(usize),
    #[error("control node {0} has negative or non-finite acceleration")]
    BadAccel(usize),
    #[error("invalid propagation span [{0}, {1}]")]
    BadSpan(f64, f64),
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error(transparent)]
    Elements(#[from] ElementsError),
}

/// Thrust acceleration magnitude (canonical units) and direction angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSample {
    pub accel_mag: f64,
    /// In-plane angle from the local horizontal toward the radial direction.
    pub sigma: f64,
    pub beta: f64,
    pub node_time: f64,
}

impl ControlSample {
    pub fn zero(node_time: f64) -> Self {
        Self { accel_mag: 0.0, sigma: 0.0, beta: 0.0, node_time }
    }
}

/// Piecewise-linear control history; zero thrust outside the node span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlHistory {
    nodes: Vec<ControlSample>,
}

impl ControlHistory {
    /// Builds a history, unwrapping σ so that consecutive nodes never jump by more than π.
    pub fn new(mut nodes: Vec<ControlSample>) -> Result<Self, DynamicsError> {
        for (k, n) in nodes.iter().enumerate() {
            if !(n.accel_mag >= 0.0) || !n.accel_mag.is_finite() {
                return Err(DynamicsError::BadAccel(k));
            }
            if k > 0 && !(n.node_time > nodes[k - 1].node_time) {
                return Err(DynamicsError::NodesNotIncreasing(k));
            }
        }
        for k in 1..nodes.len() {
            let prev = nodes[k - 1].sigma;
            let d = crate::elements::wrap_pi(nodes[k].sigma - prev);
            nodes[k].sigma = prev + d;
        }
        Ok(Self { nodes })
    }

    pub fn zero() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn nodes(&self) -> &[ControlSample] {
        &self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn t_start(&self) -> Option<f64> {
        self.nodes.first().map(|n| n.node_time)
    }

    pub fn t_end(&self) -> Option<f64> {
        self.nodes.last().map(|n| n.node_time)
    }

    pub fn eval(&self, t: f64) -> ControlSample {
        let (Some(first), Some(last)) = (self.nodes.first(), self.nodes.last()) else {
            return ControlSample::zero(t);
        };
        if t < first.node_time || t > last.node_time || self.nodes.len() < 2 {
            return ControlSample::zero(t);
        }
        let k = match self.nodes.binary_search_by(|n| n.node_time.partial_cmp(&t).unwrap()) {
            Ok(k) => return ControlSample { node_time: t, ..self.nodes[k] },
            Err(k) => k - 1,
        };
        let (a, b) = (&self.nodes[k], &self.nodes[k + 1]);
        let s = (t - a.node_time) / (b.node_time - a.node_time);
        ControlSample {
            accel_mag: a.accel_mag + s * (b.accel_mag - a.accel_mag),
            sigma: a.sigma + s * (b.sigma - a.sigma),
            beta: a.beta + s * (b.beta - a.beta),
            node_time: t,
        }
    }

    /// Trapezoidal integral of the acceleration magnitude over the nodes.
    pub fn accel_integral(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| 0.5 * (w[1].node_time - w[0].node_time) * (w[0].accel_mag + w[1].accel_mag))
            .sum()
    }
}

/// Time derivatives of the six kinematic spherical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalRates {
    pub r_dot: f64,
    pub u_dot: f64,
    pub v_dot: f64,
    pub w_dot: f64,
    pub theta_dot: f64,
    pub phi_dot: f64,
}

pub fn eom_rhs(st: &SphericalState, ctrl: &ControlSample, mu: f64) -> Result<SphericalRates, DynamicsError> {
    if !(st.r > 0.0) {
        return Err(DynamicsError::NonPositiveRadius(st.r));
    }
    let cp = st.phi.cos();
    if cp < POLAR_LIMIT {
        return Err(DynamicsError::PolarSingularity(cp));
    }
    Ok(rates(st.r, st.u, st.v, st.w, st.phi, cp, ctrl.accel_mag, ctrl.sigma, ctrl.beta, mu))
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn rates(r: f64, u: f64, v: f64, w: f64, phi: f64, cp: f64, a: f64, sigma: f64, beta: f64, mu: f64) -> SphericalRates {
    let tp = phi.sin() / cp;
    let (ss, cs) = sigma.sin_cos();
    let (sb, cb) = beta.sin_cos();
    SphericalRates {
        r_dot: u,
        u_dot: (v * v + w * w) / r - mu / (r * r) + a * ss * cb,
        v_dot: -u * v / r + v * w * tp / r + a * cs * cb,
        w_dot: -u * w / r + v * v * tp / r + a * sb,
        theta_dot: v / (r * cp),
        phi_dot: w / r,
    }
}

/// Settings for [`propagate`].
#[derive(Debug, Clone, Copy)]
pub struct PropagationParams {
    pub mu: f64,
    pub soi_radius: f64,
    /// d(M/M₀)/dt per unit commanded acceleration; `None` holds mass fixed.
    pub mass_loss_coeff: Option<f64>,
    pub tol: Tolerances,
}

impl PropagationParams {
    pub fn new(mu: f64, soi_radius: f64) -> Self {
        Self { mu, soi_radius, mass_loss_coeff: None, tol: Tolerances::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoiEvent {
    pub t_soi: f64,
    pub state: SphericalState,
    /// ℓ − ℓ_soi at the located root, LU.
    pub residual: f64,
    pub ell_dot: f64,
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub trajectory: Vec<SphericalState>,
    pub soi_event: Option<SoiEvent>,
    pub stats: IntegrationStats,
    /// Set when an SOI stop was requested but the trajectory never entered.
    pub no_crossing: bool,
}

impl PropagationResult {
    pub fn final_state(&self) -> &SphericalState {
        self.trajectory.last().expect("trajectory always holds the initial state")
    }
}

fn pack(s: &SphericalState, m0: f64) -> [f64; 7] {
    [s.r, s.u, s.v, s.w, s.theta, s.phi, s.mass / m0]
}

fn unpack(y: &[f64; 7], m0: f64, epoch: f64) -> SphericalState {
    SphericalState { r: y[0], u: y[1], v: y[2], w: y[3], theta: y[4], phi: y[5], mass: y[6] * m0, epoch }
}

fn distance_to_earth<E: EarthEphemeris>(y: &[f64; 7], t: f64, earth: &E) -> f64 {
    let (st, ct) = y[4].sin_cos();
    let (sp, cp) = y[5].sin_cos();
    let p = nalgebra::Vector3::new(y[0] * cp * ct, y[0] * cp * st, y[0] * sp);
    (p - earth.state_at(t).position).norm()
}

/// Integrates the thrust-perturbed motion over `span`. When `stop_at_soi`
/// is set, integration ends at the first inbound crossing of the SOI sphere.
/// Thrust is switched off whenever the object is inside the SOI.
pub fn propagate<E: EarthEphemeris>(
    initial: &SphericalState,
    ctrl: &ControlHistory,
    span: (f64, f64),
    stop_at_soi: bool,
    earth: &E,
    params: &PropagationParams,
) -> Result<PropagationResult, DynamicsError> {
    let (t0, t1) = span;
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(DynamicsError::BadSpan(t0, t1));
    }
    if initial.phi.cos() < POLAR_LIMIT {
        return Err(DynamicsError::PolarSingularity(initial.phi.cos()));
    }
    let m0 = initial.mass;
    let mu = params.mu;
    let soi = params.soi_radius;
    let mass_coeff = params.mass_loss_coeff;

    let rhs = |t: f64, y: &[f64; 7]| -> [f64; 7] {
        let mut c = ctrl.eval(t);
        if c.accel_mag > 0.0 && distance_to_earth(y, t, earth) < soi {
            c.accel_mag = 0.0;
        }
        let a = c.accel_mag / y[6];
        let cp = y[5].cos();
        let d = rates(y[0], y[1], y[2], y[3], y[5], cp, a, c.sigma, c.beta, mu);
        let m_dot = mass_coeff.map_or(0.0, |k| -k * c.accel_mag);
        [d.r_dot, d.u_dot, d.v_dot, d.w_dot, d.theta_dot, d.phi_dot, m_dot]
    };

    let mut trajectory = vec![*initial];
    let mut soi_event = None;
    let mut step_error: Option<DynamicsError> = None;
    let g = |y: &[f64; 7], t: f64| distance_to_earth(y, t, earth) - soi;

    let observer = |step: &DenseStep<7>| -> StepControl {
        if y_invalid(&step.y1) {
            step_error = Some(DynamicsError::PolarSingularity(step.y1[5].cos()));
            return StepControl::Stop;
        }
        if stop_at_soi {
            // Sample inside the step so that a short excursion is not skipped.
            const SAMPLES: usize = 8;
            let mut t_prev = step.t0;
            let mut g_prev = g(&step.y0, step.t0);
            for k in 1..=SAMPLES {
                let t = step.t0 + (step.t1 - step.t0) * k as f64 / SAMPLES as f64;
                let y = if k == SAMPLES { step.y1 } else { step.eval(t) };
                let g_now = g(&y, t);
                if g_prev > 0.0 && g_now <= 0.0 {
                    let root = brent(|tt| g(&step.eval(tt), tt), t_prev, t, 1e-15, 200).unwrap_or(t);
                    let y_root = step.eval(root);
                    let state = unpack(&y_root, m0, root);
                    let residual = g(&y_root, root);
                    let ell_dot = ell_dot_of(&state, earth).unwrap_or(f64::NAN);
                    soi_event = Some(SoiEvent { t_soi: root, state, residual, ell_dot });
                    trajectory.push(state);
                    return StepControl::Stop;
                }
                t_prev = t;
                g_prev = g_now;
            }
        }
        trajectory.push(unpack(&step.y1, m0, step.t1));
        StepControl::Continue
    };

    let opts = AdaptiveOptions { tol: params.tol, ..Default::default() };
    let outcome = ode::integrate_adaptive(rhs, t0, pack(initial, m0), t1, &opts, observer)?;
    if let Some(e) = step_error {
        return Err(e);
    }
    let no_crossing = stop_at_soi && soi_event.is_none();
    Ok(PropagationResult { trajectory, soi_event, stats: outcome.stats, no_crossing })
}

fn y_invalid(y: &[f64; 7]) -> bool {
    y[0] <= 0.0 || y[5].cos() < POLAR_LIMIT
}

fn ell_dot_of<E: EarthEphemeris>(s: &SphericalState, earth: &E) -> Result<f64, DynamicsError> {
    let c = cartesian_from_spherical(s)?;
    let e = earth.state_at(s.epoch);
    let rel = c.position - e.position;
    Ok(rel.dot(&(c.velocity - e.velocity)) / rel.norm())
}

/// Heliocentric specific orbital energy of a spherical state.
pub fn specific_energy(s: &SphericalState, mu: f64) -> f64 {
    0.5 * (s.u * s.u + s.v * s.v + s.w * s.w) - mu / s.r
}
