//! Shooting map from the decision vector to the terminal approach distance.
//!
//! The thrust window is integrated in normalized time with a fixed number of
//! steps per control interval, so the map is smooth in every decision
//! variable. Sensitivities are carried alongside the state (transition matrix
//! per interval plus the local control partials) and folded back into a full
//! gradient with a single backward sweep. After the window the object coasts
//! on its osculating conic until it enters the sphere of influence.

use nalgebra::Vector3;

use crate::elements::{cartesian_to_elements, kepler_state_at, CartesianState, OrbitElements};
use crate::ephemeris::{CircularEarth, EarthEphemeris};
use crate::flyby::{approach_distance, impact_parameter};
use crate::ode::integrate_fixed;
use crate::roots::brent;
use crate::scenario::Scenario;

use super::TranscriptionError;

/// Step used when scanning the coast arc for the entry.
const SCAN_STEP: f64 = 1e-3;
/// Gap kept between the end of the window and the nominal entry, TU.
pub const WINDOW_GUARD: f64 = 5e-3;

/// Planar state (r, u, v, Θ, M/M₀).
pub type PlanarState = [f64; 5];

/// Arrival at the sphere of influence.
#[derive(Debug, Clone, Copy)]
pub struct Arrival {
    pub t_soi: f64,
    pub b: f64,
    pub b_required: f64,
    pub ell_dot: f64,
    pub ell: f64,
    pub state: CartesianState,
}

/// One evaluation of the shooting map.
#[derive(Debug, Clone)]
pub struct Shot {
    pub arrival: Arrival,
    pub final_state: PlanarState,
    /// Scaled residual (b − b_i)/b_ref.
    pub c: f64,
    pub grad: Option<ShotGradient>,
}

#[derive(Debug, Clone)]
pub struct ShotGradient {
    pub d_idle: f64,
    pub d_window: f64,
    pub d_power: Vec<f64>,
    pub d_sigma: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ShootingModel {
    pub mu: f64,
    pub mu_earth: f64,
    pub earth: CircularEarth,
    pub soi_radius: f64,
    pub miss_distance: f64,
    pub a_max: f64,
    /// d(M/M₀)/dt per unit commanded acceleration (0 without mass loss).
    pub mass_coeff: f64,
    pub n_intervals: usize,
    pub h_target: f64,
    pub t0: f64,
    pub y0: PlanarState,
    pub t_soi_nominal: f64,
    pub b_ref: f64,
    /// Osculating conic of the unthrusted object.
    pub nominal: OrbitElements,
}

fn planar_to_cartesian(y: &[f64], t: f64) -> CartesianState {
    let (s, c) = y[3].sin_cos();
    CartesianState::new(
        Vector3::new(y[0] * c, y[0] * s, 0.0),
        Vector3::new(y[1] * c - y[2] * s, y[1] * s + y[2] * c, 0.0),
        t,
    )
}

impl ShootingModel {
    pub fn new(sc: &Scenario, lead_time: f64, n_intervals: usize, h_target: f64) -> Result<Self, TranscriptionError> {
        if sc.eco_elements.i.abs() > 1e-12 || !sc.planar {
            return Err(TranscriptionError::Unsupported("the optimizer handles planar scenarios only".into()));
        }
        if n_intervals < 2 {
            return Err(TranscriptionError::BadSpec(format!("need at least 2 intervals, got {n_intervals}")));
        }
        let s0 = sc.initial_state(lead_time)?;
        let y0 = [s0.r, s0.u, s0.v, s0.theta, 1.0];
        let nominal = cartesian_to_elements(&planar_to_cartesian(&y0, s0.epoch), sc.mu_sun())?;
        let mut m = ShootingModel {
            mu: sc.mu_sun(),
            mu_earth: sc.mu_earth(),
            earth: sc.earth,
            soi_radius: sc.soi_radius,
            miss_distance: sc.miss_distance,
            a_max: sc.max_accel(),
            mass_coeff: sc.mass_loss_coeff().unwrap_or(0.0),
            n_intervals,
            h_target,
            t0: s0.epoch,
            y0,
            t_soi_nominal: 0.0,
            b_ref: 1.0,
            nominal,
        };
        let arr = m.coast(&y0, s0.epoch, None)?;
        m.t_soi_nominal = arr.t_soi;
        m.b_ref = arr.b_required;
        Ok(m)
    }

    /// Largest admissible window length, TU.
    pub fn window_max(&self) -> f64 {
        self.t_soi_nominal - self.t0 - WINDOW_GUARD
    }

    pub fn substeps(&self, window: f64) -> usize {
        ((window / (self.n_intervals as f64 * self.h_target)).ceil() as usize).max(2)
    }

    /// Coasts from `y` at epoch `t` to the first inbound SOI crossing.
    pub fn coast(&self, y: &[f64], t: f64, hint: Option<f64>) -> Result<Arrival, TranscriptionError> {
        let c = planar_to_cartesian(y, t);
        let el: OrbitElements = cartesian_to_elements(&c, self.mu)?;
        if !(el.e < 1.0) {
            return Err(TranscriptionError::NoCrossing);
        }
        let g = |tt: f64| -> f64 {
            match kepler_state_at(&el, tt, self.mu) {
                Ok(s) => (s.position - self.earth.state_at(tt).position).norm() - self.soi_radius,
                Err(_) => f64::NAN,
            }
        };
        let (lo, hi) = match hint {
            Some(h) if h - 2.0 * SCAN_STEP > t && g(h - 2.0 * SCAN_STEP) > 0.0 && g(h + 2.0 * SCAN_STEP) < 0.0 => {
                (h - 2.0 * SCAN_STEP, h + 2.0 * SCAN_STEP)
            }
            _ => {
                let anchor = if self.t_soi_nominal != 0.0 { self.t_soi_nominal } else { 0.0 };
                let mut ta = t.max(anchor - 0.1);
                if !(g(ta) > 0.0) {
                    return Err(TranscriptionError::NoCrossing);
                }
                let stop = anchor + 0.1;
                loop {
                    let tb = ta + SCAN_STEP;
                    let gb = g(tb);
                    if gb.is_nan() {
                        return Err(TranscriptionError::NoCrossing);
                    }
                    if gb <= 0.0 {
                        break (ta, tb);
                    }
                    if tb > stop {
                        return Err(TranscriptionError::NoCrossing);
                    }
                    ta = tb;
                }
            }
        };
        let t_soi = brent(g, lo, hi, 1e-15, 200).ok_or(TranscriptionError::NoCrossing)?;
        let ast = kepler_state_at(&el, t_soi, self.mu)?;
        let e = self.earth.state_at(t_soi);
        let rel = ast.position - e.position;
        let v_rel = ast.velocity - e.velocity;
        let ell = rel.norm();
        let b = approach_distance(&rel, &v_rel).map_err(|_| TranscriptionError::NoCrossing)?;
        let b_required = impact_parameter(self.miss_distance, v_rel.norm(), self.mu_earth)
            .map_err(|e| TranscriptionError::BadSpec(e.to_string()))?;
        Ok(Arrival { t_soi, b, b_required, ell_dot: rel.dot(&v_rel) / ell, ell, state: ast })
    }

    fn control(&self, p: &[f64], sigma: &[f64], k: usize, s: f64) -> (f64, f64) {
        (self.a_max * ((1.0 - s) * p[k] + s * p[k + 1]), (1.0 - s) * sigma[k] + s * sigma[k + 1])
    }

    #[inline]
    fn field(&self, y: &[f64], a: f64, sigma: f64) -> [f64; 5] {
        let (r, u, v, m) = (y[0], y[1], y[2], y[4]);
        let (ss, cs) = sigma.sin_cos();
        [
            u,
            v * v / r - self.mu / (r * r) + a / m * ss,
            -u * v / r + a / m * cs,
            v / r,
            -self.mass_coeff * a,
        ]
    }

    /// State after coasting for `idle` from the start of the window.
    pub fn start_state(&self, idle: f64) -> Result<PlanarState, TranscriptionError> {
        let c = kepler_state_at(&self.nominal, self.t0 + idle, self.mu)?;
        let r = c.position.norm();
        let rhat = c.position / r;
        let that = Vector3::new(-rhat.y, rhat.x, 0.0);
        let theta = self.y0[3] + crate::elements::wrap_pi(rhat.y.atan2(rhat.x) - self.y0[3]);
        Ok([r, c.velocity.dot(&rhat), c.velocity.dot(&that), theta, 1.0])
    }

    /// Integrates the thrust arc and returns the state at its end.
    pub fn propagate_window(
        &self,
        idle: f64,
        window: f64,
        p: &[f64],
        sigma: &[f64],
    ) -> Result<PlanarState, TranscriptionError> {
        Ok(*self.node_states(idle, window, p, sigma)?.last().expect("at least one node"))
    }

    /// States at the N+1 control nodes of the thrust arc that starts after
    /// `idle` and lasts `window`.
    pub fn node_states(
        &self,
        idle: f64,
        window: f64,
        p: &[f64],
        sigma: &[f64],
    ) -> Result<Vec<PlanarState>, TranscriptionError> {
        let n = self.n_intervals;
        let sub = self.substeps(window);
        let dt = window / n as f64;
        let mut y = self.start_state(idle)?;
        let mut out = vec![y];
        for k in 0..n {
            y = integrate_fixed(
                |s, y: &[f64; 5]| {
                    let (a, sg) = self.control(p, sigma, k, s);
                    self.field(y, a, sg).map(|d| dt * d)
                },
                0.0,
                y,
                1.0,
                sub,
            );
            out.push(y);
        }
        Ok(out)
    }

    fn residual(&self, arr: &Arrival) -> f64 {
        (arr.b - arr.b_required) / self.b_ref
    }

    /// Evaluates the shooting map; with `want_grad` also its gradient.
    pub fn shoot(
        &self,
        idle: f64,
        window: f64,
        p: &[f64],
        sigma: &[f64],
        want_grad: bool,
    ) -> Result<Shot, TranscriptionError> {
        let n = self.n_intervals;
        if p.len() != n + 1 || sigma.len() != n + 1 {
            return Err(TranscriptionError::BadSpec("control vector length mismatch".into()));
        }
        if !(window > 0.0) || !window.is_finite() {
            return Err(TranscriptionError::BadSpec(format!("window length {window} must be positive")));
        }
        if !(idle >= 0.0) {
            return Err(TranscriptionError::BadSpec(format!("idle span {idle} must be non-negative")));
        }
        let tf = self.t0 + idle + window;
        if !want_grad {
            let y = self.propagate_window(idle, window, p, sigma)?;
            if !y.iter().all(|v| v.is_finite()) || y[0] <= 0.0 {
                return Err(TranscriptionError::NonFinite);
            }
            let arrival = self.coast(&y, tf, None)?;
            return Ok(Shot { c: self.residual(&arrival), arrival, final_state: y, grad: None });
        }

        // Augmented state: y (5), Φ (25, row-major), S (5×4), s_T (5).
        const NA: usize = 55;
        let sub = self.substeps(window);
        let dt = window / n as f64;
        let mut phis = Vec::with_capacity(n);
        let mut sens = Vec::with_capacity(n);
        let y_start = self.start_state(idle)?;
        let mut y = y_start;
        let mut s_t = [0.0; 5];
        for k in 0..n {
            let mut x = [0.0; NA];
            x[..5].copy_from_slice(&y);
            for i in 0..5 {
                x[5 + 6 * i] = 1.0;
            }
            x[50..55].copy_from_slice(&s_t);
            let out = integrate_fixed(
                |s, x: &[f64; NA]| {
                    let (a, sg) = self.control(p, sigma, k, s);
                    let f = self.field(&x[..5], a, sg);
                    let jac = self.jacobian(&x[..5], a, sg);
                    let (ss, cs) = sg.sin_cos();
                    let m = x[4];
                    let dfa = [0.0, ss / m, cs / m, 0.0, -self.mass_coeff];
                    let dfs = [0.0, a * cs / m, -a * ss / m, 0.0, 0.0];
                    let mut d = [0.0; NA];
                    for i in 0..5 {
                        d[i] = dt * f[i];
                        for j in 0..5 {
                            let mut acc = 0.0;
                            for l in 0..5 {
                                acc += jac[i][l] * x[5 + 5 * l + j];
                            }
                            d[5 + 5 * i + j] = dt * acc;
                        }
                        let q = [
                            self.a_max * (1.0 - s) * dfa[i],
                            self.a_max * s * dfa[i],
                            (1.0 - s) * dfs[i],
                            s * dfs[i],
                        ];
                        for j in 0..4 {
                            let mut acc = 0.0;
                            for l in 0..5 {
                                acc += jac[i][l] * x[30 + 4 * l + j];
                            }
                            d[30 + 4 * i + j] = dt * (acc + q[j]);
                        }
                        let mut acc = 0.0;
                        for l in 0..5 {
                            acc += jac[i][l] * x[50 + l];
                        }
                        d[50 + i] = dt * acc + f[i] / n as f64;
                    }
                    d
                },
                0.0,
                x,
                1.0,
                sub,
            );
            y.copy_from_slice(&out[..5]);
            s_t.copy_from_slice(&out[50..55]);
            let mut phi = [0.0; 25];
            phi.copy_from_slice(&out[5..30]);
            let mut sk = [0.0; 20];
            sk.copy_from_slice(&out[30..50]);
            phis.push(phi);
            sens.push(sk);
        }
        if !y.iter().all(|v| v.is_finite()) || y[0] <= 0.0 {
            return Err(TranscriptionError::NonFinite);
        }
        let arrival = self.coast(&y, tf, None)?;
        let c = self.residual(&arrival);

        // ∂c/∂(y_f, t_f) by central differences over the coast.
        let hint = Some(arrival.t_soi);
        let steps = [1e-7, 1e-7, 1e-7, 1e-7];
        let mut gy = [0.0; 5];
        for i in 0..4 {
            let mut yp = y;
            let mut ym = y;
            yp[i] += steps[i];
            ym[i] -= steps[i];
            let cp = self.residual(&self.coast(&yp, tf, hint)?);
            let cm = self.residual(&self.coast(&ym, tf, hint)?);
            gy[i] = (cp - cm) / (2.0 * steps[i]);
        }
        let ht = 1e-7;
        let cp = self.residual(&self.coast(&y, tf + ht, hint)?);
        let cm = self.residual(&self.coast(&y, tf - ht, hint)?);
        let g_tf = (cp - cm) / (2.0 * ht);

        let mut d_power = vec![0.0; n + 1];
        let mut d_sigma = vec![0.0; n + 1];
        let mut lam = gy;
        for k in (0..n).rev() {
            let sk = &sens[k];
            let mut q = [0.0; 4];
            for (j, qj) in q.iter_mut().enumerate() {
                *qj = (0..5).map(|i| lam[i] * sk[4 * i + j]).sum();
            }
            d_power[k] += q[0];
            d_power[k + 1] += q[1];
            d_sigma[k] += q[2];
            d_sigma[k + 1] += q[3];
            let phi = &phis[k];
            let mut next = [0.0; 5];
            for (j, nj) in next.iter_mut().enumerate() {
                *nj = (0..5).map(|i| lam[i] * phi[5 * i + j]).sum();
            }
            lam = next;
        }
        let d_window = (0..5).map(|i| gy[i] * s_t[i]).sum::<f64>() + g_tf;
        let f0 = self.field(&y_start, 0.0, 0.0);
        let d_idle = (0..5).map(|i| lam[i] * f0[i]).sum::<f64>() + g_tf;
        Ok(Shot { arrival, final_state: y, c, grad: Some(ShotGradient { d_idle, d_window, d_power, d_sigma }) })
    }

    #[inline]
    fn jacobian(&self, y: &[f64], a: f64, sigma: f64) -> [[f64; 5]; 5] {
        let (r, u, v, m) = (y[0], y[1], y[2], y[4]);
        let (ss, cs) = sigma.sin_cos();
        let r2 = r * r;
        [
            [0.0, 1.0, 0.0, 0.0, 0.0],
            [-v * v / r2 + 2.0 * self.mu / (r2 * r), 0.0, 2.0 * v / r, 0.0, -a * ss / (m * m)],
            [u * v / r2, -v / r, -u / r, 0.0, -a * cs / (m * m)],
            [-v / r2, 0.0, 1.0 / r, 0.0, 0.0],
            [0.0; 5],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;

    fn model(n: usize) -> ShootingModel {
        ShootingModel::new(&default_scenario(), 0.9, n, 4e-3).unwrap()
    }

    fn anti_velocity(m: &ShootingModel) -> Vec<f64> {
        let g = m.y0[1].atan2(m.y0[2]);
        vec![g + std::f64::consts::PI; m.n_intervals + 1]
    }

    #[test]
    fn zero_control_gives_head_on_residual() {
        let m = model(8);
        let p = vec![0.0; 9];
        let shot = m.shoot(0.0, 0.1, &p, &anti_velocity(&m), false).unwrap();
        assert!(shot.arrival.b < 1e-2 * shot.arrival.b_required);
        assert!((shot.c + 1.0).abs() < 1e-2);
        assert!(shot.arrival.ell_dot < 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let m = model(6);
        let p: Vec<f64> = (0..7).map(|k| 0.3 + 0.1 * k as f64).collect();
        let sg: Vec<f64> = anti_velocity(&m).iter().enumerate().map(|(k, s)| s + 0.05 * k as f64).collect();
        let t = 0.15;
        let idle = 0.2;
        let shot = m.shoot(idle, t, &p, &sg, true).unwrap();
        let g = shot.grad.unwrap();
        let f = |t: f64, p: &[f64], s: &[f64]| m.shoot(idle, t, p, s, false).unwrap().c;
        // The coast amplifies round-off in c to ~1e-10, so the step stays
        // large enough to keep difference noise well below the tolerance.
        let h = 1e-4;
        let fi = |d: f64| m.shoot(d, t, &p, &sg, false).unwrap().c;
        let fd_i = (fi(idle + h) - fi(idle - h)) / (2.0 * h);
        assert!(((g.d_idle - fd_i) / fd_i).abs() < 1e-4, "{} vs {}", g.d_idle, fd_i);
        let fd_t = (f(t + h, &p, &sg) - f(t - h, &p, &sg)) / (2.0 * h);
        assert!(((g.d_window - fd_t) / fd_t).abs() < 1e-4, "{} vs {}", g.d_window, fd_t);
        // Difference noise is absolute, so errors are measured against the
        // largest entry of each block.
        let scale = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (sp_, ss_) = (scale(&g.d_power), scale(&g.d_sigma));
        for k in 0..7 {
            let (mut pp, mut pm) = (p.clone(), p.clone());
            pp[k] += h;
            pm[k] -= h;
            let fd = (f(t, &pp, &sg) - f(t, &pm, &sg)) / (2.0 * h);
            assert!((g.d_power[k] - fd).abs() < 1e-4 * sp_, "p{k}: {} vs {}", g.d_power[k], fd);
            let (mut sp, mut sm) = (sg.clone(), sg.clone());
            sp[k] += h;
            sm[k] -= h;
            let fd = (f(t, &p, &sp) - f(t, &p, &sm)) / (2.0 * h);
            assert!((g.d_sigma[k] - fd).abs() < 1e-4 * ss_, "s{k}: {} vs {}", g.d_sigma[k], fd);
        }
    }
}
