//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! States are fixed-size arrays so that the small systems used here stay on
//! the stack. The adaptive driver hands every accepted step to an observer
//! closure, which can evaluate the interpolant and stop the integration.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerances {
    pub const fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub tol: Tolerances,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { tol: Tolerances::default(), h_init: None, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    rcont: [[f64; N]; 4],
}

impl<const N: usize> DenseStep<N> {
    /// Fourth-order interpolant on `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let th = if h == 0.0 { 0.0 } else { (t - self.t0) / h };
        let th1 = 1.0 - th;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.y0[i]
                + th * (self.rcont[0][i]
                    + th1 * (self.rcont[1][i] + th * (self.rcont[2][i] + th1 * self.rcont[3][i])));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub max_error_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptiveOutcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub stats: IntegrationStats,
    pub stopped_early: bool,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for &(c, k) in terms {
        let hc = h * c;
        for i in 0..N {
            out[i] += hc * k[i];
        }
    }
    out
}

struct RawStep<const N: usize> {
    y1: [f64; N],
    k7: [f64; N],
    err: [f64; N],
    k: [[f64; N]; 6],
}

#[inline]
fn dp_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> RawStep<N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(t + h, &y1);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    RawStep { y1, k7, err, k: [*k1, k2, k3, k4, k5, k6] }
}

fn dense_coeffs<const N: usize>(y0: &[f64; N], raw: &RawStep<N>, h: f64) -> [[f64; N]; 4] {
    let mut r = [[0.0; N]; 4];
    let [k1, _k2, k3, k4, k5, k6] = &raw.k;
    for i in 0..N {
        let ydiff = raw.y1[i] - y0[i];
        let bspl = h * k1[i] - ydiff;
        r[0][i] = ydiff;
        r[1][i] = bspl;
        r[2][i] = ydiff - h * raw.k7[i] - bspl;
        r[3][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * raw.k7[i]);
    }
    r
}

/// Adaptive integration from `t0` to `t1` (either direction).
pub fn integrate_adaptive<const N: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &AdaptiveOptions,
    mut observer: O,
) -> Result<AdaptiveOutcome<N>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(&DenseStep<N>) -> StepControl,
{
    let mut stats = IntegrationStats::default();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(AdaptiveOutcome { t: t0, y: y0, stats, stopped_early: false });
    }
    let Tolerances { rtol, atol } = opts.tol;
    let scale = |a: f64, b: f64| atol + rtol * a.abs().max(b.abs());

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.rhs_evals += 1;

    let mut h = match opts.h_init {
        Some(h) => h.abs().min(span),
        None => {
            // Hairer's starting step heuristic.
            let mut d0 = 0.0;
            let mut d1 = 0.0;
            for i in 0..N {
                let sk = scale(y[i], y[i]);
                d0 += (y[i] / sk).powi(2);
                d1 += (k1[i] / sk).powi(2);
            }
            let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            let y_probe = axpy(&y, dir * h0, &[(1.0, &k1)]);
            let k_probe = f(t + dir * h0, &y_probe);
            stats.rhs_evals += 1;
            let mut d2 = 0.0;
            for i in 0..N {
                d2 += ((k_probe[i] - k1[i]) / scale(y[i], y[i])).powi(2);
            }
            let d2 = (d2 / N as f64).sqrt() / h0;
            let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
            (100.0 * h0).min(h1).min(span)
        }
    }
    .min(opts.h_max);

    let h_floor = 1e-14 * t0.abs().max(t1.abs()).max(1.0);
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < h_floor {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let hs = dir * h;
        let raw = dp_step(&mut f, t, &y, &k1, hs);
        stats.rhs_evals += 6;

        let mut err = 0.0;
        for i in 0..N {
            let e = raw.err[i] / scale(y[i], raw.y1[i]);
            err += e * e;
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            // Shrink hard and retry.
            stats.rejected += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(err);
            let t_new = if last { t1 } else { t + hs };
            if raw.y1.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite(t_new));
            }
            let step = DenseStep { t0: t, t1: t_new, y0: y, y1: raw.y1, rcont: dense_coeffs(&y, &raw, hs) };
            // PI step-size controller.
            let mut fac = 0.9 * err.max(1e-10).powf(-0.17) * err_old.powf(0.04);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_old = err.max(1e-4);
            last_rejected = false;

            t = t_new;
            y = raw.y1;
            k1 = raw.k7;
            if observer(&step) == StepControl::Stop {
                return Ok(AdaptiveOutcome { t, y, stats, stopped_early: true });
            }
            if last {
                break;
            }
            h = (h * fac).min(opts.h_max);
        } else {
            stats.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            last_rejected = true;
        }
    }
    Ok(AdaptiveOutcome { t, y, stats, stopped_early: false })
}

/// Fixed-step integration with `n_steps` equal steps. The result is a smooth
/// function of the initial state and of any parameters inside `f`.
pub fn integrate_fixed<const N: usize, F>(mut f: F, t0: f64, y0: [f64; N], t1: f64, n_steps: usize) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let n = n_steps.max(1);
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    let mut k1 = f(t0, &y);
    for s in 0..n {
        let t = t0 + s as f64 * h;
        let raw = dp_step(&mut f, t, &y, &k1, h);
        y = raw.y1;
        k1 = raw.k7;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let out = integrate_adaptive(
            |_t, y: &[f64; 1]| [-y[0]],
            0.0,
            [1.0],
            5.0,
            &AdaptiveOptions::default(),
            |_s| StepControl::Continue,
        )
        .unwrap();
        assert!((out.y[0] - (-5.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let out = integrate_adaptive(
            |_t, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            -3.0,
            &AdaptiveOptions::default(),
            |_s| StepControl::Continue,
        )
        .unwrap();
        assert!((out.y[0] - 3.0f64.cos()).abs() < 1e-9);
        assert!((out.y[1] - 3.0f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_accuracy() {
        let mut worst: f64 = 0.0;
        integrate_adaptive(
            |_t, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            &AdaptiveOptions::default(),
            |s| {
                for k in 0..=10 {
                    let t = s.t0 + (s.t1 - s.t0) * k as f64 / 10.0;
                    worst = worst.max((s.eval(t)[0] - t.cos()).abs());
                }
                StepControl::Continue
            },
        )
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn fixed_step_order() {
        let exact = 1.0f64.exp();
        let e1 = (integrate_fixed(|_t, y: &[f64; 1]| [y[0]], 0.0, [1.0], 1.0, 10)[0] - exact).abs();
        let e2 = (integrate_fixed(|_t, y: &[f64; 1]| [y[0]], 0.0, [1.0], 1.0, 20)[0] - exact).abs();
        // fifth order: halving h divides the error by ~32
        assert!(e1 / e2 > 25.0, "{}", e1 / e2);
    }

    #[test]
    fn observer_can_stop() {
        let out = integrate_adaptive(
            |_t, _y: &[f64; 1]| [1.0],
            0.0,
            [0.0],
            10.0,
            &AdaptiveOptions { h_max: 0.5, ..Default::default() },
            |s| if s.t1 > 2.0 { StepControl::Stop } else { StepControl::Continue },
        )
        .unwrap();
        assert!(out.stopped_early);
        assert!(out.t > 2.0 && out.t < 3.0);
    }
}
