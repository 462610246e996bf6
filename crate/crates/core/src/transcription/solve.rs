//! Regime set-up, multi-start, feasibility polish and reporting.
//!
//! Scaled variables: x = [T/T_ref, τ/T_max, p_0..p_N, σ_0..σ_N], where T is
//! the thrust-arc length, τ the idle coast before it and T_ref the
//! full-power window that meets the target. The power block is absent in the
//! constant regime, and τ is pinned to zero outside the variable regime.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elements::{kepler_state_at, wrap_pi, wrap_tau, OrbitElements};
use crate::roots::brent;
use crate::scenario::Scenario;

use super::nlp::{solve_al, AlOptions, AlResult, BoxProblem};
use super::shooting::ShootingModel;
use super::{
    control_history, evaluate_constraints, trapezoid_weights, BoundedProfile, DecisionVector, Regime, SolutionReport,
    SolverDiagnostics, SolverStatus, TranscriptionError, TranscriptionSpec, IDLE_THRESHOLD,
};

const WINDOW_MIN: f64 = 1e-3;
/// Target on the scaled terminal residual after polishing.
const POLISH_TOL: f64 = 1e-10;
/// Relative first-order optimality tolerance for a converged status.
const KKT_TOL: f64 = 1e-4;
/// Idle offsets probed when seeding the variable regime.
const IDLE_SCAN: usize = 160;

pub struct Solver {
    pub scenario: Scenario,
    pub spec: TranscriptionSpec,
    pub model: ShootingModel,
    lower: Vec<f64>,
    weights: Vec<f64>,
    t_max: f64,
    t_ref: f64,
    nominal: OrbitElements,
}

struct Candidate {
    label: String,
    x: Vec<f64>,
    f: f64,
    window: f64,
    converged: bool,
    outer: usize,
    inner: usize,
    evals: usize,
}

/// Continuous unwrap of an angle sequence.
fn unwrap(v: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for &x in v {
        let y = match out.last() {
            Some(prev) => prev + wrap_pi(x - prev),
            None => x,
        };
        out.push(y);
    }
    out
}

impl Solver {
    pub fn new(scenario: &Scenario, spec: &TranscriptionSpec) -> Result<Self, TranscriptionError> {
        spec.validate()?;
        let model = ShootingModel::new(scenario, spec.start_time, spec.n_intervals, spec.step_target)?;
        let nominal = model.nominal;
        let t_max = model.window_max();
        if !(t_max > WINDOW_MIN) {
            return Err(TranscriptionError::Infeasible("no room for a thrust window before SOI entry".into()));
        }
        let mut solver = Solver {
            scenario: scenario.clone(),
            spec: *spec,
            lower: spec.regime.lower_bounds(spec.n_intervals),
            weights: trapezoid_weights(spec.n_intervals),
            t_max,
            t_ref: t_max,
            nominal,
            model,
        };
        if let Some(t) = solver.constant_window(0.0) {
            solver.t_ref = t;
        }
        Ok(solver)
    }

    fn n(&self) -> usize {
        self.spec.n_intervals
    }

    fn is_constant(&self) -> bool {
        matches!(self.spec.regime, Regime::ConstantPower)
    }

    fn idle_free(&self) -> bool {
        matches!(self.spec.regime, Regime::VariablePower)
    }

    fn unpack(&self, x: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let n1 = self.n() + 1;
        let window = x[0] * self.t_ref;
        let idle = x[1] * self.t_max;
        if self.is_constant() {
            (idle, window, vec![1.0; n1], x[2..].to_vec())
        } else {
            (idle, window, x[2..2 + n1].to_vec(), x[2 + n1..].to_vec())
        }
    }

    fn pack(&self, idle: f64, window: f64, p: &[f64], sigma: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        let mut x = vec![window / self.t_ref, idle / self.t_max];
        if !self.is_constant() {
            x.extend(p.iter().zip(&self.lower).map(|(v, lo)| v.clamp(*lo, 1.0)));
        }
        x.extend_from_slice(sigma);
        for i in 0..2 {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
        x
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n1 = self.n() + 1;
        let idle_hi = if self.idle_free() { 1.0 - WINDOW_MIN / self.t_max } else { 0.0 };
        let mut lo = vec![WINDOW_MIN / self.t_ref, 0.0];
        let mut hi = vec![self.t_max / self.t_ref, idle_hi];
        if !self.is_constant() {
            lo.extend_from_slice(&self.lower);
            hi.extend(std::iter::repeat_n(1.0, n1));
        }
        lo.extend(std::iter::repeat_n(-1e3, n1));
        hi.extend(std::iter::repeat_n(1e3, n1));
        (lo, hi)
    }

    /// Scaled energy T·Σw·p / T_ref and its gradient.
    fn objective(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (_, _, p, _) = self.unpack(x);
        let wp: f64 = self.weights.iter().zip(&p).map(|(w, p)| w * p).sum();
        let mut g = vec![0.0; x.len()];
        g[0] = wp;
        if !self.is_constant() {
            for k in 0..=self.n() {
                g[2 + k] = x[0] * self.weights[k];
            }
        }
        (x[0] * wp, g)
    }

    fn constraint(&self, x: &[f64], want_grad: bool) -> Option<(f64, Option<Vec<f64>>)> {
        let (idle, window, p, sigma) = self.unpack(x);
        if idle + window > self.t_max {
            return None;
        }
        let shot = self.model.shoot(idle, window, &p, &sigma, want_grad).ok()?;
        let grad = shot.grad.map(|g| {
            let mut out = vec![g.d_window * self.t_ref, g.d_idle * self.t_max];
            if !self.is_constant() {
                out.extend_from_slice(&g.d_power);
            }
            out.extend_from_slice(&g.d_sigma);
            out
        });
        Some((shot.c, grad))
    }

    /// Thrust angles opposite to the unperturbed velocity at the nodes of an
    /// arc starting after `idle`.
    pub fn anti_velocity_sigma(&self, idle: f64, window: f64) -> Vec<f64> {
        let n = self.n();
        let raw: Vec<f64> = (0..=n)
            .map(|k| {
                let t = self.model.t0 + idle + window * k as f64 / n as f64;
                let st = kepler_state_at(&self.nominal, t, self.model.mu).expect("elliptic nominal orbit");
                let rhat = st.position.normalize();
                let that = nalgebra::Vector3::new(-rhat.y, rhat.x, 0.0);
                st.velocity.dot(&rhat).atan2(st.velocity.dot(&that)) + PI
            })
            .collect();
        unwrap(&raw)
    }

    /// Full-power anti-velocity arc length after `idle` that meets the
    /// target, if any.
    pub fn constant_window(&self, idle: f64) -> Option<f64> {
        let ones = vec![1.0; self.n() + 1];
        let c = |t: f64| {
            self.model
                .shoot(idle, t, &ones, &self.anti_velocity_sigma(idle, t), false)
                .map(|s| s.c)
                .unwrap_or(f64::NAN)
        };
        // Large windows can push the entry off the coast arc entirely, so
        // the bracket grows geometrically from below.
        let t_hi = self.t_max - idle;
        let mut a = WINDOW_MIN;
        if !(t_hi > a) || c(a) >= 0.0 {
            return None;
        }
        loop {
            let b = (a * 1.25).min(t_hi);
            let cb = c(b);
            if cb.is_nan() {
                return None;
            }
            if cb > 0.0 {
                return brent(c, a, b, 1e-12, 200);
            }
            if b >= t_hi {
                return None;
            }
            a = b;
        }
    }

    /// Uniform level on top of the lower bounds that meets the target.
    fn level_seed(&self, idle: f64, window: f64) -> Option<Vec<f64>> {
        if idle + window > self.t_max {
            return None;
        }
        let sigma = self.anti_velocity_sigma(idle, window);
        let make = |lev: f64| -> Vec<f64> { self.lower.iter().map(|lo| lo.max(lev)).collect() };
        let c = |lev: f64| self.model.shoot(idle, window, &make(lev), &sigma, false).map(|s| s.c).unwrap_or(f64::NAN);
        if !(c(1.0) >= 0.0) {
            return None;
        }
        let lev = if c(0.0) >= 0.0 { 0.0 } else { brent(c, 0.0, 1.0, 1e-12, 200)? };
        Some(self.pack(idle, window, &make(lev), &sigma))
    }

    /// Bang-bang guess: full power at the nodes where thrust buys the most
    /// approach distance per unit energy.
    fn greedy_seed(&self, idle: f64, window: f64) -> Option<Vec<f64>> {
        if idle + window > self.t_max {
            return None;
        }
        let sigma = self.anti_velocity_sigma(idle, window);
        let n1 = self.n() + 1;
        let mid: Vec<f64> = self.lower.iter().map(|lo| lo.max(0.5)).collect();
        let g = self.model.shoot(idle, window, &mid, &sigma, true).ok()?.grad?;
        let mut order: Vec<usize> = (0..n1).collect();
        order.sort_by(|&a, &b| {
            let ea = g.d_power[a] / self.weights[a];
            let eb = g.d_power[b] / self.weights[b];
            eb.partial_cmp(&ea).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let build = |m: usize, frac: f64| -> Vec<f64> {
            let mut p = self.lower.clone();
            for (j, &k) in order.iter().enumerate() {
                if j < m {
                    p[k] = 1.0;
                } else if j == m {
                    p[k] = p[k].max(frac);
                }
            }
            p
        };
        let c = |p: &[f64]| self.model.shoot(idle, window, p, &sigma, false).map(|s| s.c).unwrap_or(f64::NAN);
        if !(c(&build(n1, 0.0)) >= 0.0) {
            return None;
        }
        let (mut lo, mut hi) = (0usize, n1);
        while hi - lo > 1 {
            let m = (lo + hi) / 2;
            if c(&build(m, 0.0)) >= 0.0 {
                hi = m;
            } else {
                lo = m;
            }
        }
        let m = lo;
        let p = match brent(|f| c(&build(m, f)), 0.0, 1.0, 1e-12, 200) {
            Some(f) if c(&build(m, f)) >= 0.0 => build(m, f),
            _ => build(hi, 0.0),
        };
        Some(self.pack(idle, window, &p, &sigma))
    }

    /// Converts an earlier solution into a starting point for this problem.
    /// The thrust arc keeps its absolute epochs and its angles relative to
    /// the velocity direction.
    fn warm_seed(&self, rep: &SolutionReport) -> Vec<f64> {
        let n = self.n();
        let src_t0 = rep.control.t_start().unwrap_or(self.model.t0) - rep.decision.idle;
        let idle = if self.idle_free() { (src_t0 + rep.decision.idle - self.model.t0).max(0.0) } else { 0.0 };
        let window = rep.decision.window.clamp(WINDOW_MIN, self.t_max - idle);
        let base = self.anti_velocity_sigma(idle, window);
        let src_n = rep.decision.power.len() - 1;
        let sample = |v: &[f64], s: f64| -> f64 {
            let x = s * src_n as f64;
            let k = (x.floor() as usize).min(src_n - 1);
            let w = x - k as f64;
            (1.0 - w) * v[k] + w * v[k + 1]
        };
        let same = (src_t0 - self.model.t0).abs() < 1e-12 && src_n == n && idle == rep.decision.idle;
        let delta = unwrap(&rep.node_delta_deg.iter().map(|d| d.to_radians()).collect::<Vec<_>>());
        let mut p = Vec::with_capacity(n + 1);
        let mut sigma = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let s = k as f64 / n as f64;
            p.push(sample(&rep.decision.power, s));
            sigma.push(if same { rep.decision.sigma[k] } else { base[k] + sample(&delta, s) - PI });
        }
        self.pack(idle, window, &p, &sigma)
    }

    /// Idle offsets with the cheapest full-power anti-velocity burn, best
    /// first, one per local minimum.
    fn idle_scan(&self) -> Vec<(f64, f64)> {
        let span = self.t_max - WINDOW_MIN;
        let grid: Vec<(f64, Option<f64>)> = (0..IDLE_SCAN)
            .map(|j| {
                let idle = span * j as f64 / IDLE_SCAN as f64;
                (idle, self.constant_window(idle))
            })
            .collect();
        let mut minima: Vec<(f64, f64)> = Vec::new();
        for j in 0..grid.len() {
            let Some(t) = grid[j].1 else { continue };
            let left = j.checked_sub(1).and_then(|i| grid[i].1).unwrap_or(f64::INFINITY);
            let right = grid.get(j + 1).and_then(|g| g.1).unwrap_or(f64::INFINITY);
            if t <= left && t <= right {
                minima.push((grid[j].0, t));
            }
        }
        minima.sort_by(|a, b| a.1.total_cmp(&b.1));
        minima
    }

    fn seeds(&self, warm: &[&SolutionReport]) -> Vec<(String, Vec<f64>)> {
        let mut out: Vec<(String, Vec<f64>)> = Vec::new();
        for (i, rep) in warm.iter().enumerate() {
            out.push((format!("warm-{i}:{}", rep.regime.label()), self.warm_seed(rep)));
        }
        let n_seeds = self.spec.multi_start.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        match self.spec.regime {
            Regime::ConstantPower => {
                let Some(ts) = self.constant_window(0.0) else { return out };
                for (j, m) in [1.0, 1.05, 1.1, 1.2, 1.3, 1.5, 1.75, 2.0].iter().take(n_seeds).enumerate() {
                    let t = (ts * m).min(self.t_max);
                    let mut sigma = self.anti_velocity_sigma(0.0, t);
                    if j >= 4 {
                        sigma.iter_mut().for_each(|s| *s += rng.random_range(-0.02..0.02));
                    }
                    out.push((format!("anti-velocity x{m}"), self.pack(0.0, t, &[], &sigma)));
                }
            }
            Regime::Bounded { .. } => {
                if let Some(x) = self.greedy_seed(0.0, self.t_max.min(4.0 * self.t_ref)) {
                    out.push(("greedy".into(), x));
                }
                for m in [1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0, 40.0].iter().take(n_seeds.saturating_sub(1)) {
                    if let Some(x) = self.level_seed(0.0, (m * self.t_ref).min(self.t_max)) {
                        out.push((format!("level x{m}"), x));
                    }
                }
            }
            Regime::VariablePower => {
                let minima = self.idle_scan();
                for (rank, &(idle, t)) in minima.iter().take(2).enumerate() {
                    let ones = vec![1.0; self.n() + 1];
                    out.push((format!("idle-scan {rank}"), self.pack(idle, t, &ones, &self.anti_velocity_sigma(idle, t))));
                    for m in [1.0, 2.0, 4.0].iter().take(n_seeds / 2) {
                        let lead = (m * t).min(idle);
                        let w = (2.0 * m + 1.0) * t;
                        if let Some(x) = self.greedy_seed(idle - lead, w) {
                            out.push((format!("idle-scan {rank} greedy x{m}"), x));
                        }
                        if let Some(x) = self.level_seed(idle - lead, w) {
                            out.push((format!("idle-scan {rank} level x{m}"), x));
                        }
                    }
                }
            }
        }
        out
    }

    /// Minimum-norm Newton steps on the terminal residual, then a root solve
    /// on the arc length with everything else held.
    fn polish(&self, x: &[f64]) -> Option<Vec<f64>> {
        let (lo, hi) = self.bounds();
        let mut x = x.to_vec();
        for _ in 0..30 {
            let (c, g) = self.constraint(&x, true)?;
            if c.abs() < POLISH_TOL {
                return Some(x);
            }
            let g = g?;
            let free: Vec<bool> = (0..x.len())
                .map(|i| {
                    let dir = -c * g[i];
                    lo[i] < hi[i] && !((x[i] <= lo[i] && dir < 0.0) || (x[i] >= hi[i] && dir > 0.0))
                })
                .collect();
            let gg: f64 = (0..x.len()).filter(|&i| free[i]).map(|i| g[i] * g[i]).sum();
            if gg == 0.0 {
                break;
            }
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..20 {
                let xn: Vec<f64> = (0..x.len())
                    .map(|i| if free[i] { (x[i] - alpha * c * g[i] / gg).clamp(lo[i], hi[i]) } else { x[i] })
                    .collect();
                if let Some((cn, _)) = self.constraint(&xn, false) {
                    if cn.abs() < c.abs() {
                        x = xn;
                        improved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let base = x.clone();
        let c_of = |w: f64| {
            let mut xx = base.clone();
            xx[0] = w;
            self.constraint(&xx, false).map(|(c, _)| c).unwrap_or(f64::NAN)
        };
        let c0 = c_of(x[0]);
        if c0.abs() < POLISH_TOL {
            return Some(x);
        }
        let w_hi = hi[0].min((self.t_max - x[1] * self.t_max) / self.t_ref);
        let (a, b) = if c0 < 0.0 { (x[0], w_hi) } else { (lo[0], x[0]) };
        x[0] = brent(c_of, a, b, 1e-15, 200)?;
        (c_of(x[0]).abs() < POLISH_TOL).then_some(x)
    }

    /// Relative first-order optimality residual with a least-squares
    /// multiplier over the variables not held at a bound.
    fn kkt_residual(&self, x: &[f64]) -> Option<f64> {
        let (lo, hi) = self.bounds();
        let (_, gf) = self.objective(x);
        let gc = self.constraint(x, true)?.1?;
        let free = |i: usize, lam: f64| {
            let g = gf[i] - lam * gc[i];
            lo[i] < hi[i] && !((x[i] <= lo[i] && g > 0.0) || (x[i] >= hi[i] && g < 0.0))
        };
        let mut lam = 0.0;
        let mut mask: Vec<bool> = (0..x.len()).map(|i| lo[i] < hi[i]).collect();
        for _ in 0..10 {
            let (num, den) = (0..x.len())
                .filter(|&i| mask[i])
                .fold((0.0, 0.0), |(n, d), i| (n + gf[i] * gc[i], d + gc[i] * gc[i]));
            lam = if den > 0.0 { num / den } else { 0.0 };
            let next: Vec<bool> = (0..x.len()).map(|i| free(i, lam)).collect();
            if next == mask {
                break;
            }
            mask = next;
        }
        let scale = gf.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let r = (0..x.len()).filter(|&i| free(i, lam)).fold(0.0f64, |m, i| m.max((gf[i] - lam * gc[i]).abs()));
        Some(r / scale)
    }

    fn run_al(&self, x0: &[f64], opts: &AlOptions) -> AlResult {
        let (lower, upper) = self.bounds();
        let obj = |x: &[f64]| self.objective(x);
        let con = |x: &[f64], g: bool| self.constraint(x, g);
        let prob = BoxProblem { lower, upper, objective: &obj, constraint: &con };
        solve_al(&prob, x0, opts)
    }

    fn polished(&self, label: String, x: &[f64]) -> Option<Candidate> {
        let x = self.polish(x)?;
        Some(Candidate {
            label,
            f: self.objective(&x).0,
            window: x[0] * self.t_ref,
            x,
            converged: false,
            outer: 0,
            inner: 0,
            evals: 0,
        })
    }

    fn optimized(&self, label: String, x0: &[f64], opts: &AlOptions) -> Option<Candidate> {
        let r = self.run_al(x0, opts);
        let mut cand = self.polished(label, &r.x)?;
        cand.converged = r.converged;
        cand.outer = r.outer_iterations;
        cand.inner = r.inner_iterations;
        cand.evals = r.evaluations;
        Some(cand)
    }

    /// Lower objective wins; near-ties go to the shorter arc.
    fn better(a: &Candidate, b: &Candidate) -> bool {
        let tol = 1e-9 * b.f.abs().max(1e-12);
        a.f < b.f - tol || ((a.f - b.f).abs() <= tol && a.window < b.window)
    }

    /// Multi-start solve; `warm` solutions are added to the seed list.
    pub fn solve(&self, warm: &[&SolutionReport]) -> Result<SolutionReport, TranscriptionError> {
        let seeds = self.seeds(warm);
        if seeds.is_empty() {
            return Err(TranscriptionError::Infeasible(format!(
                "{} regime cannot reach the target before SOI entry",
                self.spec.regime.label()
            )));
        }
        let quick = AlOptions { max_outer: 5, max_inner: 60, ..Default::default() };
        let full = AlOptions { max_outer: 12, max_inner: 250, ..Default::default() };
        let mut diag = SolverDiagnostics { seeds_tried: seeds.len(), ..Default::default() };
        let mut best: Option<Candidate> = None;
        let consider = |cand: Candidate, diag: &mut SolverDiagnostics, best: &mut Option<Candidate>| {
            diag.outer_iterations += cand.outer;
            diag.inner_iterations += cand.inner;
            diag.evaluations += cand.evals;
            if best.as_ref().is_none_or(|b| Self::better(&cand, b)) {
                *best = Some(cand);
            }
        };
        for (label, x0) in &seeds {
            let mut any = false;
            // The polished seed itself competes, so a warm start is never lost.
            if let Some(c) = self.polished(format!("{label} (seed)"), x0) {
                consider(c, &mut diag, &mut best);
                any = true;
            }
            if let Some(c) = self.optimized(label.clone(), x0, &quick) {
                consider(c, &mut diag, &mut best);
                any = true;
            }
            diag.seeds_feasible += usize::from(any);
        }
        let Some(start) = best.as_ref().map(|b| (b.label.clone(), b.x.clone())) else {
            return Err(TranscriptionError::Infeasible("no seed reached a feasible point".into()));
        };
        if let Some(c) = self.optimized(start.0, &start.1, &full) {
            consider(c, &mut diag, &mut best);
        }
        let best = best.expect("a feasible candidate exists");
        diag.best_seed = best.label.clone();
        let kkt = self.kkt_residual(&best.x);
        let status = if best.converged || kkt.is_some_and(|r| r < KKT_TOL) {
            SolverStatus::Converged
        } else {
            SolverStatus::Feasible
        };
        self.report(&best.x, status, diag)
    }

    fn report(&self, x: &[f64], status: SolverStatus, diag: SolverDiagnostics) -> Result<SolutionReport, TranscriptionError> {
        let (idle, window, p, sigma) = self.unpack(x);
        let shot = self.model.shoot(idle, window, &p, &sigma, false)?;
        let dv = DecisionVector { t_soi: shot.arrival.t_soi, idle, window, power: p.clone(), sigma: sigma.clone() };
        let residuals = evaluate_constraints(&self.model, &dv)?;
        let units = &self.scenario.units;
        let wp: f64 = self.weights.iter().zip(&p).map(|(w, p)| w * p).sum();
        let arc_days = units.tu_to_days(window);
        let (active, lead) = burn_spans(&p);
        let states = self.model.node_states(idle, window, &p, &sigma)?;
        let node_delta_deg = states
            .iter()
            .zip(&sigma)
            .map(|(y, s)| wrap_tau(s - y[1].atan2(y[2])).to_degrees())
            .collect();
        let feasible = residuals.is_feasible(1e-8);
        Ok(SolutionReport {
            regime: self.spec.regime,
            n_intervals: self.n(),
            start_time_tp: self.spec.start_time,
            t_soi: shot.arrival.t_soi,
            t_op: active * arc_days,
            idle_time: units.tu_to_days(idle) + lead * arc_days,
            window_days: units.tu_to_days(idle + window),
            energy: self.scenario.laser.power_max / 1e3 * arc_days * wp,
            delta_v_integral: self.model.a_max * units.accel_unit() * window * units.time_unit * wp,
            objective_value: self.model.a_max * window * wp,
            control: control_history(&self.model, &dv)?,
            decision: dv,
            node_delta_deg,
            constraint_residuals: residuals,
            b_required: shot.arrival.b_required,
            solver_status: if feasible { status } else { SolverStatus::Failed },
            diagnostics: diag,
        })
    }
}

/// Fractions of the arc spent above the idle threshold and before the first
/// crossing of it, for a piecewise-linear power profile.
fn burn_spans(p: &[f64]) -> (f64, f64) {
    let n = p.len() - 1;
    let h = 1.0 / n as f64;
    let thr = IDLE_THRESHOLD;
    let mut active = 0.0;
    let mut lead: Option<f64> = None;
    for k in 0..n {
        let (a, b) = (p[k], p[k + 1]);
        let frac = match (a >= thr, b >= thr) {
            (true, true) => 1.0,
            (false, false) => 0.0,
            (true, false) => (a - thr) / (a - b),
            (false, true) => (b - thr) / (b - a),
        };
        active += frac * h;
        if lead.is_none() {
            if a >= thr {
                lead = Some(k as f64 * h);
            } else if b >= thr {
                lead = Some((k as f64 + (thr - a) / (b - a)) * h);
            }
        }
    }
    (active, lead.unwrap_or(1.0))
}

/// Solutions of every regime at one start time.
#[derive(Debug, Clone)]
pub struct RegimeFamily {
    pub constant: Result<SolutionReport, TranscriptionError>,
    pub bounded: Vec<(BoundedProfile, Result<SolutionReport, TranscriptionError>)>,
    pub variable: Result<SolutionReport, TranscriptionError>,
}

fn with_regime(spec: &TranscriptionSpec, regime: Regime, start_time: f64) -> TranscriptionSpec {
    TranscriptionSpec { regime, start_time, ..*spec }
}

pub fn solve_constant_power(
    sc: &Scenario,
    start_time: f64,
    spec: &TranscriptionSpec,
) -> Result<SolutionReport, TranscriptionError> {
    Solver::new(sc, &with_regime(spec, Regime::ConstantPower, start_time))?.solve(&[])
}

pub fn solve_variable_power(
    sc: &Scenario,
    start_time: f64,
    spec: &TranscriptionSpec,
) -> Result<SolutionReport, TranscriptionError> {
    Solver::new(sc, &with_regime(spec, Regime::VariablePower, start_time))?.solve(&[])
}

pub fn solve_bounded(
    sc: &Scenario,
    start_time: f64,
    profile: BoundedProfile,
    spec: &TranscriptionSpec,
) -> Result<SolutionReport, TranscriptionError> {
    Solver::new(sc, &with_regime(spec, Regime::Bounded { profile }, start_time))?.solve(&[])
}

/// Constant, bounded and variable solves at one start time. Each regime is
/// seeded with the solutions of the more restricted ones, whose feasible sets
/// it contains.
pub fn solve_regime_family(
    sc: &Scenario,
    start_time: f64,
    profiles: &[BoundedProfile],
    spec: &TranscriptionSpec,
) -> RegimeFamily {
    let run = |regime: Regime, warm: &[&SolutionReport]| {
        Solver::new(sc, &with_regime(spec, regime, start_time)).and_then(|s| s.solve(warm))
    };
    let constant = run(Regime::ConstantPower, &[]);
    let mut bounded = Vec::new();
    for &profile in profiles {
        let warm: Vec<&SolutionReport> = constant.iter().collect();
        bounded.push((profile, run(Regime::Bounded { profile }, &warm)));
    }
    let mut warm: Vec<&SolutionReport> = constant.iter().collect();
    warm.extend(bounded.iter().filter_map(|(_, r)| r.as_ref().ok()));
    let variable = run(Regime::VariablePower, &warm);
    RegimeFamily { constant, bounded, variable }
}

/// Solves over a start-time grid, each point warm-started from the previous
/// feasible one. Failures are recorded and the sweep continues.
pub fn sweep_start_times(
    sc: &Scenario,
    grid: &[f64],
    spec: &TranscriptionSpec,
) -> Vec<(f64, Result<SolutionReport, TranscriptionError>)> {
    let mut out = Vec::with_capacity(grid.len());
    let mut prev: Option<SolutionReport> = None;
    for &ti in grid {
        let r = Solver::new(sc, &with_regime(spec, spec.regime, ti))
            .and_then(|s| s.solve(&prev.iter().collect::<Vec<_>>()));
        if let Ok(rep) = &r {
            prev = Some(rep.clone());
        }
        out.push((ti, r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burn_spans_of_simple_profiles() {
        assert_eq!(burn_spans(&[1.0, 1.0, 1.0]), (1.0, 0.0));
        let (a, lead) = burn_spans(&[0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!((lead - (0.25 + 0.25 * IDLE_THRESHOLD)).abs() < 1e-12);
        assert!((a - (0.5 * (1.0 - IDLE_THRESHOLD) + 0.25)).abs() < 1e-12);
        assert_eq!(burn_spans(&[0.0, 0.0]), (0.0, 1.0));
    }

    #[test]
    fn unwrap_removes_jumps() {
        let u = unwrap(&[3.0, -3.0, 3.1]);
        assert!((u[1] - (2.0 * PI - 3.0)).abs() < 1e-12);
        assert!((u[2] - 3.1).abs() < 1e-12);
    }
}
