//! Augmented-Lagrangian solver for a smooth objective with one equality
//! constraint and box bounds. The inner minimizer is a projected L-BFGS.

use std::collections::VecDeque;

/// Objective value and gradient.
pub type ObjectiveFn<'a> = dyn Fn(&[f64]) -> (f64, Vec<f64>) + 'a;
/// Constraint value with optional gradient; `None` marks a failed evaluation.
pub type ConstraintFn<'a> = dyn Fn(&[f64], bool) -> Option<(f64, Option<Vec<f64>>)> + 'a;

pub struct BoxProblem<'a> {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: &'a ObjectiveFn<'a>,
    pub constraint: &'a ConstraintFn<'a>,
}

#[derive(Debug, Clone, Copy)]
pub struct AlOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Feasibility tolerance on the scaled constraint.
    pub tol_c: f64,
    /// Projected-gradient tolerance of the inner problem.
    pub tol_grad: f64,
    pub mu0: f64,
    pub memory: usize,
    /// Largest first step in the scaled variables.
    pub max_step: f64,
}

impl Default for AlOptions {
    fn default() -> Self {
        Self { max_outer: 12, max_inner: 150, tol_c: 1e-8, tol_grad: 1e-7, mu0: 10.0, memory: 12, max_step: 0.2 }
    }
}

#[derive(Debug, Clone)]
pub struct AlResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub c: f64,
    pub lambda: f64,
    pub mu: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Merit<'p, 'a> {
    prob: &'p BoxProblem<'a>,
    lambda: f64,
    mu: f64,
    evals: usize,
}

impl Merit<'_, '_> {
    /// Merit value, gradient and constraint value.
    fn eval(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>, f64)> {
        self.evals += 1;
        let (f, mut g) = (self.prob.objective)(x);
        let (c, gc) = (self.prob.constraint)(x, true)?;
        let gc = gc?;
        if !c.is_finite() {
            return None;
        }
        let w = -self.lambda + self.mu * c;
        for (gi, ci) in g.iter_mut().zip(&gc) {
            *gi += w * ci;
        }
        Some((f - self.lambda * c + 0.5 * self.mu * c * c, g, c))
    }

    fn value(&mut self, x: &[f64]) -> Option<(f64, f64)> {
        self.evals += 1;
        let (f, _) = (self.prob.objective)(x);
        let (c, _) = (self.prob.constraint)(x, false)?;
        c.is_finite().then(|| (f - self.lambda * c + 0.5 * self.mu * c * c, c))
    }
}

fn projected_gradient(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let at_lo = x[i] <= lo[i] && g[i] > 0.0;
            let at_hi = x[i] >= hi[i] && g[i] < 0.0;
            if at_lo || at_hi {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

/// Minimizes the merit over the box; returns the number of iterations and
/// whether the projected-gradient tolerance was reached.
fn inner(merit: &mut Merit, x: &mut Vec<f64>, opts: &AlOptions, tol: f64) -> (usize, bool) {
    let (lo, hi) = (merit.prob.lower.clone(), merit.prob.upper.clone());
    let Some((mut fx, mut g, _)) = merit.eval(x) else {
        return (0, false);
    };
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    for it in 0..opts.max_inner {
        let pg = projected_gradient(x, &g, &lo, &hi);
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm < tol {
            return (it, true);
        }
        // Two-loop recursion on the free variables.
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = q.iter().zip(&pg).map(|(v, p)| if *p == 0.0 { 0.0 } else { -v }).collect();
        if dot(&d, &pg) >= -1e-12 * dot(&pg, &pg).sqrt() * dot(&d, &d).sqrt() || mem.is_empty() {
            d = pg.iter().map(|v| -v).collect();
            if mem.is_empty() {
                let dn = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let scale = (opts.max_step / dn).min(1.0);
                d.iter_mut().for_each(|v| *v *= scale);
            }
            mem.clear();
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            project(&mut xn, &lo, &hi);
            let step: Vec<f64> = xn.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            if decrease >= 0.0 && step.iter().all(|v| *v == 0.0) {
                break;
            }
            if let Some((fnew, _)) = merit.value(&xn) {
                if fnew <= fx + 1e-4 * decrease.min(0.0) && decrease < 0.0 {
                    accepted = Some(xn);
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some(xn) = accepted else {
            if mem.is_empty() {
                return (it, false);
            }
            mem.clear();
            continue;
        };
        let Some((fn_, gn, _)) = merit.eval(&xn) else {
            return (it, false);
        };
        let s: Vec<f64> = xn.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - fn_).abs() / fx.abs().max(1.0);
        *x = xn;
        fx = fn_;
        g = gn;
        if rel < 1e-15 {
            return (it + 1, false);
        }
    }
    (opts.max_inner, false)
}

/// Runs the augmented-Lagrangian loop from `x0`.
pub fn solve_al(prob: &BoxProblem, x0: &[f64], opts: &AlOptions) -> AlResult {
    let mut x = x0.to_vec();
    project(&mut x, &prob.lower, &prob.upper);
    let mut merit = Merit { prob, lambda: 0.0, mu: opts.mu0, evals: 0 };
    let mut c_prev = f64::INFINITY;
    let mut inner_total = 0;
    let mut converged = false;
    let mut outer = 0;
    let mut c = f64::NAN;
    while outer < opts.max_outer {
        outer += 1;
        let tol = (opts.tol_grad * 10f64.powi((opts.max_outer - outer).min(3) as i32)).max(opts.tol_grad);
        let (its, ok) = inner(&mut merit, &mut x, opts, tol);
        inner_total += its;
        c = match (prob.constraint)(&x, false) {
            Some((c, _)) => c,
            None => break,
        };
        if c.abs() < opts.tol_c && ok && tol <= opts.tol_grad * 1.0001 {
            converged = true;
            break;
        }
        merit.lambda -= merit.mu * c;
        if c.abs() > opts.tol_c && c.abs() > 0.25 * c_prev.abs() {
            merit.mu = (merit.mu * 10.0).min(1e10);
        }
        c_prev = c;
    }
    let f = (prob.objective)(&x).0;
    AlResult {
        x,
        f,
        c,
        lambda: merit.lambda,
        mu: merit.mu,
        outer_iterations: outer,
        inner_iterations: inner_total,
        evaluations: merit.evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_constrained_linear_objective() {
        // min x + y  s.t. x² + y² = 1 → (−1/√2, −1/√2).
        let obj = |x: &[f64]| (x[0] + x[1], vec![1.0, 1.0]);
        let con = |x: &[f64], _g: bool| Some((x[0] * x[0] + x[1] * x[1] - 1.0, Some(vec![2.0 * x[0], 2.0 * x[1]])));
        let prob = BoxProblem { lower: vec![-2.0; 2], upper: vec![2.0; 2], objective: &obj, constraint: &con };
        let r = solve_al(&prob, &[0.5, -0.1], &AlOptions { max_outer: 20, ..Default::default() });
        let s = -std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.x[0] - s).abs() < 1e-6 && (r.x[1] - s).abs() < 1e-6, "{r:?}");
        assert!(r.c.abs() < 1e-8);
    }

    #[test]
    fn active_bound_is_respected() {
        // min (x−3)² + y²  s.t. x − y = 0, x ≤ 1 → (1, 1).
        let obj = |x: &[f64]| ((x[0] - 3.0).powi(2) + x[1] * x[1], vec![2.0 * (x[0] - 3.0), 2.0 * x[1]]);
        let con = |x: &[f64], _g: bool| Some((x[0] - x[1], Some(vec![1.0, -1.0])));
        let prob = BoxProblem { lower: vec![-5.0, -5.0], upper: vec![1.0, 5.0], objective: &obj, constraint: &con };
        let r = solve_al(&prob, &[0.0, 0.0], &AlOptions { max_outer: 20, ..Default::default() });
        assert!((r.x[0] - 1.0).abs() < 1e-7 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }
}
