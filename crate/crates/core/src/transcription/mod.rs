//! Direct-shooting transcription of the minimum-energy deflection problem.
//!
//! Decision variables are the window length and, at N+1 nodes spread evenly
//! over the window, the power fraction and the in-plane thrust angle. The SOI
//! entry time is not a free variable: it is located on the coast arc that
//! follows the window, which satisfies the entry-distance condition exactly.

mod nlp;
mod shooting;
mod solve;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlHistory, ControlSample, DynamicsError};
use crate::elements::ElementsError;
use crate::scenario::ScenarioError;

pub use nlp::{solve_al, AlOptions, AlResult, BoxProblem};
pub use shooting::{Arrival, PlanarState, Shot, ShootingModel, ShotGradient, WINDOW_GUARD};
pub use solve::{
    solve_bounded, solve_constant_power, solve_regime_family, solve_variable_power, sweep_start_times, RegimeFamily,
    Solver,
};

/// Power fractions below this are reported as idle.
pub const IDLE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TranscriptionError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid transcription: {0}")]
    BadSpec(String),
    #[error("trajectory does not enter the sphere of influence")]
    NoCrossing,
    #[error("non-finite state during shooting")]
    NonFinite,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Elements(#[from] ElementsError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Lower bound on the power fraction over the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundedProfile {
    ConstantFraction { fraction: f64 },
    LinearRamp { start: f64, end: f64 },
}

impl BoundedProfile {
    pub fn validate(&self) -> Result<(), TranscriptionError> {
        let ok = |f: f64| (0.0..=1.0).contains(&f);
        let good = match *self {
            BoundedProfile::ConstantFraction { fraction } => ok(fraction),
            BoundedProfile::LinearRamp { start, end } => ok(start) && ok(end),
        };
        if good {
            Ok(())
        } else {
            Err(TranscriptionError::BadSpec(format!("profile fractions must lie in [0, 1]: {self:?}")))
        }
    }

    /// Lower bound at normalized window time `s` ∈ [0, 1].
    pub fn lower(&self, s: f64) -> f64 {
        match *self {
            BoundedProfile::ConstantFraction { fraction } => fraction,
            BoundedProfile::LinearRamp { start, end } => start + (end - start) * s,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            BoundedProfile::ConstantFraction { fraction } => format!("const:{fraction}"),
            BoundedProfile::LinearRamp { start, end } => format!("ramp:{start}:{end}"),
        }
    }
}

impl std::str::FromStr for BoundedProfile {
    type Err = TranscriptionError;

    /// Parses `const:<f>` or `ramp:<start>:<end>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TranscriptionError::BadSpec(format!("profile must be const:<f> or ramp:<a>:<b>, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let p = match parts.as_slice() {
            ["const", f] => BoundedProfile::ConstantFraction { fraction: num(f)? },
            ["ramp", a, b] => BoundedProfile::LinearRamp { start: num(a)?, end: num(b)? },
            _ => return Err(bad()),
        };
        p.validate()?;
        Ok(p)
    }
}

/// Cases A, B and C of the bounded-power study.
pub fn standard_profiles() -> [BoundedProfile; 3] {
    [
        BoundedProfile::ConstantFraction { fraction: 0.3 },
        BoundedProfile::LinearRamp { start: 0.0, end: 0.9 },
        BoundedProfile::LinearRamp { start: 0.9, end: 0.0 },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    ConstantPower,
    VariablePower,
    Bounded { profile: BoundedProfile },
}

impl Regime {
    pub fn label(&self) -> String {
        match self {
            Regime::ConstantPower => "constant".into(),
            Regime::VariablePower => "variable".into(),
            Regime::Bounded { profile } => format!("bounded:{}", profile.label()),
        }
    }

    /// Per-node lower bounds on the power fraction.
    pub fn lower_bounds(&self, n_intervals: usize) -> Vec<f64> {
        (0..=n_intervals)
            .map(|k| match self {
                Regime::ConstantPower => 1.0,
                Regime::VariablePower => 0.0,
                Regime::Bounded { profile } => profile.lower(k as f64 / n_intervals as f64),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranscriptionSpec {
    pub n_intervals: usize,
    pub regime: Regime,
    /// Lead time t_i in object periods.
    pub start_time: f64,
    /// Integration step target inside the window, TU.
    pub step_target: f64,
    /// Seed for the jitter applied to the later multi-start guesses.
    pub seed: u64,
    pub multi_start: usize,
}

impl TranscriptionSpec {
    pub fn new(regime: Regime, start_time: f64) -> Self {
        Self { n_intervals: 60, regime, start_time, step_target: 4e-3, seed: 0, multi_start: 8 }
    }

    pub fn validate(&self) -> Result<(), TranscriptionError> {
        if self.n_intervals < 2 {
            return Err(TranscriptionError::BadSpec(format!("N must be at least 2, got {}", self.n_intervals)));
        }
        if !(self.start_time > 0.0) {
            return Err(TranscriptionError::BadSpec(format!("start time must be positive, got {}", self.start_time)));
        }
        if !(self.step_target > 0.0) {
            return Err(TranscriptionError::BadSpec("step target must be positive".into()));
        }
        if let Regime::Bounded { profile } = self.regime {
            profile.validate()?;
        }
        Ok(())
    }
}

/// Decision values in physical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub t_soi: f64,
    /// Coast before the first control node, TU.
    pub idle: f64,
    /// Length of the noded thrust arc, TU.
    pub window: f64,
    /// Power fraction at each node.
    pub power: Vec<f64>,
    /// In-plane thrust angle at each node, rad.
    pub sigma: Vec<f64>,
}

/// Terminal conditions evaluated for a decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    /// ℓ_soi − ℓ at the supplied entry time, LU.
    pub ell_residual: f64,
    /// b − b_i, LU.
    pub b_residual: f64,
    /// ℓ̇ at entry (must be negative), SU.
    pub ell_dot: f64,
    /// Window length (must be positive), TU.
    pub window_slack: f64,
    /// Entry time minus window end (must be positive), TU.
    pub soi_slack: f64,
}

impl ConstraintResiduals {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.ell_residual.abs() < tol
            && self.b_residual.abs() < tol
            && self.ell_dot < 0.0
            && self.window_slack > 0.0
            && self.soi_slack > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    /// Feasible, optimality tolerance not reached within the budget.
    Feasible,
    Failed,
}

impl SolverStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::Feasible => "feasible",
            SolverStatus::Failed => "failed",
        }
    }

    pub fn is_feasible(&self) -> bool {
        !matches!(self, SolverStatus::Failed)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub seeds_tried: usize,
    pub seeds_feasible: usize,
    pub best_seed: String,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub regime: Regime,
    pub n_intervals: usize,
    pub start_time_tp: f64,
    pub t_soi: f64,
    /// Active burn time (power above the idle threshold), days.
    pub t_op: f64,
    /// Leading span below the idle threshold, days.
    pub idle_time: f64,
    /// Span from the start time to the last control node, days.
    pub window_days: f64,
    /// Laser energy, kW·day.
    pub energy: f64,
    /// ∫|a| dt at the initial mass, m/s.
    pub delta_v_integral: f64,
    /// ∫|a| dt in canonical units (the transcribed objective).
    pub objective_value: f64,
    pub control: ControlHistory,
    pub decision: DecisionVector,
    /// Operational angle δ = σ − γ at each node, degrees in [0, 360).
    pub node_delta_deg: Vec<f64>,
    pub constraint_residuals: ConstraintResiduals,
    pub b_required: f64,
    pub solver_status: SolverStatus,
    pub diagnostics: SolverDiagnostics,
}

/// Trapezoid weights of the N+1 nodes on the unit window.
pub fn trapezoid_weights(n_intervals: usize) -> Vec<f64> {
    let h = 1.0 / n_intervals as f64;
    (0..=n_intervals).map(|k| if k == 0 || k == n_intervals { 0.5 * h } else { h }).collect()
}

/// Trapezoidal ∫|a| dt over the control nodes.
pub fn objective(ctrl: &ControlHistory) -> f64 {
    ctrl.accel_integral()
}

/// Builds the control history for a decision vector.
pub fn control_history(model: &ShootingModel, dv: &DecisionVector) -> Result<ControlHistory, TranscriptionError> {
    let n = dv.power.len() - 1;
    let nodes = (0..=n)
        .map(|k| ControlSample {
            accel_mag: model.a_max * dv.power[k],
            sigma: dv.sigma[k],
            beta: 0.0,
            node_time: model.t0 + dv.idle + dv.window * k as f64 / n as f64,
        })
        .collect();
    Ok(ControlHistory::new(nodes)?)
}

/// Shoots the trajectory for `dv` and evaluates the terminal conditions.
pub fn evaluate_constraints(model: &ShootingModel, dv: &DecisionVector) -> Result<ConstraintResiduals, TranscriptionError> {
    let shot = model.shoot(dv.idle, dv.window, &dv.power, &dv.sigma, false)?;
    let a = &shot.arrival;
    // Distance at the requested entry time on the same coast arc.
    let ell_at = if dv.t_soi.is_finite() && (dv.t_soi - a.t_soi).abs() > 0.0 {
        let y = shot.final_state;
        let tf = model.t0 + dv.idle + dv.window;
        let c = crate::elements::CartesianState::new(
            nalgebra::Vector3::new(y[0] * y[3].cos(), y[0] * y[3].sin(), 0.0),
            nalgebra::Vector3::new(y[1] * y[3].cos() - y[2] * y[3].sin(), y[1] * y[3].sin() + y[2] * y[3].cos(), 0.0),
            tf,
        );
        let el = crate::elements::cartesian_to_elements(&c, model.mu)?;
        let s = crate::elements::kepler_state_at(&el, dv.t_soi, model.mu)?;
        use crate::ephemeris::EarthEphemeris;
        (s.position - model.earth.state_at(dv.t_soi).position).norm()
    } else {
        a.ell
    };
    Ok(ConstraintResiduals {
        ell_residual: model.soi_radius - ell_at,
        b_residual: a.b - a.b_required,
        ell_dot: a.ell_dot,
        window_slack: dv.window,
        soi_slack: dv.t_soi - (model.t0 + dv.idle + dv.window),
    })
}
