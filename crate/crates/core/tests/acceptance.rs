//! Acceptance criteria, one line per criterion.
//!
//! Runs without the libtest harness so that the report is always printed.
//! Criteria listed in `KNOWN_GAPS` are reported as FAIL and do not abort the
//! run; any other failure exits nonzero.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ecodeflect::dynamics::{propagate, specific_energy, ControlHistory, ControlSample, PropagationParams};
use ecodeflect::elements::{
    cartesian_from_spherical, ecliptic_to_local, elements_to_cartesian, kepler_state_at, spherical_from_cartesian,
    CartesianState, OrbitElements,
};
use ecodeflect::ephemeris::{CircularEarth, EarthEphemeris};
use ecodeflect::flyby::{flyby_map, impact_parameter, planar_hyperbola_state, soi_geometry};
use ecodeflect::impulsive::{solve_min_impulse, Encounter, ImpulseOptions};
use ecodeflect::lunar::{sweep_moon_anomaly, LunarSweepConfig};
use ecodeflect::ode::{integrate_adaptive, AdaptiveOptions, StepControl, Tolerances};
use ecodeflect::report::{run, Command, RegimeChoice, RunManifest};
use ecodeflect::roots::brent;
use ecodeflect::scenario::{bennu_like_scenario, default_scenario, Scenario};
use ecodeflect::transcription::{
    solve_constant_power, solve_regime_family, solve_variable_power, standard_profiles, sweep_start_times, Regime,
    SolutionReport, SolverStatus, TranscriptionSpec, IDLE_THRESHOLD,
};

/// Criteria that do not hold with the shipped defaults.
const KNOWN_GAPS: &[u32] = &[7, 10, 11];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn spec(regime: Regime, ti: f64) -> TranscriptionSpec {
    TranscriptionSpec::new(regime, ti)
}

fn spherical(el: &OrbitElements) -> ecodeflect::elements::SphericalState {
    spherical_from_cartesian(&elements_to_cartesian(el, 1.0).unwrap(), 1.0).unwrap()
}

fn c1() -> Outcome {
    let t = Instant::now();
    let el = OrbitElements::planar(1.2, 0.6, 0.0, 0.0, 0.0);
    let earth = CircularEarth::new(1.0, 0.0, 1.0);
    let p = PropagationParams::new(1.0, 1e-3);
    let res = propagate(&spherical(&el), &ControlHistory::zero(), (0.0, 5.0 * el.period(1.0)), false, &earth, &p).unwrap();
    let worst = res
        .trajectory
        .iter()
        .map(|s| {
            let c = cartesian_from_spherical(s).unwrap();
            (c.position - kepler_state_at(&el, s.epoch, 1.0).unwrap().position).norm()
        })
        .fold(0.0, f64::max);
    let dt = t.elapsed().as_secs_f64();
    outcome(worst < 1e-7 && dt < 1.0, format!("max position error {worst:.2e} LU over 5 periods (< 1e-7), {dt:.3} s (< 1 s)"))
}

fn c2() -> Outcome {
    let el = OrbitElements::planar(1.2, 0.6, 0.0, 0.7, 0.0);
    let earth = CircularEarth::new(1.0, 0.0, 1.0);
    let mut p = PropagationParams::new(1.0, 1e-3);
    p.tol = Tolerances::new(1e-12, 1e-14);
    let s0 = spherical(&el);
    let res = propagate(&s0, &ControlHistory::zero(), (0.0, 10.0 * el.period(1.0)), false, &earth, &p).unwrap();
    let e0 = specific_energy(&s0, 1.0);
    let h = |s: &ecodeflect::elements::SphericalState| s.r * (s.v * s.v + s.w * s.w).sqrt();
    let h0 = h(&s0);
    let (mut de, mut dh) = (0.0f64, 0.0f64);
    for s in &res.trajectory {
        de = de.max(((specific_energy(s, 1.0) - e0) / e0).abs());
        dh = dh.max(((h(s) - h0) / h0).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ortho = 0.0f64;
    for _ in 0..1000 {
        let r = ecliptic_to_local(rng.random_range(-7.0..7.0), rng.random_range(-1.5..1.5));
        ortho = ortho.max((r * r.transpose() - nalgebra::Matrix3::identity()).abs().max());
    }

    // Work of the thrust from an independent Cartesian integration against
    // the energy change of the library propagation.
    let nodes: Vec<_> = (0..=40)
        .map(|k| {
            let t = k as f64 * 0.05;
            ControlSample { accel_mag: 2e-3 * (1.0 + 0.5 * (3.0 * t).sin()), sigma: 0.8 * t - 1.0, beta: 0.0, node_time: t }
        })
        .collect();
    let ctrl = ControlHistory::new(nodes).unwrap();
    let lib = propagate(&s0, &ctrl, (0.0, 2.0), false, &earth, &p).unwrap();
    let de_lib = specific_energy(lib.final_state(), 1.0) - e0;
    let c0 = elements_to_cartesian(&el, 1.0).unwrap();
    let y0 = [c0.position.x, c0.position.y, c0.velocity.x, c0.velocity.y, 0.0];
    let rhs = |t: f64, y: &[f64; 5]| {
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let (rx, ry) = (y[0] / r, y[1] / r);
        let c = ctrl.eval(t);
        let (s, co) = c.sigma.sin_cos();
        let ax = c.accel_mag * (s * rx - co * ry);
        let ay = c.accel_mag * (s * ry + co * rx);
        [y[2], y[3], -rx / (r * r) + ax, -ry / (r * r) + ay, ax * y[2] + ay * y[3]]
    };
    let opts = AdaptiveOptions { tol: Tolerances::new(1e-12, 1e-14), ..Default::default() };
    let w = integrate_adaptive(rhs, 0.0, y0, 2.0, &opts, |_| StepControl::Continue).unwrap().y[4];
    let work = ((de_lib - w) / w).abs();

    outcome(
        de < 1e-9 && dh < 1e-9 && ortho < 1e-14 && work < 1e-6,
        format!("energy {de:.1e}, momentum {dh:.1e} (< 1e-9); rotation {ortho:.1e} (< 1e-14); work identity {work:.1e} (< 1e-6)"),
    )
}

/// Perigee of an Earth-relative state from direct two-body integration.
fn integrated_perigee(s: &CartesianState, mu: f64) -> f64 {
    let rhs = |_t: f64, y: &[f64; 6]| {
        let r3 = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).powf(1.5);
        [y[3], y[4], y[5], -mu * y[0] / r3, -mu * y[1] / r3, -mu * y[2] / r3]
    };
    let y0 = [s.position.x, s.position.y, s.position.z, s.velocity.x, s.velocity.y, s.velocity.z];
    let rdot = |y: &[f64; 6]| y[0] * y[3] + y[1] * y[4] + y[2] * y[5];
    let t_max = 4.0 * s.position.norm() / s.velocity.norm();
    let opts = AdaptiveOptions { tol: Tolerances::new(1e-13, 1e-16), ..Default::default() };
    let mut rp = f64::NAN;
    integrate_adaptive(rhs, 0.0, y0, t_max, &opts, |st| {
        if rdot(&st.y0) < 0.0 && rdot(&st.y1) >= 0.0 {
            let t = brent(|t| rdot(&st.eval(t)), st.t0, st.t1, 1e-15, 200).unwrap();
            let y = st.eval(t);
            rp = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            StepControl::Stop
        } else {
            StepControl::Continue
        }
    })
    .unwrap();
    rp
}

fn c3() -> Outcome {
    let t = Instant::now();
    let sc = default_scenario();
    let mu = sc.mu_earth();
    let re = sc.units.earth_radius_lu();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut e_bi, mut e_map) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let v_inf = rng.random_range(0.05..1.0);
        let miss = rng.random_range(1.0..50.0) * re;
        let b = impact_parameter(miss, v_inf, mu).unwrap();
        let entry =
            planar_hyperbola_state(v_inf, b, mu, sc.soi_radius, rng.random_range(0.0..6.3), rng.random_bool(0.5), 0.0)
                .unwrap();
        let rp = integrated_perigee(&entry, mu);
        e_bi = e_bi.max((rp - miss).abs());
        e_map = e_map.max((rp - flyby_map(&entry, mu, &sc.earth).unwrap().perigee_distance).abs());
    }
    let dt = t.elapsed().as_secs_f64();
    outcome(
        e_bi < 1e-6 && e_map < 1e-6 && dt < 10.0,
        format!("100 entries: impact parameter {e_bi:.1e} LU, flyby map {e_map:.1e} LU (< 1e-6), {dt:.2} s (< 10 s)"),
    )
}

type Families = BTreeMap<u64, Vec<(Regime, Result<SolutionReport, String>)>>;

fn key(ti: f64) -> u64 {
    (ti * 1000.0).round() as u64
}

fn families(sc: &Scenario, tis: &[f64]) -> (Families, f64) {
    let t = Instant::now();
    let profiles = standard_profiles();
    let mut out = Families::new();
    for &ti in tis {
        let f = solve_regime_family(sc, ti, &profiles, &spec(Regime::ConstantPower, ti));
        let mut v = vec![(Regime::ConstantPower, f.constant.map_err(|e| e.to_string()))];
        for (profile, r) in f.bounded {
            v.push((Regime::Bounded { profile }, r.map_err(|e| e.to_string())));
        }
        v.push((Regime::VariablePower, f.variable.map_err(|e| e.to_string())));
        out.insert(key(ti), v);
    }
    (out, t.elapsed().as_secs_f64())
}

fn c4(sc: &Scenario, fam: &Families) -> Outcome {
    // Feasible but unconverged solutions are re-simulated too and reported
    // separately; only converged ones decide the criterion.
    let (mut worst_conv, mut worst_feas) = (0.0f64, 0.0f64);
    let (mut n_conv, mut n_feas) = (0, 0);
    let mut bad = Vec::new();
    for (k, v) in fam {
        let ti = *k as f64 / 1000.0;
        for (regime, r) in v {
            let Ok(r) = r else { continue };
            let converged = r.solver_status == SolverStatus::Converged;
            let s0 = sc.initial_state(ti).unwrap();
            let mut p = PropagationParams::new(sc.mu_sun(), sc.soi_radius);
            p.tol = Tolerances::new(1e-12, 1e-15);
            let res = propagate(&s0, &r.control, (s0.epoch, sc.impact_epoch + 0.5), true, &sc.earth, &p).unwrap();
            let Some(ev) = res.soi_event else {
                if converged {
                    bad.push(format!("{ti} {} no entry", regime.label()));
                }
                continue;
            };
            let c = cartesian_from_spherical(&ev.state).unwrap();
            let g = soi_geometry(&sc.earth.state_at(ev.t_soi), &c, sc.soi_radius, sc.miss_distance, sc.mu_earth()).unwrap();
            let err = (g.b - g.b_required).abs();
            if converged {
                n_conv += 1;
                worst_conv = worst_conv.max(err);
                if !(ev.ell_dot < 0.0) || err >= 1e-6 {
                    bad.push(format!("{ti} {}", regime.label()));
                }
            } else {
                n_feas += 1;
                worst_feas = worst_feas.max(err);
            }
        }
    }
    outcome(
        bad.is_empty() && n_conv > 0,
        format!(
            "{n_conv} converged solutions re-simulated: max |b - b_i| {worst_conv:.1e} LU (< 1e-6), l_dot < 0, failures {bad:?}; \
             {n_feas} feasible-only solutions: max {worst_feas:.1e} LU"
        ),
    )
}

fn c5(sc: &Scenario, fam: &Families) -> Outcome {
    let p_kw = sc.laser.power_max / 1e3;
    let mut worst = 0.0f64;
    for v in fam.values() {
        if let Ok(r) = &v[0].1 {
            worst = worst.max(((r.energy - p_kw * r.t_op) / (p_kw * r.t_op)).abs());
        }
    }
    outcome(worst < 1e-3, format!("max |E - P t_op|/(P t_op) {worst:.1e} over constant solutions (< 1e-3)"))
}

fn energy(r: &Result<SolutionReport, String>) -> f64 {
    r.as_ref().map_or(f64::NAN, |s| s.energy)
}

fn c6(fam: &Families, dt: f64) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, v) in fam {
        let ec = energy(&v[0].1);
        let ev = energy(&v.last().unwrap().1);
        let mut worst = f64::INFINITY;
        for (_, r) in &v[1..v.len() - 1] {
            let eb = energy(r);
            let m1 = (eb - ev) / eb;
            let m2 = (ec - eb) / ec;
            worst = worst.min(m1.min(m2));
        }
        ok &= worst >= -5e-3;
        lines.push(format!("{}: {:.2}%", *k as f64 / 1000.0, 100.0 * worst));
    }
    let pass = ok && dt < 1800.0;
    outcome(pass, format!("smallest margin per t_i [{}] (>= -0.5%), {dt:.0} s (< 1800 s)", lines.join(", ")))
}

fn c7(sc: &Scenario) -> Outcome {
    let grid: Vec<f64> = (0..=50).map(|k| (90.0 + 2.0 * k as f64) / 100.0).collect();
    let sweep = sweep_start_times(sc, &grid, &spec(Regime::ConstantPower, 0.9));
    let t: Vec<f64> = sweep.iter().map(|(_, r)| r.as_ref().map_or(f64::NAN, |s| s.t_op)).collect();
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for k in 1..t.len() - 1 {
        if t[k] > t[k - 1] && t[k] > t[k + 1] {
            maxima.push(grid[k]);
        }
        if t[k] < t[k - 1] && t[k] < t[k + 1] {
            minima.push(grid[k]);
        }
    }
    let step = 0.02 + 1e-9;
    let max_ok = maxima.iter().any(|&x| x > 1.2 && x < 1.5 && (x - 1.34).abs() <= step);
    let min_ok = minima.iter().any(|&x| x > 1.8 && x < 1.95 && (x - 1.88).abs() <= step);
    outcome(
        max_ok && min_ok,
        format!("local maxima {maxima:?} (want one within 0.02 of 1.34), minima {minima:?} (want one within 0.02 of 1.88)"),
    )
}

fn c8(sc: &Scenario, fam: &Families) -> Outcome {
    let extra = solve_variable_power(sc, 1.5, &spec(Regime::VariablePower, 1.5)).map_err(|e| e.to_string());
    let var = |ti: f64| -> Result<SolutionReport, String> {
        if ti == 1.5 {
            return extra.clone();
        }
        fam[&key(ti)].last().unwrap().1.clone()
    };
    let base = energy(&var(0.9));
    let mut ok = base.is_finite();
    let mut parts = Vec::new();
    for ti in [1.0, 1.2, 1.34, 1.5, 1.7] {
        let r = var(ti);
        let e = energy(&r);
        let idle = r.as_ref().map_or(f64::NAN, |s| s.idle_time);
        let d = (e - base) / base;
        ok &= d.abs() < 0.01 && idle > 0.0;
        parts.push(format!("{ti}: {:+.3}% idle {idle:.1} d", 100.0 * d));
    }
    outcome(ok, format!("variable energy vs t_i=0.9 ({base:.1} kW day): {}", parts.join(", ")))
}

fn c9(fam: &Families) -> Outcome {
    let Ok(r) = &fam[&key(0.9)][0].1 else {
        return outcome(false, "constant solve at 0.9 failed".into());
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (node, d) in r.control.nodes().iter().zip(&r.node_delta_deg) {
        if node.accel_mag > IDLE_THRESHOLD * r.control.nodes().iter().map(|n| n.accel_mag).fold(0.0, f64::max) {
            lo = lo.min(*d);
            hi = hi.max(*d);
        }
    }
    outcome(lo >= 150.0 && hi <= 210.0, format!("delta over active nodes in [{lo:.2}, {hi:.2}] deg (within [150, 210])"))
}

fn c10() -> Outcome {
    let t = Instant::now();
    let sc = bennu_like_scenario();
    let (a, b) = match solve_min_impulse(&sc, 1.0, &ImpulseOptions::default()) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("solve failed: {e}")),
    };
    let dv = (a.delta_v_mag - b.delta_v_mag).abs() / a.delta_v_mag;
    let sep = (b.lambda - a.lambda).abs();
    let a0 = sc.eco_elements.a;
    let gain = a.post_flyby_elements.a > a0 && b.post_flyby_elements.a < a0;
    let ratio = match (a.next_encounter, b.next_encounter) {
        (Encounter::At { interval_tp: ia, .. }, Encounter::At { interval_tp: ib, .. }) => ia / ib,
        _ => f64::NAN,
    };
    let dt = t.elapsed().as_secs_f64();
    outcome(
        dv < 5e-3 && (sep - 180.0).abs() <= 1.0 && gain && ratio >= 3.0 && dt < 300.0,
        format!(
            "dv {:.3}/{:.3} cm/s ({:.2}% < 0.5%), lambda {:.3}/{:.3} deg, a {a0} -> {:.4}/{:.4}, next encounter {:?} vs {:?} (ratio >= 3), {dt:.1} s",
            a.delta_v_mag,
            b.delta_v_mag,
            100.0 * dv,
            a.lambda,
            b.lambda,
            a.post_flyby_elements.a,
            b.post_flyby_elements.a,
            a.next_encounter,
            b.next_encounter
        ),
    )
}

fn c11() -> Outcome {
    let t = Instant::now();
    let cfg = LunarSweepConfig::from_scenario(&default_scenario(), 10.0).unwrap();
    let sweep = sweep_moon_anomaly(&cfg).unwrap();
    let control = sweep_moon_anomaly(&LunarSweepConfig { mu_moon: 0.0, ..cfg }).unwrap();
    let zero = control.rows.iter().map(|r| r.rel_error.abs()).fold(0.0, f64::max);
    let m = sweep.max_abs_rel_error;
    let adj = sweep.extreme_separation();
    let dt = t.elapsed().as_secs_f64();
    outcome(
        (0.01..=0.06).contains(&m) && zero < 1e-7 && adj <= 3.0 && dt < 300.0,
        format!(
            "max |rel error| {:.3}% (in [1%, 6%]), Moon-free {zero:.1e}, extremes at {} and {} deg ({adj} deg apart, <= 3), {dt:.2} s",
            100.0 * m,
            sweep.f_max_reduction,
            sweep.f_max_gain
        ),
    )
}

fn c12(sc: &Scenario) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    let cases: [(Regime, f64); 3] =
        [(Regime::ConstantPower, 0.9), (Regime::ConstantPower, 1.34), (Regime::VariablePower, 0.9)];
    for (regime, ti) in cases {
        let solve = |n: usize| {
            let s = TranscriptionSpec { n_intervals: n, ..spec(regime, ti) };
            match regime {
                Regime::VariablePower => solve_variable_power(sc, ti, &s),
                _ => solve_constant_power(sc, ti, &s),
            }
        };
        let (a, b) = (solve(60), solve(120));
        let d = match (&a, &b) {
            (Ok(a), Ok(b)) => (b.objective_value - a.objective_value).abs() / a.objective_value,
            _ => f64::NAN,
        };
        ok &= d < 5e-3;
        parts.push(format!("{} {ti}: {:.3}%", regime.label(), 100.0 * d));
    }
    outcome(ok, format!("objective change N 60 -> 120: {} (< 0.5%)", parts.join(", ")))
}

fn c13() -> Outcome {
    let sc = default_scenario();
    let once = || {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new(Command::Solve, dir.path());
        m.regime = RegimeChoice::All;
        m.start_times = vec![1.0];
        m.nodes = 20;
        m.seed = 11;
        run(&m, &sc).unwrap();
        let mut files = BTreeMap::new();
        for p in ["results.csv", "results.json", "plotdata/acceleration.csv", "plotdata/operational_angle.csv"] {
            files.insert(p, std::fs::read(dir.path().join(p)).unwrap());
        }
        files
    };
    let (a, b) = (once(), once());
    let same = a == b;
    outcome(same, format!("{} output files compared byte for byte across two runs", a.len()))
}

fn main() {
    let sc = default_scenario();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "propagation oracle", c1()));
    results.push((2, "conservation suite", c2()));
    results.push((3, "flyby geometry oracle", c3()));
    let (fam, fam_dt) = families(&sc, &[0.9, 1.0, 1.2, 1.34, 1.7]);
    results.push((4, "terminal feasibility", c4(&sc, &fam)));
    results.push((5, "energy self-consistency", c5(&sc, &fam)));
    results.push((6, "regime dominance", c6(&fam, fam_dt)));
    results.push((7, "perihelion structure", c7(&sc)));
    results.push((8, "variable-power plateau", c8(&sc, &fam)));
    results.push((9, "operational-angle band", c9(&fam)));
    results.push((10, "impulsive two-solution structure", c10()));
    results.push((11, "lunar sweep", c11()));
    results.push((12, "mesh convergence", c12(&sc)));
    results.push((13, "determinism", c13()));

    let mut unexpected = Vec::new();
    for (id, name, o) in &results {
        println!("C{id:<2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass && !KNOWN_GAPS.contains(id) {
            unexpected.push(*id);
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("{passed}/{} criteria pass; known gaps {KNOWN_GAPS:?}", results.len());
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
