//! Trajectory integration and empirical property checking.
//!
//! This is the independent oracle for synthesised certificates: classical
//! fixed-step RK4 integration of the closed-loop dynamics, plus per-property
//! avoid / arrive / remain counters over batches of trajectories. A verified
//! certificate whose property fails empirically indicates a bug somewhere in
//! the pipeline, so the CEGIS acceptance tests treat any violation as fatal.

use crate::certificate::{PropertyKind, PropertyProblem};
use crate::expr::{Expr, VectorField};
use crate::geometry::{self, Region};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulateError {
    #[error("time step and horizon must satisfy 0 < dt <= T")]
    BadTimeGrid,
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

/// A fixed-step trajectory. `blew_up` marks truncation after the state norm
/// exceeded 10^6 or became non-finite.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub dt: f64,
    pub horizon: f64,
    pub blew_up: bool,
}

const BLOWUP_NORM: f64 = 1e6;

/// Classical fourth-order Runge-Kutta with fixed step `dt` up to horizon
/// `t_end`. The field must be closed-loop.
pub fn integrate(
    f: &VectorField,
    x0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<Trajectory, SimulateError> {
    if dt <= 0.0 || t_end < dt {
        return Err(SimulateError::BadTimeGrid);
    }
    let steps = (t_end / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    times.push(0.0);
    states.push(x.clone());
    let mut blew_up = false;

    let eval = |x: &[f64]| -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(x.len());
        for c in &f.components {
            match c.eval(x) {
                Ok(v) if v.is_finite() => out.push(v),
                _ => return None,
            }
        }
        Some(out)
    };

    let probe = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, ki)| b + h * ki).collect()
    };
    for step in 1..=steps {
        let stage = (|| {
            let k1 = eval(&x)?;
            let k2 = eval(&probe(&x, &k1, dt / 2.0))?;
            let k3 = eval(&probe(&x, &k2, dt / 2.0))?;
            let k4 = eval(&probe(&x, &k3, dt))?;
            Some((k1, k2, k3, k4))
        })();
        let Some((k1, k2, k3, k4)) = stage else {
            blew_up = true;
            break;
        };
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > BLOWUP_NORM {
            blew_up = true;
            break;
        }
        times.push(step as f64 * dt);
        states.push(x.clone());
    }
    Ok(Trajectory {
        times,
        states,
        dt,
        horizon: t_end,
        blew_up,
    })
}

/// Empirical avoid / arrive / remain counters over a trajectory batch.
#[derive(Debug, Clone, Default)]
pub struct EmpiricalVerdict {
    pub n_trajectories: usize,
    pub n_avoid_violations: usize,
    pub n_arrive_successes: usize,
    pub n_remain_violations: usize,
    pub n_blowups: usize,
    pub first_avoid_witness: Option<Vec<f64>>,
    pub first_remain_witness: Option<Vec<f64>>,
}

impl EmpiricalVerdict {
    /// True when every applicable component of the property held for every
    /// trajectory.
    pub fn clean(&self, arrive_applicable: bool) -> bool {
        self.n_avoid_violations == 0
            && self.n_remain_violations == 0
            && self.n_blowups == 0
            && (!arrive_applicable || self.n_arrive_successes == self.n_trajectories)
    }
}

/// Certificate levels needed to evaluate the arrive/remain semantics of the
/// stateful kinds: the RSWA permanence trigger is the verified sub-level set
/// `{V ≤ β} ∩ X_F`.
#[derive(Debug, Clone, Default)]
pub struct PropertyLevels {
    pub v: Option<Expr>,
    pub beta: Option<f64>,
}

/// Simulate `n_init` trajectories from the initial set and count property
/// violations.
///
/// Per kind: *avoid* means never entering X_U (Safety/SWA, whole horizon)
/// or never leaving X_S before goal arrival (RWA/RSWA/RAR); *arrive* means
/// entering the goal region (X_G, the RSWA trigger set, or a small ball
/// around the origin for stability kinds) before the horizon; *remain*
/// means staying inside X_F after arrival (RSWA: after the last entry into
/// the trigger set).
#[allow(clippy::too_many_arguments)]
pub fn check_property(
    problem: &PropertyProblem,
    f_closed: &VectorField,
    levels: &PropertyLevels,
    n_init: usize,
    dt: f64,
    t_end: f64,
    arrive_radius: f64,
    rng: &mut ChaCha8Rng,
) -> Result<EmpiricalVerdict, SimulateError> {
    let init_region = initial_region(problem);
    let starts = geometry::sample_interior(&init_region, n_init, rng)?.points;
    let mut verdict = EmpiricalVerdict {
        n_trajectories: starts.len(),
        ..EmpiricalVerdict::default()
    };

    for x0 in &starts {
        let traj = integrate(f_closed, x0, dt, t_end)?;
        if traj.blew_up {
            verdict.n_blowups += 1;
            continue;
        }
        let arrived_at = arrival_index(problem, levels, &traj, arrive_radius);
        if arrived_at.is_some() {
            verdict.n_arrive_successes += 1;
        }

        // avoid component
        let avoid_until = match problem.kind {
            PropertyKind::Safety | PropertyKind::Swa | PropertyKind::Stability
            | PropertyKind::Roa => traj.states.len(),
            // reach kinds promise safety only until goal arrival
            PropertyKind::Rwa | PropertyKind::Rswa | PropertyKind::Rar => {
                arrived_at.map_or(traj.states.len(), |i| i + 1)
            }
        };
        let violation = traj.states[..avoid_until].iter().find(|s| {
            match problem.kind {
                PropertyKind::Safety | PropertyKind::Swa => problem
                    .unsafe_set
                    .as_ref()
                    .map(|u| u.contains_unchecked(s))
                    .unwrap_or(false),
                PropertyKind::Rwa | PropertyKind::Rswa | PropertyKind::Rar => problem
                    .safe_set
                    .as_ref()
                    .map(|safe| !safe.contains_unchecked(s))
                    .unwrap_or(false),
                _ => false,
            }
        });
        if let Some(w) = violation {
            verdict.n_avoid_violations += 1;
            verdict
                .first_avoid_witness
                .get_or_insert_with(|| w.clone());
        }

        // remain component (RSWA after the LAST trigger entry, RAR after the
        // first goal entry)
        let remain_from = match problem.kind {
            PropertyKind::Rar => arrived_at,
            PropertyKind::Rswa => last_trigger_entry(problem, levels, &traj),
            _ => None,
        };
        if let (Some(from), Some(final_set)) = (remain_from, problem.final_set.as_ref()) {
            if let Some(w) = traj.states[from..]
                .iter()
                .find(|s| !final_set.contains_unchecked(s))
            {
                verdict.n_remain_violations += 1;
                verdict
                    .first_remain_witness
                    .get_or_insert_with(|| w.clone());
            }
        }
    }
    Ok(verdict)
}

/// The set initial states are drawn from: X_I when declared, otherwise the
/// whole domain (plain stability has no a-priori initial set).
fn initial_region(problem: &PropertyProblem) -> Region {
    problem
        .init
        .clone()
        .unwrap_or_else(|| problem.domain.clone())
}

fn arrival_index(
    problem: &PropertyProblem,
    levels: &PropertyLevels,
    traj: &Trajectory,
    arrive_radius: f64,
) -> Option<usize> {
    match problem.kind {
        PropertyKind::Stability | PropertyKind::Roa | PropertyKind::Swa => {
            traj.states.iter().position(|s| {
                s.iter().map(|v| v * v).sum::<f64>().sqrt() <= arrive_radius
            })
        }
        PropertyKind::Rwa | PropertyKind::Rar => {
            let goal = problem.goal.as_ref()?;
            traj.states.iter().position(|s| goal.contains_unchecked(s))
        }
        PropertyKind::Rswa => {
            let idx = trigger_entries(problem, levels, traj);
            idx.first().copied()
        }
        PropertyKind::Safety => None,
    }
}

/// Indices where the trajectory is inside the RSWA trigger set
/// `X_F ∩ {V ≤ β}`.
fn trigger_entries(
    problem: &PropertyProblem,
    levels: &PropertyLevels,
    traj: &Trajectory,
) -> Vec<usize> {
    let Some(final_set) = problem.final_set.as_ref() else {
        return Vec::new();
    };
    let inside = |s: &Vec<f64>| -> bool {
        if !final_set.contains_unchecked(s) {
            return false;
        }
        match (&levels.v, levels.beta) {
            (Some(v), Some(beta)) => v.eval(s).map(|val| val <= beta).unwrap_or(false),
            _ => true,
        }
    };
    traj.states
        .iter()
        .enumerate()
        .filter(|(_, s)| inside(s))
        .map(|(i, _)| i)
        .collect()
}

fn last_trigger_entry(
    problem: &PropertyProblem,
    levels: &PropertyLevels,
    traj: &Trajectory,
) -> Option<usize> {
    let entries = trigger_entries(problem, levels, traj);
    // first index of the final contiguous run: permanence is judged from
    // the last time the trajectory (re-)enters the trigger set
    let mut from = *entries.last()?;
    for w in entries.windows(2).rev() {
        if w[1] == w[0] + 1 {
            from = w[0];
        } else {
            break;
        }
    }
    Some(from)
}

/// Write a trajectory as CSV (`t, x_0..x_{n-1}`).
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dim = traj.states.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for i in 0..dim {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (t, s) in traj.times.iter().zip(&traj.states) {
        out.push_str(&format!("{t}"));
        for v in s {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Grid CSV of a scalar expression over a 2-D slice (`x0, x1, value`), for
/// contour plotting.
pub fn contour_csv(expr: &Expr, lb: &[f64; 2], ub: &[f64; 2], n: usize) -> String {
    let mut out = String::from("x0,x1,value\n");
    for i in 0..n {
        for j in 0..n {
            let x = lb[0] + (ub[0] - lb[0]) * i as f64 / (n - 1) as f64;
            let y = lb[1] + (ub[1] - lb[1]) * j as f64 / (n - 1) as f64;
            let v = expr.eval(&[x, y]).unwrap_or(f64::NAN);
            out.push_str(&format!("{x},{y},{v}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use rand::SeedableRng;

    fn field(fx: &[&str], n: usize) -> VectorField {
        VectorField::new(n, 0, fx.iter().map(|s| parse(s, n, 0).unwrap()).collect()).unwrap()
    }

    #[test]
    fn exponential_decay_matches_analytic_solution() {
        let f = field(&["-x0"], 1);
        let traj = integrate(&f, &[1.0], 1e-3, 5.0).unwrap();
        let end = traj.states.last().unwrap()[0];
        assert!((end - (-5.0_f64).exp()).abs() < 1e-6, "x(5) = {end}");
        assert!(!traj.blew_up);
        assert_eq!(traj.times.len(), traj.states.len());
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let f = field(&["x1", "-x0"], 2);
        let traj = integrate(&f, &[1.0, 0.0], 1e-3, 10.0).unwrap();
        let energy =
            |s: &[f64]| -> f64 { 0.5 * (s[0] * s[0] + s[1] * s[1]) };
        let e0 = energy(&traj.states[0]);
        for s in &traj.states {
            assert!((energy(s) - e0).abs() / e0 <= 1e-6, "energy drifted");
        }
    }

    #[test]
    fn rk4_shows_fourth_order_convergence() {
        // halving dt reduces the endpoint error by ~16x on the exponential
        let f = field(&["-x0"], 1);
        let exact = (-1.0_f64).exp();
        let err = |dt: f64| -> f64 {
            let traj = integrate(&f, &[1.0], dt, 1.0).unwrap();
            (traj.states.last().unwrap()[0] - exact).abs()
        };
        let e1 = err(0.1);
        let e2 = err(0.05);
        let ratio = e1 / e2;
        assert!(
            (ratio - 16.0).abs() / 16.0 <= 0.2,
            "convergence ratio {ratio}, expected about 16"
        );
    }

    #[test]
    fn blowup_is_flagged_not_panicked() {
        let f = field(&["x0^2 + 1"], 1);
        let traj = integrate(&f, &[1.0], 1e-3, 10.0).unwrap();
        assert!(traj.blew_up);
        assert!(traj.states.len() < 10_001);
    }

    fn stability_problem(domain: Region) -> PropertyProblem {
        PropertyProblem {
            kind: PropertyKind::Stability,
            dynamics: field(&["-x0", "-x1"], 2),
            domain,
            init: None,
            unsafe_set: None,
            safe_set: None,
            goal: None,
            final_set: None,
            gamma: 0.1,
            epsilon_origin: 0.01,
            delta: 1e-4,
            has_controller: false,
        }
    }

    #[test]
    fn linear_contraction_arrives_from_everywhere() {
        let p = stability_problem(Region::torus(vec![0.0, 0.0], 0.01, 1.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let verdict = check_property(
            &p,
            &p.dynamics.clone(),
            &PropertyLevels::default(),
            100,
            1e-3,
            20.0,
            0.05,
            &mut rng,
        )
        .unwrap();
        assert_eq!(verdict.n_trajectories, 100);
        assert_eq!(verdict.n_arrive_successes, 100);
        assert!(verdict.clean(true));
    }

    #[test]
    fn unsafe_steering_is_detected() {
        // flow pushes x0 up into the unsafe box
        let p = PropertyProblem {
            kind: PropertyKind::Safety,
            dynamics: field(&["1", "0"], 2),
            domain: Region::rectangle(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap(),
            init: Some(Region::rectangle(vec![-1.0, -0.5], vec![-0.5, 0.5]).unwrap()),
            unsafe_set: Some(Region::rectangle(vec![0.5, -1.0], vec![1.0, 1.0]).unwrap()),
            safe_set: None,
            goal: None,
            final_set: None,
            gamma: 0.1,
            epsilon_origin: 0.01,
            delta: 1e-4,
            has_controller: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let verdict = check_property(
            &p,
            &p.dynamics.clone(),
            &PropertyLevels::default(),
            20,
            1e-2,
            5.0,
            0.05,
            &mut rng,
        )
        .unwrap();
        assert!(verdict.n_avoid_violations >= 1);
        assert!(verdict.first_avoid_witness.is_some());
    }

    #[test]
    fn rwa_dismisses_post_arrival_excursions() {
        // flow crosses the goal box and then leaves the safe set; RWA only
        // promises safety until arrival
        let p = PropertyProblem {
            kind: PropertyKind::Rwa,
            dynamics: field(&["1", "0"], 2),
            domain: Region::rectangle(vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap(),
            init: Some(Region::rectangle(vec![-1.0, -0.1], vec![-0.8, 0.1]).unwrap()),
            unsafe_set: None,
            safe_set: Some(Region::rectangle(vec![-1.5, -1.5], vec![1.5, 1.5]).unwrap()),
            goal: Some(Region::rectangle(vec![-0.1, -1.0], vec![0.1, 1.0]).unwrap()),
            final_set: None,
            gamma: 0.1,
            epsilon_origin: 0.01,
            delta: 1e-4,
            has_controller: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let verdict = check_property(
            &p,
            &p.dynamics.clone(),
            &PropertyLevels::default(),
            20,
            1e-2,
            10.0,
            0.05,
            &mut rng,
        )
        .unwrap();
        assert_eq!(verdict.n_arrive_successes, 20);
        assert_eq!(verdict.n_avoid_violations, 0);
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let f = field(&["-x0"], 1);
        let traj = integrate(&f, &[1.0], 0.5, 1.0).unwrap();
        let csv = trajectory_csv(&traj);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x0");
        assert_eq!(lines.len(), traj.states.len() + 1);
    }
}
