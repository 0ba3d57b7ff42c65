//! Run orchestration: build the initial data, drive the requested solver and
//! emit the artifact CSVs into one output directory.
//!
//! Files written (subject to the `[output]` switches):
//!
//! * `trajectory.csv` — t, q_i, p_i, s_i, E (peakon and closed-form runs),
//! * `eulerian_<t>.csv` — x, u, rho_bar, rho_bar_x,
//! * `invariants.csv` — t, energy_drift, constraint_residual, r_drift,
//!   invariant_drift (the latter three are `nan` for ODE-only segments),
//! * `circle.csv` — t, u_peak, rho_bar_peak for antisymmetric runs,
//! * `events.csv` — collisions, hand-offs and solver aborts.

use std::fmt;
use std::path::Path;

use m2ch_core::closed_form::{classify, Regime};
use m2ch_core::diagnostics::run_grid;
use m2ch_core::dynamics::integrate;
use m2ch_core::lagrangian::init_from_peakons;
use m2ch_core::{GridSpec, IntegrateOpts, LagrangianGrid, PeakonState, RunOpts};

use crate::output::{eulerian_name, Csv};
use crate::scenario::{rescale_antisym, Initial, Kind, OutputOpts, Scenario};

#[derive(Debug)]
pub enum RunError {
    Io(std::io::Error),
    /// The solver gave up; the reason is also recorded in events.csv.
    Solver { reason: String },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(e) => write!(f, "i/o error: {e}"),
            Self::Solver { reason } => write!(f, "solver abort: {reason}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

/// Resolved initial data: a state at the (possibly rescaled) start time plus
/// the antisym bookkeeping needed for circle output.
struct Prepared {
    state: PeakonState,
    t0: f64,
    t1: f64,
    /// Antisym density amplitude after any rescaling.
    antisym_s: Option<f64>,
}

fn prepare(sc: &Scenario) -> Result<Prepared, RunError> {
    match &sc.initial {
        Initial::Peakons { q, p, s } => {
            let state = PeakonState::new(sc.t0, q.clone(), p.clone(), s.clone())
                .map_err(|e| RunError::Solver {
                    reason: e.to_string(),
                })?;
            Ok(Prepared {
                state,
                t0: sc.t0,
                t1: sc.t1,
                antisym_s: Some_if_antisym(q, p, s),
            })
        }
        Initial::Antisym { s, p0, q0, rescale } => {
            // Rescale first if the user's (p0, q0) miss the normalization:
            // the scaling symmetry maps times t to t/α.
            let (s_n, p0_n, alpha) = match (p0, q0) {
                (Some(p0v), Some(q0v)) if *rescale => rescale_antisym(*s, *p0v, *q0v),
                (Some(p0v), _) => (*s, *p0v, 1.0),
                _ => (*s, 0.0, 1.0),
            };
            let t0 = sc.t0 / alpha;
            let t1 = sc.t1 / alpha;
            let case = classify(s_n).map_err(|e| RunError::Solver {
                reason: e.to_string(),
            })?;
            let point = match (p0, q0) {
                (Some(_), Some(q0v)) => case.eval_general(p0_n, *q0v, 0.0),
                _ => Ok(case.eval_collision_centered(t0)),
            }
            .map_err(|e| RunError::Solver {
                reason: e.to_string(),
            })?;
            let state = case.peakon_state(&point).map_err(|e| RunError::Solver {
                reason: format!("cannot start at t0 = {t0}: {e}"),
            })?;
            Ok(Prepared {
                state,
                t0,
                t1,
                antisym_s: Some(s_n),
            })
        }
    }
}

/// Detect an antisymmetric two-peakon configuration given as explicit arrays.
#[allow(non_snake_case)]
fn Some_if_antisym(q: &[f64], p: &[f64], s: &[f64]) -> Option<f64> {
    if q.len() == 2
        && (q[0] + q[1]).abs() <= 1e-12
        && (p[0] + p[1]).abs() <= 1e-12
        && (s[0] + s[1]).abs() <= 1e-12
    {
        Some(s[0] - s[1])
    } else {
        None
    }
}

/// Execute a scenario, writing all artifacts into `dir`.
pub fn run(sc: &Scenario, dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)?;
    let mut events = Csv::new(dir, "events.csv", &["t", "kind", "detail"]);
    let result = match sc.kind {
        Kind::Peakons => run_peakons(sc, dir, &mut events),
        Kind::Lagrangian => run_lagrangian(sc, dir, &mut events),
        Kind::ClosedForm => run_closed_form(sc, dir, &mut events),
    };
    if let Err(RunError::Solver { reason }) = &result {
        events.row_text(&[f64::NAN], &["abort", reason]);
    }
    events.finish()?;
    result
}

fn x_grid(out: &OutputOpts) -> Vec<f64> {
    let dx = (out.x_max - out.x_min) / (out.nx - 1) as f64;
    (0..out.nx).map(|i| out.x_min + dx * i as f64).collect()
}

fn write_eulerian_from_state(
    state: &PeakonState,
    t_label: f64,
    dir: &Path,
    out: &OutputOpts,
) -> Result<(), RunError> {
    let mut csv = Csv::new(
        dir,
        &eulerian_name(t_label),
        &["x", "u", "rho_bar", "rho_bar_x"],
    );
    for x in x_grid(out) {
        let s = state.sample(x);
        csv.row(&[x, s.u, s.rho_bar, s.rho_bar_x]);
    }
    csv.finish()?;
    Ok(())
}

fn write_eulerian_from_grid(
    grid: &LagrangianGrid,
    t_label: f64,
    dir: &Path,
    out: &OutputOpts,
) -> Result<(), RunError> {
    let xs = x_grid(out);
    let f = grid.to_eulerian(&xs);
    let mut csv = Csv::new(
        dir,
        &eulerian_name(t_label),
        &["x", "u", "rho_bar", "rho_bar_x"],
    );
    for i in 0..xs.len() {
        csv.row(&[f.x[i], f.u[i], f.rho_bar[i], f.rho_bar_x[i]]);
    }
    csv.finish()?;
    Ok(())
}

fn run_peakons(sc: &Scenario, dir: &Path, events: &mut Csv) -> Result<(), RunError> {
    let prep = prepare(sc)?;
    let opts = IntegrateOpts {
        rel_tol: sc.solver.rel_tol,
        abs_tol: sc.solver.abs_tol,
        max_step: sc.solver.max_step,
        sample_dt: sc.solver.sample_dt,
    };
    let rec = integrate(&prep.state, prep.t1, &opts).map_err(|e| RunError::Solver {
        reason: e.to_string(),
    })?;

    let n = prep.state.n();
    if sc.output.trajectory {
        let mut header: Vec<String> = vec!["t".to_string()];
        for tag in ["q", "p", "s"] {
            for i in 1..=n {
                header.push(format!("{tag}_{i}"));
            }
        }
        header.push("E".to_string());
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = Csv::new(dir, "trajectory.csv", &header_refs);
        for (k, st) in rec.states.iter().enumerate() {
            let mut row = vec![rec.times[k]];
            row.extend_from_slice(&st.q);
            row.extend_from_slice(&st.p);
            row.extend_from_slice(&st.s);
            row.push(rec.energies[k]);
            csv.row(&row);
        }
        csv.finish()?;
    }

    let mut inv_csv = sc.output.invariants.then(|| {
        Csv::new(
            dir,
            "invariants.csv",
            &[
                "t",
                "energy_drift",
                "constraint_residual",
                "r_drift",
                "invariant_drift",
            ],
        )
    });
    if let Some(csv) = inv_csv.as_mut() {
        let e0 = rec.energies[0];
        for (k, &t) in rec.times.iter().enumerate() {
            let drift = ((rec.energies[k] - e0) / e0).abs();
            csv.row(&[t, drift, f64::NAN, f64::NAN, f64::NAN]);
        }
    }

    let mut circle_csv = (sc.output.circle && prep.antisym_s.is_some())
        .then(|| Csv::new(dir, "circle.csv", &["t", "u_peak", "rho_bar_peak"]));
    if let Some(csv) = circle_csv.as_mut() {
        for (k, st) in rec.states.iter().enumerate() {
            csv.row(&[rec.times[k], st.eval_u(st.q[0]), st.eval_rho_bar(st.q[0])]);
        }
    }

    // Emit snapshots reached by this segment; times beyond a collision are
    // left for the Lagrangian continuation below.
    let mut pending_eulerian: Vec<f64> = Vec::new();
    for &t in &sc.output.eulerian_times {
        let nearest = rec
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap());
        match nearest {
            Some((k, &tk)) if (tk - t).abs() <= sc.solver.sample_dt => {
                write_eulerian_from_state(&rec.states[k], t, dir, &sc.output)?;
            }
            _ => pending_eulerian.push(t),
        }
    }

    if let Some(ev) = &rec.event {
        events.row_text(
            &[ev.time],
            &["collision", &format!("peaks {} and {}", ev.pair + 1, ev.pair + 2)],
        );
        if sc.solver.continue_lagrangian {
            let t_hand = ev.time - sc.solver.handoff_gap.copysign(prep.t1 - prep.t0);
            let hand = integrate(&prep.state, t_hand, &opts).map_err(|e| RunError::Solver {
                reason: e.to_string(),
            })?;
            let hand_state = hand.states.last().unwrap();
            events.row_text(
                &[hand_state.t],
                &["handoff", "continued in Lagrangian variables"],
            );
            let grid = build_grid(hand_state, sc, prep.antisym_s.is_some())?;
            let ropts = RunOpts {
                dt: sc.solver.dt,
                sample_stride: sc.solver.sample_stride,
                snapshot_times: pending_eulerian.clone(),
                tracked_nodes: peak_label_nodes(&grid, hand_state),
                ..RunOpts::default()
            };
            let lrec = run_grid(&grid, prep.t1, &ropts).map_err(|e| RunError::Solver {
                reason: e.to_string(),
            })?;
            if let Some(csv) = inv_csv.as_mut() {
                let h0 = lrec.h_last[0];
                for (k, &t) in lrec.times.iter().enumerate() {
                    csv.row(&[
                        t,
                        ((lrec.h_last[k] - h0) / h0).abs(),
                        lrec.constraint[k],
                        lrec.r_drift[k],
                        lrec.invariant_drift[k],
                    ]);
                }
            }
            if let Some(csv) = circle_csv.as_mut() {
                if !lrec.tracked_u.is_empty() {
                    for (k, &t) in lrec.times.iter().enumerate() {
                        csv.row(&[t, lrec.tracked_u[0][k], lrec.tracked_rbar[0][k]]);
                    }
                }
            }
            for snap in &lrec.snapshots {
                let label = sc
                    .output
                    .eulerian_times
                    .iter()
                    .copied()
                    .min_by(|a, b| (a - snap.t).abs().partial_cmp(&(b - snap.t).abs()).unwrap())
                    .unwrap_or(snap.t);
                write_eulerian_from_grid(snap, label, dir, &sc.output)?;
            }
        }
    }

    if let Some(csv) = inv_csv {
        csv.finish()?;
    }
    if let Some(csv) = circle_csv {
        csv.finish()?;
    }
    Ok(())
}

fn build_grid(
    state: &PeakonState,
    sc: &Scenario,
    antisym: bool,
) -> Result<LagrangianGrid, RunError> {
    let spec = if antisym && state.n() == 2 && state.q[0] < 0.0 {
        GridSpec::aligned_symmetric_pair(-state.q[0], sc.solver.xi_max, sc.solver.n)
    } else {
        Ok(GridSpec {
            xi_min: sc.solver.xi_min,
            xi_max: sc.solver.xi_max,
            n: sc.solver.n,
        })
    }
    .map_err(|e| RunError::Solver {
        reason: e.to_string(),
    })?;
    init_from_peakons(state, &spec).map_err(|e| RunError::Solver {
        reason: e.to_string(),
    })
}

/// Grid nodes sitting on the peak labels (peaks ride characteristics, so
/// these track the peak values for all time).
fn peak_label_nodes(grid: &LagrangianGrid, state: &PeakonState) -> Vec<usize> {
    state
        .q
        .iter()
        .filter_map(|&qi| {
            let pos = (qi - grid.xi_min) / grid.dxi;
            let node = pos.round();
            (node >= 0.0 && (node as usize) < grid.n()).then_some(node as usize)
        })
        .collect()
}

fn run_lagrangian(sc: &Scenario, dir: &Path, events: &mut Csv) -> Result<(), RunError> {
    let prep = prepare(sc)?;
    let grid = build_grid(&prep.state, sc, prep.antisym_s.is_some())?;
    let ropts = RunOpts {
        dt: sc.solver.dt,
        sample_stride: sc.solver.sample_stride,
        snapshot_times: sc.output.eulerian_times.clone(),
        tracked_nodes: peak_label_nodes(&grid, &prep.state),
        ..RunOpts::default()
    };
    let rec = run_grid(&grid, prep.t1, &ropts).map_err(|e| RunError::Solver {
        reason: e.to_string(),
    })?;

    if sc.output.invariants {
        let mut csv = Csv::new(
            dir,
            "invariants.csv",
            &[
                "t",
                "energy_drift",
                "constraint_residual",
                "r_drift",
                "invariant_drift",
            ],
        );
        let h0 = rec.h_last[0];
        for (k, &t) in rec.times.iter().enumerate() {
            csv.row(&[
                t,
                ((rec.h_last[k] - h0) / h0).abs(),
                rec.constraint[k],
                rec.r_drift[k],
                rec.invariant_drift[k],
            ]);
        }
        csv.finish()?;
    }

    if sc.output.circle && prep.antisym_s.is_some() && !rec.tracked_u.is_empty() {
        let mut csv = Csv::new(dir, "circle.csv", &["t", "u_peak", "rho_bar_peak"]);
        for (k, &t) in rec.times.iter().enumerate() {
            csv.row(&[t, rec.tracked_u[0][k], rec.tracked_rbar[0][k]]);
        }
        csv.finish()?;
    }

    for snap in &rec.snapshots {
        let label = sc
            .output
            .eulerian_times
            .iter()
            .copied()
            .min_by(|a, b| (a - snap.t).abs().partial_cmp(&(b - snap.t).abs()).unwrap())
            .unwrap_or(snap.t);
        write_eulerian_from_grid(snap, label, dir, &sc.output)?;
    }

    let _ = events;
    Ok(())
}

fn run_closed_form(sc: &Scenario, dir: &Path, events: &mut Csv) -> Result<(), RunError> {
    let Initial::Antisym { s, p0, q0, rescale } = &sc.initial else {
        unreachable!("validated by parse_scenario");
    };
    let (s_n, p0_n, alpha) = match (p0, q0) {
        (Some(p0v), Some(q0v)) if *rescale => rescale_antisym(*s, *p0v, *q0v),
        (Some(p0v), _) => (*s, *p0v, 1.0),
        _ => (*s, 0.0, 1.0),
    };
    let t0 = sc.t0 / alpha;
    let t1 = sc.t1 / alpha;
    let case = classify(s_n).map_err(|e| RunError::Solver {
        reason: e.to_string(),
    })?;

    let eval = |t: f64| match (p0, q0) {
        (Some(_), Some(q0v)) => case.eval_general(p0_n, *q0v, t - t0),
        _ => Ok(case.eval_collision_centered(t)),
    };

    let steps = ((t1 - t0) / sc.solver.dt).round().max(1.0) as usize;
    let dt = (t1 - t0) / steps as f64;

    let mut traj = sc.output.trajectory.then(|| {
        Csv::new(
            dir,
            "trajectory.csv",
            &["t", "q_1", "q_2", "p_1", "p_2", "s_1", "s_2", "E"],
        )
    });
    let mut circle = sc
        .output
        .circle
        .then(|| Csv::new(dir, "circle.csv", &["t", "u_peak", "rho_bar_peak"]));

    for k in 0..=steps {
        let t = t0 + dt * k as f64;
        let pt = eval(t).map_err(|e| RunError::Solver {
            reason: e.to_string(),
        })?;
        if let Some(csv) = circle.as_mut() {
            if pt.u_peak.is_finite() && pt.rho_bar_peak.is_finite() {
                csv.row(&[t, pt.u_peak, pt.rho_bar_peak]);
            }
        }
        if let Some(csv) = traj.as_mut() {
            if !pt.p_is_infinite() {
                if let Ok(st) = case.peakon_state(&pt) {
                    csv.row(&[
                        t,
                        st.q[0],
                        st.q[1],
                        st.p[0],
                        st.p[1],
                        st.s[0],
                        st.s[1],
                        st.total_energy(),
                    ]);
                }
            }
        }
    }
    if let Some(csv) = traj {
        csv.finish()?;
    }
    if let Some(csv) = circle {
        csv.finish()?;
    }

    // Collision times inside the window (collision-centered convention:
    // t = 0, repeating with the period in the supercritical regime).
    let mut collisions: Vec<f64> = Vec::new();
    if matches!((p0, q0), (None, None)) {
        match case.regime {
            Regime::Supercritical => {
                let period = case.period().expect("supercritical case is periodic");
                let mut k = (t0 / period).ceil();
                while k * period <= t1 {
                    collisions.push(k * period);
                    k += 1.0;
                }
            }
            _ => {
                if t0 <= 0.0 && 0.0 <= t1 {
                    collisions.push(0.0);
                }
            }
        }
    }
    for t in collisions {
        events.row_text(&[t], &["collision", "closed-form collision"]);
    }
    Ok(())
}
