//! Time integration of the multipeakon ODE system with collision detection.
//!
//! The system is
//!
//!   qᵢ' = Σⱼ pⱼ e^{−|qᵢ−qⱼ|},
//!   pᵢ' = Σⱼ≠ᵢ (pᵢpⱼ + sᵢsⱼ) sign(qᵢ−qⱼ) e^{−|qᵢ−qⱼ|},
//!   sᵢ' = 0.
//!
//! It is smooth as long as the peaks stay ordered.  When two peaks collide
//! (qᵢ = qᵢ₊₁, wave breaking) the momenta blow up, so integration stops at the
//! collision with the event time estimated from the closing gap.  The gap
//! between a colliding pair closes quadratically, g(t) ≈ c(t*−t)², so once the
//! gap falls below a small threshold the collision time follows from
//! t* = t − 2g/g' with error O((t*−t)³).
//!
//! The integrator is an embedded Dormand–Prince 5(4) pair with PI step-size
//! control, usable in both time directions.

use thiserror::Error;

use crate::peakon::{signum0, PeakonError, PeakonState};
use crate::real::Real;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    State(#[from] PeakonError),
    #[error("step size underflow at t = {t} without a closing gap")]
    StepUnderflow { t: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
    #[error("initial energy is zero; relative drift is undefined")]
    ZeroEnergy,
    #[error("invalid tolerance or step options")]
    BadOptions,
}

/// Right-hand side of the multipeakon system. `ds` is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakonDeriv<F> {
    pub dq: Vec<F>,
    pub dp: Vec<F>,
    pub ds: Vec<F>,
}

/// Terminal event: the gap between peaks `pair` and `pair + 1` closed at
/// (estimated) time `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent<F> {
    pub pair: usize,
    pub time: F,
}

/// Sampled trajectory with per-sample energies and an optional terminal event.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord<F> {
    pub times: Vec<F>,
    pub states: Vec<PeakonState<F>>,
    pub energies: Vec<F>,
    pub event: Option<CollisionEvent<F>>,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOpts<F> {
    pub rel_tol: F,
    pub abs_tol: F,
    pub max_step: F,
    pub sample_dt: F,
}

impl<F: Real> Default for IntegrateOpts<F> {
    fn default() -> Self {
        Self {
            rel_tol: F::of(1e-10),
            abs_tol: F::of(1e-12),
            max_step: F::of(0.1),
            sample_dt: F::of(0.05),
        }
    }
}

/// Gap below which a pair is declared colliding.
fn gap_threshold<F: Real>() -> F {
    F::of(1e-9)
}

/// Evaluate the multipeakon right-hand side.  Rejects non-increasing peak
/// positions: a disordered state means a collision was stepped over.
pub fn rhs<F: Real>(state: &PeakonState<F>) -> Result<PeakonDeriv<F>, DynamicsError> {
    for i in 1..state.n() {
        if !(state.q[i] > state.q[i - 1]) {
            return Err(PeakonError::UnorderedPositions { index: i }.into());
        }
    }
    let (dq, dp) = rhs_raw(&state.q, &state.p, &state.s);
    Ok(PeakonDeriv {
        dq,
        dp,
        ds: vec![F::zero(); state.n()],
    })
}

fn rhs_raw<F: Real>(q: &[F], p: &[F], s: &[F]) -> (Vec<F>, Vec<F>) {
    let n = q.len();
    let mut dq = vec![F::zero(); n];
    let mut dp = vec![F::zero(); n];
    for i in 0..n {
        for j in 0..n {
            let k = (-(q[i] - q[j]).abs()).exp();
            dq[i] += p[j] * k;
            if j != i {
                dp[i] += (p[i] * p[j] + s[i] * s[j]) * signum0(q[i] - q[j]) * k;
            }
        }
    }
    (dq, dp)
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    0.025,
];

struct Flat<F> {
    n: usize,
    /// [q..., p...]
    y: Vec<F>,
    s: Vec<F>,
}

impl<F: Real> Flat<F> {
    fn from_state(st: &PeakonState<F>) -> Self {
        let mut y = st.q.clone();
        y.extend_from_slice(&st.p);
        Self {
            n: st.n(),
            y,
            s: st.s.clone(),
        }
    }

    fn deriv(&self, y: &[F]) -> Option<Vec<F>> {
        let q = &y[..self.n];
        for i in 1..self.n {
            if !(q[i] > q[i - 1]) {
                return None;
            }
        }
        let (dq, dp) = rhs_raw(q, &y[self.n..], &self.s);
        let mut d = dq;
        d.extend_from_slice(&dp);
        Some(d)
    }

    fn min_gap(&self, y: &[F]) -> Option<(usize, F)> {
        let q = &y[..self.n];
        let mut best: Option<(usize, F)> = None;
        for i in 1..self.n {
            let g = q[i] - q[i - 1];
            if best.is_none_or(|(_, b)| g < b) {
                best = Some((i - 1, g));
            }
        }
        best
    }
}

/// Collision-time estimate from a quadratically closing gap: t* = t − 2g/g'.
fn quadratic_event_time<F: Real>(t: F, g: F, gdot: F) -> F {
    if gdot == F::zero() {
        t
    } else {
        t - F::two() * g / gdot
    }
}

/// Integrate from `state.t` to `t_end` (either direction).  Stops early at a
/// collision, recording the event.  The trajectory is sampled every
/// `opts.sample_dt` plus the final accepted state.
pub fn integrate<F: Real>(
    state: &PeakonState<F>,
    t_end: F,
    opts: &IntegrateOpts<F>,
) -> Result<TrajectoryRecord<F>, DynamicsError> {
    if !(opts.rel_tol > F::zero() && opts.abs_tol > F::zero())
        || !(opts.max_step > F::zero())
        || !(opts.sample_dt > F::zero())
    {
        return Err(DynamicsError::BadOptions);
    }
    // Validate ordering up front.
    rhs(state)?;

    let t0 = state.t;
    let mut record = TrajectoryRecord {
        times: vec![t0],
        states: vec![state.clone()],
        energies: vec![state.total_energy()],
        event: None,
    };
    if t_end == t0 || state.n() == 0 {
        return Ok(record);
    }

    let dir = if t_end > t0 { F::one() } else { -F::one() };
    let flat = Flat::from_state(state);
    let mut t = t0;
    let mut y = flat.y.clone();
    let mut f = flat.deriv(&y).expect("ordered initial state");

    // Initial step size: limited by the rhs magnitude, max_step and sample_dt.
    let ynorm = y.iter().fold(F::zero(), |a, &v| a.max(v.abs()));
    let fnorm = f.iter().fold(F::zero(), |a, &v| a.max(v.abs()));
    let mut h = if fnorm > F::zero() {
        (F::of(0.01) * (ynorm + F::one()) / fnorm).min(opts.max_step)
    } else {
        opts.max_step
    }
    .min(opts.sample_dt)
        * dir;

    let mut next_sample = t0 + opts.sample_dt * dir;
    let mut err_prev = F::one();
    let order_scale = F::of(1.0 / 5.0);
    let push_sample = |t: F, y: &[F], rec: &mut TrajectoryRecord<F>| -> Result<(), DynamicsError> {
        let st = PeakonState::new(
            t,
            y[..flat.n].to_vec(),
            y[flat.n..].to_vec(),
            flat.s.clone(),
        )?;
        rec.energies.push(st.total_energy());
        rec.times.push(t);
        rec.states.push(st);
        Ok(())
    };

    loop {
        // Clamp to the next sample time and to t_end.
        let mut hit_sample = false;
        let mut hit_end = false;
        if (t + h - next_sample) * dir >= F::zero() && (next_sample - t_end) * dir < F::zero() {
            h = next_sample - t;
            hit_sample = true;
        }
        if (t + h - t_end) * dir >= F::zero() {
            h = t_end - t;
            hit_sample = false;
            hit_end = true;
        }

        // One Dormand-Prince trial step.
        let mut ks: Vec<Vec<F>> = Vec::with_capacity(7);
        ks.push(f.clone());
        let mut stage_failed = false;
        #[allow(clippy::needless_range_loop)] // `stage` mirrors the tableau row index
        for stage in 1..7 {
            let mut ys = y.clone();
            for (j, k) in ks.iter().enumerate() {
                let a = F::of(DP_A[stage][j]);
                if a != F::zero() {
                    for (yi, ki) in ys.iter_mut().zip(k) {
                        *yi += h * a * *ki;
                    }
                }
            }
            let _ = DP_C; // stage times are not needed (autonomous system)
            match flat.deriv(&ys) {
                Some(k) => ks.push(k),
                None => {
                    stage_failed = true;
                    break;
                }
            }
        }

        let mut accept = false;
        let mut y_new = Vec::new();
        let mut err = F::infinity();
        if !stage_failed {
            y_new = y.clone();
            let mut y_low = y.clone();
            for (j, k) in ks.iter().enumerate() {
                let b5 = F::of(DP_B5[j]);
                let b4 = F::of(DP_B4[j]);
                for i in 0..y.len() {
                    y_new[i] += h * b5 * k[i];
                    y_low[i] += h * b4 * k[i];
                }
            }
            if y_new.iter().all(|v| v.is_finite()) {
                let mut acc = F::zero();
                for i in 0..y.len() {
                    let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
                    let e = (y_new[i] - y_low[i]) / sc;
                    acc += e * e;
                }
                err = (acc / F::of(y.len() as f64)).sqrt();
                accept = err <= F::one();
                // Ordering must hold at the end of an accepted step unless the
                // gap closed exactly; a sign flip is treated as an overshoot.
                if accept {
                    let q = &y_new[..flat.n];
                    for i in 1..flat.n {
                        if q[i] - q[i - 1] < F::zero() {
                            accept = false;
                            err = err.max(F::two());
                            break;
                        }
                    }
                }
            }
        }

        if accept {
            let t_new = t + h;
            // Collision check on the accepted state.
            if let Some((pair, g)) = flat.min_gap(&y_new) {
                let f_new = match flat.deriv(&y_new) {
                    Some(f) => f,
                    None => ks[6].clone(), // gap exactly zero; FSAL stage is at y_new
                };
                let gdot = f_new[pair + 1] - f_new[pair];
                if g <= gap_threshold() {
                    let te = if g <= F::zero() {
                        t_new
                    } else {
                        quadratic_event_time(t_new, g, gdot)
                    };
                    push_sample(t_new, &y_new, &mut record)?;
                    record.event = Some(CollisionEvent { pair, time: te });
                    return Ok(record);
                }
                t = t_new;
                y = y_new;
                f = f_new;
            } else {
                t = t_new;
                y = y_new;
                f = ks[6].clone();
            }

            if hit_sample {
                push_sample(t, &y, &mut record)?;
                next_sample += opts.sample_dt * dir;
            }
            if hit_end {
                if record.times.last() != Some(&t) {
                    push_sample(t, &y, &mut record)?;
                }
                return Ok(record);
            }

            // PI step-size controller.
            let e = err.max(F::of(1e-30));
            let fac = F::of(0.9) * e.powf(-F::of(0.7) * order_scale)
                * err_prev.powf(F::of(0.4) * order_scale);
            let fac = fac.min(F::of(5.0)).max(F::of(0.2));
            err_prev = e;
            h = (h.abs() * fac).min(opts.max_step) * dir;
        } else {
            // Reject: halve (or controller-shrink) the step.
            let fac = if err.is_finite() {
                (F::of(0.9) * err.powf(-order_scale)).max(F::of(0.1))
            } else {
                F::half()
            };
            h = h * fac.min(F::half());
        }

        // Step underflow: near a collision the controller cannot advance.
        if h.abs() < F::of(1e-13) * (t.abs() + F::one()) {
            if let Some((pair, g)) = flat.min_gap(&y) {
                let gdot = f[pair + 1] - f[pair];
                if gdot * dir < F::zero() {
                    let te = quadratic_event_time(t, g, gdot);
                    if record.times.last() != Some(&t) {
                        push_sample(t, &y, &mut record)?;
                    }
                    record.event = Some(CollisionEvent { pair, time: te });
                    return Ok(record);
                }
            }
            return Err(DynamicsError::StepUnderflow {
                t: t.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
}

/// Inspect two consecutive accepted states for a collision.
///
/// A gap that turns non-positive is root-found on the cubic Hermite
/// interpolant between the states; a gap that merely falls below the
/// collision threshold yields the quadratic-extrapolation estimate.
pub fn detect_collision<F: Real>(
    before: &PeakonState<F>,
    after: &PeakonState<F>,
) -> Option<CollisionEvent<F>> {
    let n = before.n();
    if n < 2 || after.n() != n {
        return None;
    }
    let h = after.t - before.t;
    let db = rhs(before).ok();
    let da = rhs(after).ok();
    let mut best: Option<CollisionEvent<F>> = None;
    let dir = if h >= F::zero() { F::one() } else { -F::one() };
    let better = |cand: F, cur: &Option<CollisionEvent<F>>| {
        cur.as_ref().is_none_or(|e| (cand - e.time) * dir < F::zero())
    };

    for i in 0..n - 1 {
        let g0 = before.q[i + 1] - before.q[i];
        let g1 = after.q[i + 1] - after.q[i];
        let gd1 = da
            .as_ref()
            .map(|d| d.dq[i + 1] - d.dq[i])
            .unwrap_or(F::zero());
        if g1 <= F::zero() {
            // Root-find g = 0 on the Hermite cubic through the step.
            let gd0 = db
                .as_ref()
                .map(|d| d.dq[i + 1] - d.dq[i])
                .unwrap_or((g1 - g0) / h);
            let eval = |th: F| {
                let one = F::one();
                let h00 = (one + F::two() * th) * (one - th) * (one - th);
                let h10 = th * (one - th) * (one - th);
                let h01 = th * th * (F::of(3.0) - F::two() * th);
                let h11 = th * th * (th - one);
                h00 * g0 + h10 * h * gd0 + h01 * g1 + h11 * h * gd1
            };
            let mut lo = F::zero();
            let mut hi = F::one();
            if g1 == F::zero() {
                lo = F::one();
            }
            for _ in 0..80 {
                let mid = (lo + hi) * F::half();
                if eval(mid) > F::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let te = before.t + (lo + hi) * F::half() * h;
            if better(te, &best) {
                best = Some(CollisionEvent { pair: i, time: te });
            }
        } else if g1 < gap_threshold() && gd1 * dir < F::zero() {
            let te = quadratic_event_time(after.t, g1, gd1);
            if better(te, &best) {
                best = Some(CollisionEvent { pair: i, time: te });
            }
        }
    }
    best
}

/// Relative energy drift of a trajectory.
#[derive(Debug, Clone)]
pub struct DriftReport<F> {
    pub series: Vec<F>,
    pub max: F,
}

/// |E(t) − E(t₀)| / E(t₀) for each sample.
pub fn energy_drift<F: Real>(traj: &TrajectoryRecord<F>) -> Result<DriftReport<F>, DynamicsError> {
    let e0 = *traj.energies.first().ok_or(DynamicsError::ZeroEnergy)?;
    if e0 == F::zero() {
        return Err(DynamicsError::ZeroEnergy);
    }
    let series: Vec<F> = traj
        .energies
        .iter()
        .map(|&e| ((e - e0) / e0).abs())
        .collect();
    let max = series.iter().fold(F::zero(), |a, &v| a.max(v));
    Ok(DriftReport { series, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_peakon_state() -> PeakonState<f64> {
        PeakonState::new(0.0, vec![0.0, 2.0f64.ln()], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn rhs_single_peakon() {
        let st = PeakonState::new(0.0, vec![0.3], vec![1.7], vec![0.4]).unwrap();
        let d = rhs(&st).unwrap();
        assert_eq!(d.dq, vec![1.7]);
        assert_eq!(d.dp, vec![0.0]);
        assert_eq!(d.ds, vec![0.0]);
    }

    #[test]
    fn rhs_two_peakons_derived_values() {
        let d = rhs(&two_peakon_state()).unwrap();
        assert_relative_eq!(d.dq[0], 1.5, max_relative = 1e-15);
        assert_relative_eq!(d.dq[1], 1.5, max_relative = 1e-15);
        assert_relative_eq!(d.dp[0], -0.5, max_relative = 1e-15);
        assert_relative_eq!(d.dp[1], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn rhs_rejects_disorder() {
        let st = PeakonState {
            t: 0.0,
            q: vec![1.0, 0.0],
            p: vec![1.0, 1.0],
            s: vec![0.0, 0.0],
        };
        assert!(rhs(&st).is_err());
    }

    #[test]
    fn rhs_matches_reduced_antisym_system() {
        // In reduced variables q = q1−q2, p = p1−p2 the system reads
        // q_t = p(1−e^q), p_t = ½p² + ½C with C = s² − 2E.
        let (a, p1, s1) = (0.8f64, 1.3, 0.25);
        let st = PeakonState::new(0.0, vec![-a, a], vec![p1, -p1], vec![s1, -s1]).unwrap();
        let d = rhs(&st).unwrap();
        let (q, p, s) = (-2.0 * a, 2.0 * p1, 2.0 * s1);
        assert_relative_eq!(d.dq[0] - d.dq[1], p * (1.0 - q.exp()), max_relative = 1e-13);
        let e = st.total_energy();
        let c = s * s - 2.0 * e;
        assert_relative_eq!(
            d.dp[0] - d.dp[1],
            0.5 * p * p + 0.5 * c,
            max_relative = 1e-12
        );
    }

    #[test]
    fn free_peakon_translation() {
        let st = PeakonState::new(0.0, vec![0.0], vec![1.0], vec![0.0]).unwrap();
        let traj = integrate(&st, 2.0, &IntegrateOpts::default()).unwrap();
        let last = traj.states.last().unwrap();
        assert_relative_eq!(last.q[0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(last.p[0], 1.0, epsilon = 1e-12);
        let drift = energy_drift(&traj).unwrap();
        assert!(drift.max < 1e-13);
        assert!(traj.event.is_none());
    }

    #[test]
    fn zero_length_integration() {
        let st = two_peakon_state();
        let traj = integrate(&st, 0.0, &IntegrateOpts::default()).unwrap();
        assert_eq!(traj.times, vec![0.0]);
        assert_eq!(&traj.states[0], &st);
        assert!(traj.event.is_none());
    }

    #[test]
    fn s_is_preserved_bitwise() {
        let st =
            PeakonState::new(0.0, vec![-1.0, 1.0], vec![0.9, -0.2], vec![0.3, 0.7]).unwrap();
        let traj = integrate(&st, 1.0, &IntegrateOpts::default()).unwrap();
        for state in &traj.states {
            assert_eq!(state.s, st.s); // exact: rhs returns ds ≡ 0
        }
    }

    #[test]
    fn detect_collision_none_when_separating() {
        let before =
            PeakonState::new(0.0, vec![-1.0, 1.0], vec![-1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let after =
            PeakonState::new(0.1, vec![-1.1, 1.1], vec![-1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert!(detect_collision(&before, &after).is_none());
    }

    #[test]
    fn detect_collision_zero_gap_at_step_end() {
        let before =
            PeakonState::new(0.0, vec![-0.1, 0.1], vec![1.0, -1.0], vec![0.0, 0.0]).unwrap();
        let after = PeakonState {
            t: 0.25,
            q: vec![0.0, 0.0],
            p: vec![5.0, -5.0],
            s: vec![0.0, 0.0],
        };
        let ev = detect_collision(&before, &after).unwrap();
        assert_eq!(ev.pair, 0);
        assert_relative_eq!(ev.time, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn time_reversibility() {
        let st =
            PeakonState::new(0.0, vec![-2.0, 1.5], vec![1.0, 0.8], vec![0.2, -0.1]).unwrap();
        let opts = IntegrateOpts {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let fwd = integrate(&st, 2.0, &opts).unwrap();
        let mid = fwd.states.last().unwrap().clone();
        let back = integrate(&mid, 0.0, &opts).unwrap();
        let fin = back.states.last().unwrap();
        for i in 0..2 {
            assert_relative_eq!(fin.q[i], st.q[i], epsilon = 1e-9);
            assert_relative_eq!(fin.p[i], st.p[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn ch_reduction_matches_independent_ch_rhs() {
        // Independent CH multipeakon rhs, coded directly from the s ≡ 0 system.
        fn ch_rhs(q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
            let n = q.len();
            let mut dq = vec![0.0; n];
            let mut dp = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    dq[i] += p[j] * (-(q[i] - q[j]).abs()).exp();
                    if j != i {
                        let sg = if q[i] > q[j] { 1.0 } else { -1.0 };
                        dp[i] += p[i] * p[j] * sg * (-(q[i] - q[j]).abs()).exp();
                    }
                }
            }
            (dq, dp)
        }
        let q = vec![-1.0, 0.4, 2.2];
        let p = vec![0.7, -0.3, 1.1];
        let st = PeakonState::new(0.0, q.clone(), p.clone(), vec![0.0; 3]).unwrap();
        let d = rhs(&st).unwrap();
        let (dq, dp) = ch_rhs(&q, &p);
        for i in 0..3 {
            assert_relative_eq!(d.dq[i], dq[i], max_relative = 1e-15);
            assert_relative_eq!(d.dp[i], dp[i], max_relative = 1e-15);
        }
    }

    #[test]
    fn zero_energy_is_degenerate() {
        let st = PeakonState::new(0.0, vec![0.0], vec![0.0], vec![0.0]).unwrap();
        let traj = integrate(&st, 1.0, &IntegrateOpts::default()).unwrap();
        assert!(matches!(
            energy_drift(&traj),
            Err(DynamicsError::ZeroEnergy)
        ));
    }
}
