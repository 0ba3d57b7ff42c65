//! Exact antisymmetric peakon–antipeakon solutions (n = 2).
//!
//! With q = q₁−q₂ ≤ 0 and p = p₁−p₂ the antisymmetric configuration
//! (Q = P = S = 0) obeys
//!
//!   q_t = p(1−e^q),    p_t = ½p² + ½C,    C = s² − 2E,
//!
//! normalized to E = ½ so that the energy identity reads
//! (p² + s²)(1−e^q) = 1.  The constant density amplitude s selects one of
//! three regimes:
//!
//!   subcritical  0 ≤ s < 1: the peaks depart after the collision,
//!                p∞ = √(1−s²), u†(±∞) = ∓p∞/2;
//!   critical     s = 1: the peaks slow down, u† decays to zero;
//!   supercritical s > 1: periodic oscillation with period 2π/√C.
//!
//! The peak values u† = ½p(1−e^q) and ρ̄† = ½s(1−e^q) travel on the circle
//! u†² + (ρ̄†−1/(4s))² = (1/(4s))².
//!
//! All branches are evaluated through x ≥ 0 with q = −ln(1+x) and
//! 1−e^q = x/(1+x), using expm1/ln_1p style rearrangements so that sampling
//! arbitrarily close to the collision stays accurate.

use thiserror::Error;

use crate::peakon::{PeakonError, PeakonState};
use crate::real::Real;

#[derive(Debug, Error, PartialEq)]
pub enum ClosedFormError {
    #[error("density amplitude s must be nonnegative (got {0})")]
    NegativeAmplitude(f64),
    #[error("no period exists outside the supercritical regime")]
    NotPeriodic,
    #[error("initial data violates the energy normalization (p0²+s²)(1−e^q0) = 1 by {residual}")]
    BadNormalization { residual: f64 },
    #[error("q0 must be negative (got {0})")]
    NonNegativeGap(f64),
    #[error("state is at a collision; the two-peakon form does not exist there")]
    AtCollision,
    #[error(transparent)]
    State(#[from] PeakonError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Regime classification and constants for an antisymmetric case with
/// amplitude `s` under the E = ½ normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntisymCase<F> {
    pub s: F,
    pub energy: F,
    /// C = s² − 1.
    pub c: F,
    pub regime: Regime,
    /// √(1−s²), subcritical only.
    pub p_inf: Option<F>,
}

/// One sample of the reduced solution: gap q = q₁−q₂ ≤ 0, momentum p = p₁−p₂
/// and the peak values u†, ρ̄†.  At a collision `p` is infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntisymPoint<F> {
    pub t: F,
    pub p: F,
    pub q: F,
    pub u_peak: F,
    pub rho_bar_peak: F,
}

impl<F: Real> AntisymPoint<F> {
    pub fn p_is_infinite(&self) -> bool {
        self.p.is_infinite()
    }
}

/// Limiting behavior as t → ±∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Asymptotics<F> {
    /// Subcritical: u† tends to ∓p∞/2 and ρ̄† to s/2, a point on the limit
    /// circle u†² + ρ̄†² = ¼.
    Departing {
        /// (limit at t → −∞, limit at t → +∞) of u†.
        u_peak_limits: (F, F),
        rho_bar_limit: F,
        on_limit_circle: bool,
    },
    /// Critical: both peak values decay to zero.
    Decaying,
    /// Supercritical: no limit, the solution is periodic.
    Periodic { period: F },
}

/// Band around s = 1 mapped to the critical regime; the three formula
/// families are non-interchangeable at C = 0.
fn critical_band<F: Real>() -> F {
    F::of(1e-13)
}

/// Classify the amplitude into its regime.
pub fn classify<F: Real>(s: F) -> Result<AntisymCase<F>, ClosedFormError> {
    if s < F::zero() {
        return Err(ClosedFormError::NegativeAmplitude(
            s.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let c = s * s - F::one();
    let (regime, p_inf) = if (s - F::one()).abs() < critical_band() {
        (Regime::Critical, None)
    } else if s < F::one() {
        (Regime::Subcritical, Some((F::one() - s * s).sqrt()))
    } else {
        (Regime::Supercritical, None)
    };
    Ok(AntisymCase {
        s,
        energy: F::half(),
        c,
        regime,
        p_inf,
    })
}

/// Residual of the E = ½ normalization: (p0²+s²)(1−e^{q0}) − 1.
pub fn normalization_residual<F: Real>(s: F, p0: F, q0: F) -> F {
    -(p0 * p0 + s * s) * q0.exp_m1() - F::one()
}

impl<F: Real> AntisymCase<F> {
    /// Assemble a point from x ≥ 0 (where q = −ln(1+x)), the momentum and the
    /// peak velocity.
    fn point(&self, t: F, x: F, p: F, u_peak: F) -> AntisymPoint<F> {
        let one_minus_eq = x / (F::one() + x);
        AntisymPoint {
            t,
            p,
            q: -x.ln_1p(),
            u_peak,
            rho_bar_peak: F::half() * self.s * one_minus_eq,
        }
    }

    /// Evaluate the collision-centered solution (collision at t = 0; in the
    /// supercritical regime also at every multiple of the period).
    pub fn eval_collision_centered(&self, t: F) -> AntisymPoint<F> {
        match self.regime {
            Regime::Subcritical => {
                let k = self.p_inf.expect("subcritical");
                let tau = k * t;
                // x = sinh²(τ/2)/p∞²,  cosh τ − 1 = 2 sinh²(τ/2).
                let sh = (tau * F::half()).sinh();
                let x = sh * sh / (k * k);
                let em = tau.exp_m1(); // 1 − e^τ = −em
                let p = if em == F::zero() {
                    F::infinity()
                } else {
                    -k * (F::two() + em) / em
                };
                let u = -tau.sinh() / (F::of(4.0) * k * (F::one() + x));
                self.point(t, x, p, u)
            }
            Regime::Critical => {
                let x = t * t * F::of(0.25);
                let p = if t == F::zero() {
                    F::infinity()
                } else {
                    -F::two() / t
                };
                let u = -t / (t * t + F::of(4.0));
                self.point(t, x, p, u)
            }
            Regime::Supercritical => {
                let k = self.c.sqrt();
                let sn = (k * t * F::half()).sin();
                let x = sn * sn / self.c;
                let cs = (k * t * F::half()).cos();
                let p = if sn == F::zero() {
                    F::infinity()
                } else {
                    -k * cs / sn
                };
                let u = -(k * t).sin() / (F::of(4.0) * k * (F::one() + x));
                self.point(t, x, p, u)
            }
        }
    }

    /// Evaluate the general-initial-data branch with q(0) = q0 < 0, p(0) = p0.
    /// The data must satisfy the E = ½ normalization within 1e−12.
    pub fn eval_general(&self, p0: F, q0: F, t: F) -> Result<AntisymPoint<F>, ClosedFormError> {
        if !(q0 < F::zero()) {
            return Err(ClosedFormError::NonNegativeGap(
                q0.to_f64().unwrap_or(f64::NAN),
            ));
        }
        let residual = normalization_residual(self.s, p0, q0);
        if residual.abs() > F::of(1e-12) {
            return Err(ClosedFormError::BadNormalization {
                residual: residual.to_f64().unwrap_or(f64::NAN),
            });
        }
        let eq0m = (-q0).exp_m1(); // e^{−q0} − 1 > 0
        Ok(match self.regime {
            Regime::Subcritical => {
                let k = (-self.c).sqrt();
                let a = (p0 - k) / (p0 + k);
                let ekt = (k * t).exp();
                let d = F::one() - a * ekt;
                let base = F::one() - a;
                let x = (-k * t).exp() * d * d * eq0m / (base * base);
                let p = if d == F::zero() {
                    F::infinity()
                } else {
                    k * (F::one() + a * ekt) / d
                };
                let u = F::half() * k * (-k * t).exp() * d * (F::one() + a * ekt) * eq0m
                    / (base * base)
                    / (F::one() + x);
                self.point(t, x, p, u)
            }
            Regime::Critical => {
                let w = (F::two() - t * p0) * F::half();
                let x = w * w * eq0m;
                let p = if w == F::zero() {
                    F::infinity()
                } else {
                    p0 / w
                };
                let u = p0 * w * F::half() * eq0m / (F::one() + x);
                self.point(t, x, p, u)
            }
            Regime::Supercritical => {
                let k = self.c.sqrt();
                let dph = (p0 / k).atan();
                let b = eq0m / (dph.cos() * dph.cos());
                let arg = k * t * F::half() + dph;
                let cs = arg.cos();
                let x = b * cs * cs;
                let p = if cs == F::zero() {
                    F::infinity()
                } else {
                    k * arg.tan()
                };
                let u = F::of(0.25) * k * b * (k * t + F::two() * dph).sin() / (F::one() + x);
                self.point(t, x, p, u)
            }
        })
    }

    /// Wave-breaking time of the general branch (the collision following the
    /// initial data when the peaks approach, p0 > 0).
    pub fn breaking_time(&self, p0: F, q0: F) -> Result<F, ClosedFormError> {
        if !(q0 < F::zero()) {
            return Err(ClosedFormError::NonNegativeGap(
                q0.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(match self.regime {
            Regime::Subcritical => {
                let k = (-self.c).sqrt();
                let a = (p0 - k) / (p0 + k);
                (F::one() / a).ln() / k
            }
            Regime::Critical => F::two() / p0,
            Regime::Supercritical => {
                let k = self.c.sqrt();
                let dph = (p0 / k).atan();
                (F::FRAC_PI_2() - dph) * F::two() / k
            }
        })
    }

    /// Period 2π/√C of the supercritical oscillation.
    pub fn period(&self) -> Result<F, ClosedFormError> {
        match self.regime {
            Regime::Supercritical => Ok(F::two() * F::PI() / self.c.sqrt()),
            _ => Err(ClosedFormError::NotPeriodic),
        }
    }

    /// Limits of the peak values as t → ±∞.
    pub fn asymptotics(&self) -> Asymptotics<F> {
        match self.regime {
            Regime::Subcritical => {
                let k = self.p_inf.expect("subcritical");
                let u_minus = k * F::half();
                let u_plus = -u_minus;
                let rho = self.s * F::half();
                let circle = (u_plus * u_plus + rho * rho - F::of(0.25)).abs() < F::of(1e-14);
                Asymptotics::Departing {
                    u_peak_limits: (u_minus, u_plus),
                    rho_bar_limit: rho,
                    on_limit_circle: circle,
                }
            }
            Regime::Critical => Asymptotics::Decaying,
            Regime::Supercritical => Asymptotics::Periodic {
                period: self.period().expect("supercritical"),
            },
        }
    }

    /// The two-peakon configuration realizing the reduced point:
    /// q₁ = q/2, q₂ = −q/2, p₁ = p/2, p₂ = −p/2, s₁ = s/2, s₂ = −s/2.
    pub fn peakon_state(&self, point: &AntisymPoint<F>) -> Result<PeakonState<F>, ClosedFormError> {
        if point.p_is_infinite() || point.q >= F::zero() {
            return Err(ClosedFormError::AtCollision);
        }
        Ok(PeakonState::new(
            point.t,
            vec![point.q * F::half(), -point.q * F::half()],
            vec![point.p * F::half(), -point.p * F::half()],
            vec![self.s * F::half(), -self.s * F::half()],
        )?)
    }
}

/// Residual of the peak-value circle: u†² + (ρ̄†−1/(4s))² − (1/(4s))².
pub fn circle_residual<F: Real>(point: &AntisymPoint<F>, s: F) -> Result<F, ClosedFormError> {
    if !(s > F::zero()) {
        return Err(ClosedFormError::NegativeAmplitude(
            s.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let r = F::one() / (F::of(4.0) * s);
    let d = point.rho_bar_peak - r;
    Ok(point.u_peak * point.u_peak + d * d - r * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn classify_regimes() {
        let sub = classify(0.5f64).unwrap();
        assert_eq!(sub.regime, Regime::Subcritical);
        assert_relative_eq!(sub.c, -0.75);
        assert_relative_eq!(sub.p_inf.unwrap(), 0.75f64.sqrt());

        let crit = classify(1.0f64).unwrap();
        assert_eq!(crit.regime, Regime::Critical);
        assert_eq!(crit.c, 0.0);

        let sup = classify(1.5f64).unwrap();
        assert_eq!(sup.regime, Regime::Supercritical);
        assert_relative_eq!(sup.c, 1.25);

        assert!(classify(-0.1f64).is_err());
    }

    #[test]
    fn critical_peak_velocity() {
        let case = classify(1.0f64).unwrap();
        let pt = case.eval_collision_centered(2.0);
        assert_relative_eq!(pt.u_peak, -0.25, max_relative = 1e-15);
    }

    #[test]
    fn collision_point_is_origin() {
        for s in [0.0, 0.5, 1.0, 1.5] {
            let case = classify(s).unwrap();
            let pt = case.eval_collision_centered(0.0);
            assert_eq!(pt.q, 0.0);
            assert_eq!(pt.u_peak, 0.0);
            assert_eq!(pt.rho_bar_peak, 0.0);
            assert!(pt.p_is_infinite());
        }
    }

    #[test]
    fn subcritical_gap_value() {
        // s = 0, p∞ = 1: q(2) = −ln(1 + (cosh 2 − 1)/2), frozen from the
        // direct high-precision evaluation of that expression.
        let case = classify(0.0f64).unwrap();
        let pt = case.eval_collision_centered(2.0);
        let expected = -(1.0 + (2.0f64.cosh() - 1.0) / 2.0).ln();
        assert_relative_eq!(pt.q, expected, max_relative = 1e-14);
        assert_relative_eq!(pt.q, -0.8675616609660544, max_relative = 1e-14);
    }

    #[test]
    fn energy_identity_along_branches() {
        for s in [0.0, 0.25, 0.5, 1.0, 1.5, 2.0] {
            let case = classify(s).unwrap();
            for i in 1..=1000 {
                let t = -8.0 + 16.0 * (i as f64) / 1000.0 + 0.0037; // avoid t = 0
                let pt = case.eval_collision_centered(t);
                if pt.p_is_infinite() {
                    continue;
                }
                let lhs = (pt.p * pt.p + s * s) * (-pt.q.exp_m1());
                assert_relative_eq!(lhs, 1.0, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn ode_consistency_central_differences() {
        // d/dt of (q, p) must match q_t = p(1−e^q), p_t = ½p² + ½C at O(h²).
        for s in [0.3, 1.0, 1.7] {
            let case = classify(s).unwrap();
            for &t in &[-2.0, -0.6, 1.3] {
                let err = |h: f64| {
                    let m = case.eval_collision_centered(t - h);
                    let c = case.eval_collision_centered(t);
                    let p = case.eval_collision_centered(t + h);
                    let qd = (p.q - m.q) / (2.0 * h);
                    let pd = (p.p - m.p) / (2.0 * h);
                    let qr = (qd - c.p * (-c.q.exp_m1())).abs();
                    let pr = (pd - 0.5 * c.p * c.p - 0.5 * case.c).abs();
                    qr.max(pr)
                };
                let e1 = err(1e-3);
                let e2 = err(5e-4);
                assert!(e1 < 1e-4, "fd residual {e1} too large at s={s}, t={t}");
                // O(h²): halving h shrinks the residual about 4x.
                if e1 > 1e-11 {
                    assert!(e2 < e1 / 3.0, "no O(h²) decay: {e1} -> {e2}");
                }
            }
        }
    }

    #[test]
    fn supercritical_periodicity() {
        let case = classify(1.5f64).unwrap();
        let period = case.period().unwrap();
        assert_relative_eq!(period, 2.0 * std::f64::consts::PI / 1.25f64.sqrt());
        assert_relative_eq!(period, 5.619851784832581, max_relative = 1e-15);
        for i in 0..50 {
            let t = -3.0 + 0.13 * i as f64;
            let a = case.eval_collision_centered(t);
            let b = case.eval_collision_centered(t + period);
            assert_relative_eq!(a.q, b.q, epsilon = 1e-12);
            assert_relative_eq!(a.u_peak, b.u_peak, epsilon = 1e-12);
            assert_relative_eq!(a.rho_bar_peak, b.rho_bar_peak, epsilon = 1e-12);
        }
    }

    #[test]
    fn period_values() {
        let case = classify(2.0f64.sqrt()).unwrap();
        assert_relative_eq!(case.period().unwrap(), 2.0 * std::f64::consts::PI, epsilon = 1e-12);
        assert_eq!(
            classify(0.5f64).unwrap().period(),
            Err(ClosedFormError::NotPeriodic)
        );
    }

    #[test]
    fn general_returns_initial_data() {
        // q0 must be close enough to 0 that a real p0 exists:
        // p0² = 1/(1−e^{q0}) − s² > 0.
        for (s, q0) in [(0.4f64, -1.2f64), (1.0, -0.7), (1.6, -0.3)] {
            let case = classify(s).unwrap();
            let p0 = (1.0 / (-q0).exp_m1() * (1.0 + (-q0).exp_m1()) - s * s).sqrt();
            // p0 chosen so (p0²+s²)(1−e^{q0}) = 1.
            assert!(normalization_residual(s, p0, q0).abs() < 1e-12);
            let pt = case.eval_general(p0, q0, 0.0).unwrap();
            assert_relative_eq!(pt.p, p0, max_relative = 1e-12);
            assert_relative_eq!(pt.q, q0, max_relative = 1e-12);
        }
    }

    #[test]
    fn general_rejects_bad_normalization() {
        let case = classify(1.5f64).unwrap();
        let err = case.eval_general(1.0, -1.0, 0.5).unwrap_err();
        assert!(matches!(err, ClosedFormError::BadNormalization { .. }));
    }

    #[test]
    fn subcritical_breaking_time_hits_collision() {
        let case = classify(0.5f64).unwrap();
        let q0 = -0.9f64;
        let p0 = (1.0 / (-q0).exp_m1() + 1.0 - 0.25).sqrt();
        let t_star = case.breaking_time(p0, q0).unwrap();
        let pt = case.eval_general(p0, q0, t_star).unwrap();
        assert!(pt.q.abs() < 1e-12, "q(t*) = {} should vanish", pt.q);
    }

    #[test]
    fn critical_breaking_time() {
        // p(t) = 2p0/(2−tp0) is singular at t* = 2/p0.
        let case = classify(1.0f64).unwrap();
        let q0 = -0.7f64;
        let p0 = (1.0 / (-q0).exp_m1() + 1.0 - 1.0).sqrt();
        let t_star = case.breaking_time(p0, q0).unwrap();
        assert_relative_eq!(t_star, 2.0 / p0, max_relative = 1e-15);
        let pt = case.eval_general(p0, q0, t_star).unwrap();
        assert!(pt.q.abs() < 1e-12);
        // t*·p0 rounds, so p may come out huge rather than exactly infinite.
        assert!(pt.p_is_infinite() || pt.p.abs() > 1e12);
    }

    #[test]
    fn general_agrees_with_centered_after_shift() {
        for s in [0.0f64, 0.5] {
            let case = classify(s).unwrap();
            let q0 = -1.0f64;
            let p0 = (1.0 / (-q0).exp_m1() + 1.0 - s * s).sqrt();
            let t_star = case.breaking_time(p0, q0).unwrap();
            for i in 0..60 {
                let t = -2.0 + 0.06 * i as f64;
                let g = case.eval_general(p0, q0, t).unwrap();
                let c = case.eval_collision_centered(t - t_star);
                assert_relative_eq!(g.q, c.q, epsilon = 1e-10);
                assert_relative_eq!(g.u_peak, c.u_peak, epsilon = 1e-10);
                if !g.p_is_infinite() {
                    assert_relative_eq!(g.p, c.p, epsilon = 1e-8, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn gap_stays_nonpositive() {
        for s in [0.0, 0.7, 1.0, 1.3] {
            let case = classify(s).unwrap();
            for i in 0..400 {
                let t = -10.0 + 0.05 * i as f64;
                assert!(case.eval_collision_centered(t).q <= 0.0);
            }
        }
    }

    #[test]
    fn asymptotic_limits() {
        let case = classify(0.6f64).unwrap();
        match case.asymptotics() {
            Asymptotics::Departing {
                u_peak_limits,
                rho_bar_limit,
                on_limit_circle,
            } => {
                assert_relative_eq!(u_peak_limits.1, -0.4, max_relative = 1e-12);
                assert_relative_eq!(u_peak_limits.0, 0.4, max_relative = 1e-12);
                assert_relative_eq!(rho_bar_limit, 0.3, max_relative = 1e-12);
                assert!(on_limit_circle);
            }
            other => panic!("expected departing asymptotics, got {other:?}"),
        }
        assert_eq!(classify(1.0f64).unwrap().asymptotics(), Asymptotics::Decaying);
        // s = 0: u†(±∞) = ∓½, ρ̄† → 0, still on the limit circle.
        match classify(0.0f64).unwrap().asymptotics() {
            Asymptotics::Departing {
                u_peak_limits,
                rho_bar_limit,
                on_limit_circle,
            } => {
                assert_relative_eq!(u_peak_limits.1, -0.5);
                assert_eq!(rho_bar_limit, 0.0);
                assert!(on_limit_circle);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn circle_residual_along_closed_forms() {
        let origin = AntisymPoint {
            t: 0.0,
            p: f64::INFINITY,
            q: 0.0,
            u_peak: 0.0,
            rho_bar_peak: 0.0,
        };
        assert_eq!(circle_residual(&origin, 1.0).unwrap(), 0.0);

        let case = classify(1.5f64).unwrap();
        let pt = case.eval_collision_centered(1.0);
        assert!(circle_residual(&pt, 1.5).unwrap().abs() < 1e-12);

        let case = classify(0.5f64).unwrap();
        let q0 = -1.0f64;
        let p0 = (1.0 / (-q0).exp_m1() + 1.0 - 0.25).sqrt();
        let pt = case.eval_general(p0, q0, 0.0).unwrap();
        assert!(circle_residual(&pt, 0.5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn peakon_state_roundtrip() {
        let case = classify(0.5f64).unwrap();
        let pt = case.eval_collision_centered(-2.0);
        let st = case.peakon_state(&pt).unwrap();
        assert_eq!(st.n(), 2);
        assert_relative_eq!(st.q[0] - st.q[1], pt.q, max_relative = 1e-15);
        assert_relative_eq!(st.p[0] - st.p[1], pt.p, max_relative = 1e-15);
        assert_relative_eq!(st.total_energy(), 0.5, max_relative = 1e-12);
        // u† is the value of u at the left peak.
        assert_relative_eq!(st.eval_u(st.q[0]), pt.u_peak, max_relative = 1e-12);
        assert_relative_eq!(st.eval_rho_bar(st.q[0]), pt.rho_bar_peak, max_relative = 1e-12);

        let coll = case.eval_collision_centered(0.0);
        assert_eq!(case.peakon_state(&coll), Err(ClosedFormError::AtCollision));
    }
}
