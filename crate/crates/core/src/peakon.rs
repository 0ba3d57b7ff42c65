//! Multipeakon configurations and energy functionals.
//!
//! A double multipeakon is the pair
//!
//!   u(x)  = Σᵢ pᵢ e^{−|x−qᵢ|},    ρ̄(x) = Σᵢ sᵢ e^{−|x−qᵢ|},
//!
//! with strictly increasing peak positions qᵢ.  The conserved total energy of
//! such a configuration is the bilinear form
//!
//!   E = Σᵢⱼ (pᵢpⱼ + sᵢsⱼ) e^{−|qᵢ−qⱼ|},
//!
//! which reduces for n = 2 to p₁²+p₂²+s₁²+s₂²+2(p₁p₂+s₁s₂)e^{q₁−q₂}.
//!
//! Derivatives of the peaked exponentials use the convention sign(0) = 0, so
//! that at a peak the one-sided limits average out and the derivative field is
//! odd about the peak.

use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PeakonError {
    #[error("q, p, s must have equal lengths (got {q}, {p}, {s})")]
    MismatchedLengths { q: usize, p: usize, s: usize },
    #[error("peak positions must be strictly increasing (violated at index {index})")]
    UnorderedPositions { index: usize },
}

/// An n-peakon configuration at a fixed time: positions `q` (strictly
/// increasing), momenta `p` and density amplitudes `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakonState<F> {
    pub t: F,
    pub q: Vec<F>,
    pub p: Vec<F>,
    pub s: Vec<F>,
}

/// Pointwise values of the Eulerian fields at a position `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerianSample<F> {
    pub x: F,
    pub u: F,
    pub u_x: F,
    pub rho_bar: F,
    pub rho_bar_x: F,
}

/// sign with sign(0) = 0.
#[inline]
pub(crate) fn signum0<F: Real>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else if x < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}

impl<F: Real> PeakonState<F> {
    pub fn new(t: F, q: Vec<F>, p: Vec<F>, s: Vec<F>) -> Result<Self, PeakonError> {
        if q.len() != p.len() || q.len() != s.len() {
            return Err(PeakonError::MismatchedLengths {
                q: q.len(),
                p: p.len(),
                s: s.len(),
            });
        }
        for i in 1..q.len() {
            if !(q[i] > q[i - 1]) {
                return Err(PeakonError::UnorderedPositions { index: i });
            }
        }
        Ok(Self { t, q, p, s })
    }

    /// Empty configuration (u ≡ 0, ρ̄ ≡ 0).
    pub fn empty(t: F) -> Self {
        Self {
            t,
            q: Vec::new(),
            p: Vec::new(),
            s: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// u(x) = Σᵢ pᵢ e^{−|x−qᵢ|}.
    pub fn eval_u(&self, x: F) -> F {
        self.q
            .iter()
            .zip(&self.p)
            .map(|(&qi, &pi)| pi * (-(x - qi).abs()).exp())
            .sum()
    }

    /// ρ̄(x) = Σᵢ sᵢ e^{−|x−qᵢ|}.
    pub fn eval_rho_bar(&self, x: F) -> F {
        self.q
            .iter()
            .zip(&self.s)
            .map(|(&qi, &si)| si * (-(x - qi).abs()).exp())
            .sum()
    }

    /// (u_x, ρ̄_x) at `x`, with sign(0) = 0 at the peaks.
    pub fn eval_derivatives(&self, x: F) -> (F, F) {
        let mut ux = F::zero();
        let mut rx = F::zero();
        for i in 0..self.n() {
            let w = signum0(self.q[i] - x) * (-(x - self.q[i]).abs()).exp();
            ux += self.p[i] * w;
            rx += self.s[i] * w;
        }
        (ux, rx)
    }

    /// All four field values at `x`.
    pub fn sample(&self, x: F) -> EulerianSample<F> {
        let (u_x, rho_bar_x) = self.eval_derivatives(x);
        EulerianSample {
            x,
            u: self.eval_u(x),
            u_x,
            rho_bar: self.eval_rho_bar(x),
            rho_bar_x,
        }
    }

    /// Total energy E = Σᵢⱼ (pᵢpⱼ + sᵢsⱼ) e^{−|qᵢ−qⱼ|}.
    ///
    /// Equals ½∫(u² + u_x² + ρ̄² + ρ̄_x²) dx for the peaked exponential fields.
    pub fn total_energy(&self) -> F {
        let n = self.n();
        let mut e = F::zero();
        for i in 0..n {
            e += self.p[i] * self.p[i] + self.s[i] * self.s[i];
            for j in (i + 1)..n {
                let k = (-(self.q[i] - self.q[j]).abs()).exp();
                e += F::two() * (self.p[i] * self.p[j] + self.s[i] * self.s[j]) * k;
            }
        }
        e
    }
}
