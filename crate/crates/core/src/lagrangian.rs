//! Semi-linear Lagrangian formulation on a truncated ξ-grid.
//!
//! The Eulerian fields are carried along characteristics y(t,ξ):
//! U = u∘y, r̄ = ρ̄∘y, s̄ = ρ̄_x∘y, plus the cumulative energy H and the
//! multiplier λ with λ_t = r̄.  The governing system is
//!
//!   y_t = U,   U_t = −Q,   H_t = U³ − 2PU − 2r̄(S+V),
//!   r̄_t = −(R+W),   s̄_t = −(S+V),
//!
//! with the nonlocal fields P, Q, R, S, V, W given by exponential-kernel
//! integrals over the grid.  The ξ-derivatives y_ξ, U_ξ, H_ξ, r̄_ξ (and λ_ξ)
//! are evolved as independent unknowns,
//!
//!   y_ξt = U_ξ,
//!   U_ξt = ½H_ξ + (½U² − s̄² − P) y_ξ,
//!   H_ξt = (3U² − 2P + 2r̄²) U_ξ − 2(QU + r̄(R+W)) y_ξ − 2(S+V) r̄_ξ,
//!   r̄_ξt = s̄ U_ξ − (S+V) y_ξ,
//!
//! which makes the system semi-linear: y_ξ → 0 (wave breaking) is a benign
//! point of the flow, so the solution continues conservatively through peak
//! collisions.  The fields stay on the constraint manifold
//!
//!   y_ξ H_ξ = (U² + r̄² + s̄²) y_ξ² + U_ξ²,
//!
//! which the flow preserves together with r̄_ξ = s̄ y_ξ; both are monitored,
//! never corrected.
//!
//! The kernel integrals are evaluated in O(N) by the two-pass recursion
//! Fᵢ = e^{−(yᵢ−yᵢ₋₁)} Fᵢ₋₁ + wᵢΔξ and its backward mirror; every factor is
//! ≤ 1 so the scans cannot overflow.

use thiserror::Error;

use crate::peakon::PeakonState;
use crate::real::Real;

#[derive(Debug, Error, PartialEq)]
pub enum LagrangianError {
    #[error("grid needs at least two nodes (got {0})")]
    GridTooSmall(usize),
    #[error("grid bounds must satisfy xi_min < xi_max")]
    BadBounds,
    #[error("peakon support [{lo}, {hi}] leaves less than the required margin {margin} inside the grid")]
    InsufficientMargin { lo: f64, hi: f64, margin: f64 },
    #[error("characteristics must be nondecreasing (violated at node {index})")]
    NonMonotone { index: usize },
    #[error("length mismatch between positions and weights")]
    LengthMismatch,
    #[error("non-finite field value produced at t = {t}")]
    NonFinite { t: f64 },
    #[error("|U_xi| grew more than 10x within one step at t = {t}; reduce dt")]
    DerivativeBlowup { t: f64 },
}

/// Uniform ξ-grid specification.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec<F> {
    pub xi_min: F,
    pub xi_max: F,
    pub n: usize,
}

/// Margin of kernel decay required between the data support and the grid
/// ends: e^{−20} < 3e−9 bounds the truncation error.
fn support_margin<F: Real>() -> F {
    F::of(20.0)
}

/// All evolved fields at one time: values y, U, H, r̄, s̄, λ and the
/// independently evolved derivatives y_ξ, U_ξ, H_ξ, r̄_ξ, λ_ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianGrid<F> {
    pub t: F,
    pub xi_min: F,
    pub dxi: F,
    pub y: Vec<F>,
    pub u: Vec<F>,
    pub h: Vec<F>,
    pub rbar: Vec<F>,
    pub sbar: Vec<F>,
    pub lambda: Vec<F>,
    pub y_xi: Vec<F>,
    pub u_xi: Vec<F>,
    pub h_xi: Vec<F>,
    pub rbar_xi: Vec<F>,
    pub lambda_xi: Vec<F>,
    /// Nodes where H_ξ was initialized with the average of the squared
    /// one-sided derivative limits of a jump (value: the added pᵢ² + sᵢ²).
    /// At these nodes the constraint identity, which is built from the
    /// mean-of-limits fields U_ξ and s̄, carries this offset as a constant
    /// of motion; [`LagrangianGrid::constraint_residual`] subtracts it.
    pub jump_nodes: Vec<(usize, F)>,
}

/// The six nonlocal fields.
#[derive(Debug, Clone)]
pub struct IntegralBundle<F> {
    pub p: Vec<F>,
    pub q: Vec<F>,
    pub r: Vec<F>,
    pub s: Vec<F>,
    pub v: Vec<F>,
    pub w: Vec<F>,
}

/// Time derivative of every evolved field.
#[derive(Debug, Clone)]
pub struct GridDeriv<F> {
    pub y: Vec<F>,
    pub u: Vec<F>,
    pub h: Vec<F>,
    pub rbar: Vec<F>,
    pub sbar: Vec<F>,
    pub lambda: Vec<F>,
    pub y_xi: Vec<F>,
    pub u_xi: Vec<F>,
    pub h_xi: Vec<F>,
    pub rbar_xi: Vec<F>,
    pub lambda_xi: Vec<F>,
}

/// Eulerian read-back of a grid on an x-grid.
#[derive(Debug, Clone)]
pub struct EulerianField<F> {
    pub x: Vec<F>,
    pub u: Vec<F>,
    pub rho_bar: Vec<F>,
    pub rho_bar_x: Vec<F>,
    /// Energy density H_ξ/y_ξ (diagnostic; y_ξ clamped at the mask below).
    pub energy: Vec<F>,
}

/// Diagnostic output of [`LagrangianGrid::compute_r`].
#[derive(Debug, Clone)]
pub struct RDiagnostics<F> {
    /// r = −s̄_ξ + r̄ y_ξ with s̄_ξ by central differences.
    pub r: Vec<F>,
    /// Residual of r̄_ξ = s̄ y_ξ with r̄_ξ by central differences.
    pub rbar_consistency: Vec<F>,
}

/// Pointwise field sample used by [`init_from_fields`].
#[derive(Debug, Clone, Copy)]
pub struct FieldSample<F> {
    pub u: F,
    pub u_x: F,
    pub rho_bar: F,
    pub rho_bar_x: F,
}

/// Symmetric and antisymmetric exponential-kernel sums over monotone
/// positions:
///
///   symᵢ  = Σⱼ e^{−|yᵢ−yⱼ|} wⱼ Δξ,
///   asymᵢ = Σⱼ sign(i−j) e^{−|yᵢ−yⱼ|} wⱼ Δξ   (sign(0) = 0),
///
/// computed in O(N) by forward/backward scans.
pub fn kernel_convolve<F: Real>(
    y: &[F],
    w: &[F],
    dxi: F,
) -> Result<(Vec<F>, Vec<F>), LagrangianError> {
    for i in 1..y.len() {
        if y[i] < y[i - 1] {
            return Err(LagrangianError::NonMonotone { index: i });
        }
    }
    kernel_convolve_clamped(y, w, dxi)
}

/// Solver-internal variant: inverted neighbor pairs are treated as coincident
/// (gap 0).  Characteristics funnel into peaks and collisions, driving gaps
/// to zero exponentially; discretization error then pushes them a small
/// fraction of a cell below zero, which the exact solution's plateau maps to.
fn kernel_convolve_clamped<F: Real>(
    y: &[F],
    w: &[F],
    dxi: F,
) -> Result<(Vec<F>, Vec<F>), LagrangianError> {
    let n = y.len();
    if w.len() != n {
        return Err(LagrangianError::LengthMismatch);
    }
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    // Decay factors between neighbors; all ≤ 1 for nondecreasing y.
    let mut decay = vec![F::one(); n];
    for i in 1..n {
        let d = (y[i] - y[i - 1]).max(F::zero());
        decay[i] = (-d).exp();
    }

    let mut fwd = vec![F::zero(); n];
    fwd[0] = w[0] * dxi;
    for i in 1..n {
        fwd[i] = decay[i] * fwd[i - 1] + w[i] * dxi;
    }
    let mut bwd = vec![F::zero(); n];
    bwd[n - 1] = w[n - 1] * dxi;
    for i in (0..n - 1).rev() {
        bwd[i] = decay[i + 1] * bwd[i + 1] + w[i] * dxi;
    }

    let mut sym = vec![F::zero(); n];
    let mut asym = vec![F::zero(); n];
    for i in 0..n {
        let diag = w[i] * dxi;
        sym[i] = fwd[i] + bwd[i] - diag;
        asym[i] = fwd[i] - bwd[i];
    }
    Ok((sym, asym))
}

/// Initialize an identity-flow grid (y = ξ) from pointwise Eulerian data.
/// H_ξ is built from the constraint identity with y_ξ = 1 and H by cumulative
/// trapezoidal summation with H(ξ_min) = 0; λ starts at zero.
pub fn init_from_fields<F: Real>(
    t: F,
    spec: &GridSpec<F>,
    sample: impl Fn(F) -> FieldSample<F>,
) -> Result<LagrangianGrid<F>, LagrangianError> {
    if spec.n < 2 {
        return Err(LagrangianError::GridTooSmall(spec.n));
    }
    if !(spec.xi_max > spec.xi_min) {
        return Err(LagrangianError::BadBounds);
    }
    let n = spec.n;
    let dxi = (spec.xi_max - spec.xi_min) / F::of((n - 1) as f64);
    let mut g = LagrangianGrid {
        t,
        xi_min: spec.xi_min,
        dxi,
        y: vec![F::zero(); n],
        u: vec![F::zero(); n],
        h: vec![F::zero(); n],
        rbar: vec![F::zero(); n],
        sbar: vec![F::zero(); n],
        lambda: vec![F::zero(); n],
        y_xi: vec![F::one(); n],
        u_xi: vec![F::zero(); n],
        h_xi: vec![F::zero(); n],
        rbar_xi: vec![F::zero(); n],
        lambda_xi: vec![F::zero(); n],
        jump_nodes: Vec::new(),
    };
    for i in 0..n {
        let xi = spec.xi_min + dxi * F::of(i as f64);
        let fs = sample(xi);
        g.y[i] = xi;
        g.u[i] = fs.u;
        g.rbar[i] = fs.rho_bar;
        g.sbar[i] = fs.rho_bar_x;
        g.u_xi[i] = fs.u_x;
        g.rbar_xi[i] = fs.rho_bar_x; // r̄_ξ = s̄ y_ξ with y_ξ = 1
        g.h_xi[i] = fs.u * fs.u
            + fs.rho_bar * fs.rho_bar
            + fs.rho_bar_x * fs.rho_bar_x
            + fs.u_x * fs.u_x;
    }
    for i in 1..n {
        g.h[i] = g.h[i - 1] + (g.h_xi[i - 1] + g.h_xi[i]) * F::half() * dxi;
    }
    Ok(g)
}

/// Initialize from a multipeakon state; the grid must cover the peak support
/// with margin ≥ 20 on both sides.
pub fn init_from_peakons<F: Real>(
    state: &PeakonState<F>,
    spec: &GridSpec<F>,
) -> Result<LagrangianGrid<F>, LagrangianError> {
    if state.n() > 0 {
        let lo = state.q[0];
        let hi = state.q[state.n() - 1];
        let m = support_margin::<F>();
        if lo - spec.xi_min < m || spec.xi_max - hi < m {
            return Err(LagrangianError::InsufficientMargin {
                lo: lo.to_f64().unwrap_or(f64::NAN),
                hi: hi.to_f64().unwrap_or(f64::NAN),
                margin: m.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let mut g = init_from_fields(state.t, spec, |xi| {
        let s = state.sample(xi);
        FieldSample {
            u: s.u,
            u_x: s.u_x,
            rho_bar: s.rho_bar,
            rho_bar_x: s.rho_bar_x,
        }
    })?;
    // At a peak sitting exactly on a node, u_x and ρ̄_x jump; the sign(0) = 0
    // samples already hold the average of the one-sided limits, and the
    // energy density wants the average of the squared limits instead:
    // ⟨u_x²⟩ = u_x² + pᵢ², ⟨ρ̄_x²⟩ = ρ̄_x² + sᵢ².  This restores second-order
    // trapezoid accuracy of H at node-aligned peaks.
    let n = g.n();
    let mut corrected = false;
    for i in 0..state.n() {
        let pos = ((state.q[i] - spec.xi_min) / g.dxi)
            .to_f64()
            .unwrap_or(f64::NAN);
        let node = pos.round();
        if (pos - node).abs() < 1e-9 && node >= 0.0 && (node as usize) < n {
            let off = state.p[i] * state.p[i] + state.s[i] * state.s[i];
            g.h_xi[node as usize] += off;
            g.jump_nodes.push((node as usize, off));
            corrected = true;
        }
    }
    if corrected {
        for i in 1..n {
            g.h[i] = g.h[i - 1] + (g.h_xi[i - 1] + g.h_xi[i]) * F::half() * g.dxi;
        }
    }
    Ok(g)
}

impl<F: Real> GridSpec<F> {
    /// Grid for an antisymmetric pair with peaks at ±`a`, covering roughly
    /// [−half_width, half_width] with `n` nodes and the spacing snapped so
    /// that both peaks fall exactly on grid nodes (which makes the peak-node
    /// energy correction of [`init_from_peakons`] effective).
    pub fn aligned_symmetric_pair(a: F, half_width: F, n: usize) -> Result<Self, LagrangianError> {
        if n < 2 {
            return Err(LagrangianError::GridTooSmall(n));
        }
        if !(a > F::zero()) || !(half_width > a) {
            return Err(LagrangianError::BadBounds);
        }
        let dxi0 = F::two() * half_width / F::of((n - 1) as f64);
        let m = (F::two() * a / dxi0)
            .to_f64()
            .unwrap_or(f64::NAN)
            .round()
            .max(1.0);
        let dxi = F::two() * a / F::of(m);
        let k = ((n - 1 - m as usize) / 2) as f64;
        let xi_min = -a - F::of(k) * dxi;
        Ok(Self {
            xi_min,
            xi_max: xi_min + dxi * F::of((n - 1) as f64),
            n,
        })
    }
}

impl<F: Real> LagrangianGrid<F> {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn xi(&self, i: usize) -> F {
        self.xi_min + self.dxi * F::of(i as f64)
    }

    /// Evaluate the six nonlocal fields.  Trapezoid end weights are folded
    /// into the kernel densities.
    pub fn compute_integrals(&self) -> Result<IntegralBundle<F>, LagrangianError> {
        let n = self.n();
        let quarter = F::of(0.25);
        let trapezoid = |i: usize| {
            if i == 0 || i == n - 1 {
                F::half()
            } else {
                F::one()
            }
        };
        let mut wp = vec![F::zero(); n];
        let mut wr = vec![F::zero(); n];
        let mut ws = vec![F::zero(); n];
        for i in 0..n {
            let c = trapezoid(i);
            wp[i] = c
                * quarter
                * (self.h_xi[i]
                    + (self.u[i] * self.u[i] - F::two() * self.sbar[i] * self.sbar[i])
                        * self.y_xi[i]);
            wr[i] = c * F::half() * self.u_xi[i] * self.rbar[i];
            ws[i] = c * F::half() * self.u_xi[i] * self.sbar[i];
        }
        let (p, pa) = kernel_convolve_clamped(&self.y, &wp, self.dxi)?;
        let (r, ra) = kernel_convolve_clamped(&self.y, &wr, self.dxi)?;
        let (s, sa) = kernel_convolve_clamped(&self.y, &ws, self.dxi)?;
        let q = pa.into_iter().map(|v| -v).collect();
        let v = ra.into_iter().map(|x| -x).collect();
        let w = sa.into_iter().map(|x| -x).collect();
        Ok(IntegralBundle { p, q, r, s, v, w })
    }

    /// Time derivative of every field.
    pub fn rhs(&self) -> Result<GridDeriv<F>, LagrangianError> {
        let ib = self.compute_integrals()?;
        self.rhs_with(&ib)
    }

    fn rhs_with(&self, ib: &IntegralBundle<F>) -> Result<GridDeriv<F>, LagrangianError> {
        let n = self.n();
        let mut d = GridDeriv {
            y: vec![F::zero(); n],
            u: vec![F::zero(); n],
            h: vec![F::zero(); n],
            rbar: vec![F::zero(); n],
            sbar: vec![F::zero(); n],
            lambda: vec![F::zero(); n],
            y_xi: vec![F::zero(); n],
            u_xi: vec![F::zero(); n],
            h_xi: vec![F::zero(); n],
            rbar_xi: vec![F::zero(); n],
            lambda_xi: vec![F::zero(); n],
        };
        for i in 0..n {
            let (u, rb, sb) = (self.u[i], self.rbar[i], self.sbar[i]);
            let (p, q) = (ib.p[i], ib.q[i]);
            let sv = ib.s[i] + ib.v[i];
            let rw = ib.r[i] + ib.w[i];
            d.y[i] = u;
            d.u[i] = -q;
            d.h[i] = u * u * u - F::two() * p * u - F::two() * rb * sv;
            d.rbar[i] = -rw;
            d.sbar[i] = -sv;
            d.lambda[i] = rb;
            d.y_xi[i] = self.u_xi[i];
            d.u_xi[i] =
                F::half() * self.h_xi[i] + (F::half() * u * u - sb * sb - p) * self.y_xi[i];
            d.h_xi[i] = (F::of(3.0) * u * u - F::two() * p + F::two() * rb * rb) * self.u_xi[i]
                - F::two() * (q * u + rb * rw) * self.y_xi[i]
                - F::two() * sv * self.rbar_xi[i];
            d.rbar_xi[i] = sb * self.u_xi[i] - sv * self.y_xi[i];
            d.lambda_xi[i] = self.rbar_xi[i];
        }
        Ok(d)
    }

    fn axpy(&self, dt: F, d: &GridDeriv<F>) -> LagrangianGrid<F> {
        let ax = |base: &[F], dd: &[F]| -> Vec<F> {
            base.iter().zip(dd).map(|(&b, &v)| b + dt * v).collect()
        };
        LagrangianGrid {
            t: self.t + dt,
            xi_min: self.xi_min,
            dxi: self.dxi,
            y: ax(&self.y, &d.y),
            u: ax(&self.u, &d.u),
            h: ax(&self.h, &d.h),
            rbar: ax(&self.rbar, &d.rbar),
            sbar: ax(&self.sbar, &d.sbar),
            lambda: ax(&self.lambda, &d.lambda),
            y_xi: ax(&self.y_xi, &d.y_xi),
            u_xi: ax(&self.u_xi, &d.u_xi),
            h_xi: ax(&self.h_xi, &d.h_xi),
            rbar_xi: ax(&self.rbar_xi, &d.rbar_xi),
            lambda_xi: ax(&self.lambda_xi, &d.lambda_xi),
            jump_nodes: self.jump_nodes.clone(),
        }
    }

    /// One classic RK4 step of all fields.  No projection is applied;
    /// constraint drift is monitored elsewhere.
    pub fn step(&self, dt: F) -> Result<LagrangianGrid<F>, LagrangianError> {
        let k1 = self.rhs()?;
        let g2 = self.axpy(dt * F::half(), &k1);
        let k2 = g2.rhs()?;
        let g3 = self.axpy(dt * F::half(), &k2);
        let k3 = g3.rhs()?;
        let g4 = self.axpy(dt, &k3);
        let k4 = g4.rhs()?;

        let sixth = F::of(1.0 / 6.0);
        let third = F::of(1.0 / 3.0);
        let comb = |a: &[F], b: &[F], c: &[F], d: &[F], base: &[F]| -> Vec<F> {
            (0..base.len())
                .map(|i| base[i] + dt * (sixth * (a[i] + d[i]) + third * (b[i] + c[i])))
                .collect()
        };
        let next = LagrangianGrid {
            t: self.t + dt,
            xi_min: self.xi_min,
            dxi: self.dxi,
            y: comb(&k1.y, &k2.y, &k3.y, &k4.y, &self.y),
            u: comb(&k1.u, &k2.u, &k3.u, &k4.u, &self.u),
            h: comb(&k1.h, &k2.h, &k3.h, &k4.h, &self.h),
            rbar: comb(&k1.rbar, &k2.rbar, &k3.rbar, &k4.rbar, &self.rbar),
            sbar: comb(&k1.sbar, &k2.sbar, &k3.sbar, &k4.sbar, &self.sbar),
            lambda: comb(&k1.lambda, &k2.lambda, &k3.lambda, &k4.lambda, &self.lambda),
            y_xi: comb(&k1.y_xi, &k2.y_xi, &k3.y_xi, &k4.y_xi, &self.y_xi),
            u_xi: comb(&k1.u_xi, &k2.u_xi, &k3.u_xi, &k4.u_xi, &self.u_xi),
            h_xi: comb(&k1.h_xi, &k2.h_xi, &k3.h_xi, &k4.h_xi, &self.h_xi),
            rbar_xi: comb(&k1.rbar_xi, &k2.rbar_xi, &k3.rbar_xi, &k4.rbar_xi, &self.rbar_xi),
            lambda_xi: comb(
                &k1.lambda_xi,
                &k2.lambda_xi,
                &k3.lambda_xi,
                &k4.lambda_xi,
                &self.lambda_xi,
            ),
            jump_nodes: self.jump_nodes.clone(),
        };

        let t = next.t.to_f64().unwrap_or(f64::NAN);
        if !next.u.iter().chain(&next.u_xi).chain(&next.h_xi).all(|v| v.is_finite()) {
            return Err(LagrangianError::NonFinite { t });
        }
        let amax = |v: &[F]| v.iter().fold(F::zero(), |a, &x| a.max(x.abs()));
        let before = amax(&self.u_xi);
        let after = amax(&next.u_xi);
        if before > F::one() && after > F::of(10.0) * before {
            return Err(LagrangianError::DerivativeBlowup { t });
        }
        Ok(next)
    }

    /// Max-norm residual of the constraint manifold, normalized by
    /// max(1, max H_ξ).  At nodes listed in `jump_nodes` the known constant
    /// offset of the identity is subtracted first.
    pub fn constraint_residual(&self) -> F {
        let mut res = F::zero();
        let mut hmax = F::one();
        for i in 0..self.n() {
            let off = self
                .jump_nodes
                .iter()
                .find(|&&(j, _)| j == i)
                .map(|&(_, v)| v)
                .unwrap_or_else(F::zero);
            let lhs = self.y_xi[i] * self.h_xi[i] - off;
            let rhs = (self.u[i] * self.u[i]
                + self.rbar[i] * self.rbar[i]
                + self.sbar[i] * self.sbar[i])
                * self.y_xi[i]
                * self.y_xi[i]
                + self.u_xi[i] * self.u_xi[i];
            res = res.max((lhs - rhs).abs());
            hmax = hmax.max(self.h_xi[i]);
        }
        res / hmax
    }

    fn central_diff(&self, field: &[F]) -> Vec<F> {
        let n = field.len();
        let mut d = vec![F::zero(); n];
        if n < 2 {
            return d;
        }
        let inv2 = F::one() / (F::two() * self.dxi);
        for i in 1..n - 1 {
            d[i] = (field[i + 1] - field[i - 1]) * inv2;
        }
        d[0] = (field[1] - field[0]) / self.dxi;
        d[n - 1] = (field[n - 1] - field[n - 2]) / self.dxi;
        d
    }

    /// The conserved density r = −s̄_ξ + r̄ y_ξ (with s̄_ξ by central
    /// differences) and the r̄_ξ = s̄ y_ξ consistency residual.
    pub fn compute_r(&self) -> RDiagnostics<F> {
        let sbar_xi = self.central_diff(&self.sbar);
        let rbar_xi_fd = self.central_diff(&self.rbar);
        let n = self.n();
        let mut r = vec![F::zero(); n];
        let mut cons = vec![F::zero(); n];
        for i in 0..n {
            r[i] = -sbar_xi[i] + self.rbar[i] * self.y_xi[i];
            cons[i] = rbar_xi_fd[i] - self.sbar[i] * self.y_xi[i];
        }
        RDiagnostics {
            r,
            rbar_consistency: cons,
        }
    }

    /// Node-wise Noether invariant I = U y_ξ² − U_ξξ + (y_ξξ/y_ξ) U_ξ + λ_ξ r
    /// with second derivatives by central differences of the evolved
    /// derivative fields.  Nodes with y_ξ < `mask_eps` (wave-breaking
    /// neighborhoods) and the boundary nodes are masked.
    pub fn pointwise_invariant(&self, mask_eps: F) -> Vec<Option<F>> {
        let n = self.n();
        let u_xixi = self.central_diff(&self.u_xi);
        let y_xixi = self.central_diff(&self.y_xi);
        let rd = self.compute_r();
        let mut out = vec![None; n];
        for i in 1..n.saturating_sub(1) {
            if self.y_xi[i] < mask_eps {
                continue;
            }
            let k = self.u[i] * self.y_xi[i] * self.y_xi[i] - u_xixi[i]
                + y_xixi[i] / self.y_xi[i] * self.u_xi[i];
            out[i] = Some(k + self.lambda_xi[i] * rd.r[i]);
        }
        out
    }

    /// Read the solution back to Eulerian variables on `x_grid` via
    /// x = y(ξ): binary search plus linear interpolation, leftmost node on
    /// plateaus, zero extension outside [y(ξ_min), y(ξ_max)].
    pub fn to_eulerian(&self, x_grid: &[F]) -> EulerianField<F> {
        let n = self.n();
        let mask = F::of(1e-6);
        // Running maximum keeps the search well-defined where gaps dip a
        // fraction of a cell below zero near peaks and collisions.
        let mut y = self.y.clone();
        for i in 1..n {
            y[i] = y[i].max(y[i - 1]);
        }
        let mut out = EulerianField {
            x: x_grid.to_vec(),
            u: vec![F::zero(); x_grid.len()],
            rho_bar: vec![F::zero(); x_grid.len()],
            rho_bar_x: vec![F::zero(); x_grid.len()],
            energy: vec![F::zero(); x_grid.len()],
        };
        for (k, &x) in x_grid.iter().enumerate() {
            if n == 0 || x < y[0] || x > y[n - 1] {
                continue; // zero extension
            }
            // First node with y >= x (leftmost match on plateaus).
            let idx = y.partition_point(|&v| v < x);
            let (i, theta) = if idx < n && y[idx] == x {
                (idx, F::zero())
            } else {
                let i = idx - 1;
                let den = y[i + 1] - y[i];
                let th = if den > F::zero() {
                    (x - y[i]) / den
                } else {
                    F::zero()
                };
                (i, th)
            };
            let lerp = |f: &[F]| {
                if theta == F::zero() || i + 1 >= n {
                    f[i]
                } else {
                    f[i] + theta * (f[i + 1] - f[i])
                }
            };
            out.u[k] = lerp(&self.u);
            out.rho_bar[k] = lerp(&self.rbar);
            out.rho_bar_x[k] = lerp(&self.sbar);
            let hx = lerp(&self.h_xi);
            let yx = lerp(&self.y_xi).max(mask);
            out.energy[k] = hx / yx;
        }
        out
    }
}
