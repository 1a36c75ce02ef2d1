//! Two solution routes for the renormalized cubic heat equation
//! `∂_t u = Δu - u³ + 3a u ∓ 9b u + ξ`:
//!
//! - [`solve_direct`]: exponential Euler (ETD1) stepping of the Galerkin system.
//! - [`picard_solve`]: fixed-point iteration of the paracontrolled map
//!   [`gamma_map`] on the ansatz `Φ = Y + B_<(Φ', X^◇2) + Φ^♯`, where `u = X + Φ`.
//!
//! Here `I = -∫_0^t P_{t-s}` so that `Y = I(X^◇3) = -J(X^◇3)`, with `J` the
//! positive Duhamel integral used by the rough distribution.

use std::collections::HashMap;

use crate::besov::{block_sup_norms, holder_from_blocks, holder_norm, DyadicPartition};
use crate::error::{Error, Result};
use crate::lattice::{
    cube_full, pointwise_product_full, to_physical, triple_product_full, SpectralField, TrajectoryField,
};
use crate::paracalc::{bony, duhamel_with, heat_apply, para_diag, para_lt, step_weights, time_pairs, HeatParams, PairSet, Quadrature};
use crate::renorm::{rough_distance, RoughDistribution};

/// `L = (δ, γ, κ, a, b, c, d, η)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlWeights {
    pub delta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub eta: f64,
}

impl Default for ControlWeights {
    fn default() -> Self {
        Self { delta: 0.05, gamma: 0.05, kappa: 0.10, a: 0.10, b: 0.05, c: 0.10, d: 0.05, eta: 0.08 }
    }
}

impl ControlWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.delta, self.gamma, self.kappa, self.a, self.b, self.c, self.d, self.eta];
        if all.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidExponents(format!("control weights must lie in [0, 1]: {all:?}")));
        }
        if 2.0 * self.d > self.c || 2.0 * self.b > self.a {
            return Err(Error::InvalidExponents(format!(
                "need 2d <= c and 2b <= a, got a = {}, b = {}, c = {}, d = {}",
                self.a, self.b, self.c, self.d
            )));
        }
        Ok(())
    }
}

/// Sign in front of the `9b u` counter-term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BSign {
    /// `-9b u`, matching `C = 3(C_1 - 3C_2)`.
    #[default]
    Minus,
    Plus,
}

impl BSign {
    fn factor(self) -> f64 {
        match self {
            BSign::Minus => -1.0,
            BSign::Plus => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveConfig {
    pub t_end: f64,
    pub dt: f64,
    pub z: f64,
    pub weights: ControlWeights,
    pub max_picard: usize,
    pub contraction_tol: f64,
    pub blowup_threshold: f64,
    pub b_sign: BSign,
    /// Disables `-u³` in [`solve_direct`] (linearized runs).
    pub cubic: bool,
    pub quadrature: Quadrature,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            t_end: 0.1,
            dt: 0.005,
            z: 0.6,
            weights: ControlWeights::default(),
            max_picard: 30,
            contraction_tol: 1e-10,
            blowup_threshold: 1e6,
            b_sign: BSign::Minus,
            cubic: true,
            quadrature: Quadrature::PiecewiseLinear,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidTime(format!("T = {}, dt = {}", self.t_end, self.dt)));
        }
        if !(self.z > 0.5 && self.z < 2.0 / 3.0) {
            return Err(Error::InvalidExponents(format!("z = {} outside (1/2, 2/3)", self.z)));
        }
        self.weights.validate()
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveStatus {
    Completed,
    /// Sup-norm exceeded the threshold at `t`; later snapshots are frozen.
    Blowup { t: f64 },
    Converged { iterations: usize },
    NoLocalSolution,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveStatus::Completed => write!(f, "completed"),
            SolveStatus::Blowup { t } => write!(f, "blowup({t})"),
            SolveStatus::Converged { iterations } => write!(f, "converged({iterations})"),
            SolveStatus::NoLocalSolution => write!(f, "no_local_solution"),
        }
    }
}

/// Additive forcing of [`solve_direct`].
#[derive(Clone, Copy, Debug)]
pub enum Forcing<'a> {
    /// A regular space-time forcing `ξ`, integrated with the configured quadrature.
    Source(&'a TrajectoryField),
    /// The linear solution `X` of `∂_t X = ΔX + ξ`; its exact per-step
    /// increment `X_{n+1} - e^{-|k|²h} X_n` enters the update.
    Linear(&'a TrajectoryField),
}

#[derive(Clone, Debug)]
pub struct DirectSolution {
    pub u: TrajectoryField,
    pub status: SolveStatus,
}

fn check_grid(u: &TrajectoryField, cfg: &SolveConfig) -> Result<()> {
    let n = cfg.n_steps();
    if u.n_steps() != n || (u.dt() - cfg.dt).abs() > 1e-9 * cfg.dt.max(1.0) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// ETD1 on `v = u - D` with the mass term in the integrating factor:
/// `v̂_{n+1} = e^{-λh} v̂_n + h φ_1(λh) (m D_n - u_n³)^`, `λ = |k|² - m`,
/// `m = 3a + s·9b`, `s = ±1` the counter-term sign. `D` is the forcing
/// (`Linear`) or the Duhamel integral of the source (`Source`).
pub fn solve_direct(
    u0: &SpectralField,
    forcing: Forcing<'_>,
    a: f64,
    b: f64,
    cfg: &SolveConfig,
) -> Result<DirectSolution> {
    cfg.validate()?;
    let f = match forcing {
        Forcing::Source(x) | Forcing::Linear(x) => x,
    };
    check_grid(f, cfg)?;
    if f.spec() != u0.spec() {
        return Err(Error::SpecMismatch);
    }
    let spec = u0.spec();
    let h = f.dt();
    let mass = 3.0 * a + cfg.b_sign.factor() * 9.0 * b;
    let mut cache: HashMap<i64, (f64, f64)> = HashMap::new();
    let w: Vec<(f64, f64)> = spec
        .geometry()
        .k2
        .iter()
        .map(|&k2| {
            *cache.entry(k2).or_insert_with(|| {
                let (e, wl, _) = step_weights(k2 as f64 - mass, h, Quadrature::LeftPoint);
                (e, wl)
            })
        })
        .collect();
    let driver = match forcing {
        Forcing::Source(xi) => duhamel_with(xi, cfg.quadrature),
        Forcing::Linear(x) => x.clone(),
    };
    let mut cur = u0.clone();
    let mut snaps = vec![cur.clone()];
    let mut status = SolveStatus::Completed;
    for n in 0..f.n_steps() {
        if status != SolveStatus::Completed {
            snaps.push(cur.clone());
            continue;
        }
        let cube = if cfg.cubic { cube_full(&cur) } else { SpectralField::zeros(spec) };
        let mut next = cur.clone();
        {
            let (d0, d1) = (driver.snapshot(n).coeffs(), driver.snapshot(n + 1).coeffs());
            let cv = cube.coeffs();
            let c = next.coeffs_mut();
            for i in 0..c.len() {
                let (e, wl) = w[i];
                c[i] = d1[i] + (c[i] - d0[i]) * e + (d0[i] * mass - cv[i]) * wl;
            }
        }
        let sup = to_physical(&next)?.max_abs();
        if !sup.is_finite() || sup > cfg.blowup_threshold {
            status = SolveStatus::Blowup { t: f.time(n + 1) };
            snaps.push(cur.clone());
            continue;
        }
        cur = next;
        snaps.push(cur.clone());
    }
    Ok(DirectSolution { u: TrajectoryField::new(f.t0(), f.t1(), snaps)?, status })
}

/// `(Φ, Φ', Φ^♯)` with its weights.
#[derive(Clone, Debug)]
pub struct ControlledDistribution {
    pub phi: TrajectoryField,
    pub gubinelli_derivative: TrajectoryField,
    pub remainder: TrajectoryField,
    pub weights: ControlWeights,
    pub z: f64,
}

impl ControlledDistribution {
    /// Assembles `Φ = Y + B_<(Φ', X^◇2) + Φ^♯` from the rough distribution.
    pub fn from_parts(
        prime: TrajectoryField,
        remainder: TrajectoryField,
        xx: &RoughDistribution,
        part: &DyadicPartition,
        weights: ControlWeights,
        z: f64,
    ) -> Result<Self> {
        let y = xx.int_cube().scale(-1.0);
        let bl = b_minus(&prime, xx.wick2(), part, xx.quadrature, para_lt)?;
        let phi = y.add(&bl)?.add(&remainder)?;
        Ok(Self { phi, gubinelli_derivative: prime, remainder, weights, z })
    }

    pub fn zero(xx: &RoughDistribution, weights: ControlWeights, z: f64) -> Self {
        let x = xx.x();
        let zero = TrajectoryField::zeros(x.spec(), x.t0(), x.t1(), x.n_steps()).expect("valid grid");
        let y = xx.int_cube().scale(-1.0);
        Self { phi: y, gubinelli_derivative: zero.clone(), remainder: zero, weights, z }
    }

    /// `max_i ‖Φ_i - Y_i - B_<(Φ', X^◇2)_i - Φ^♯_i‖ / max(1, ‖Φ‖)` on coefficients.
    pub fn identity_residual(&self, xx: &RoughDistribution, part: &DyadicPartition) -> Result<f64> {
        let y = xx.int_cube().scale(-1.0);
        let bl = b_minus(&self.gubinelli_derivative, xx.wick2(), part, xx.quadrature, para_lt)?;
        let r = self.phi.sub(&y)?.sub(&bl)?.sub(&self.remainder)?;
        Ok(r.max_abs() / self.phi.max_abs().max(1.0))
    }

    pub fn prefix(&self, n: usize) -> Result<Self> {
        Ok(Self {
            phi: self.phi.prefix(n)?,
            gubinelli_derivative: self.gubinelli_derivative.prefix(n)?,
            remainder: self.remainder.prefix(n)?,
            ..*self
        })
    }
}

/// Relative tolerance of the structural identity checked by [`gamma_map`].
pub const IDENTITY_TOL: f64 = 1e-8;

/// `-J(op(f, g))` per snapshot.
fn b_minus(
    f: &TrajectoryField,
    g: &TrajectoryField,
    part: &DyadicPartition,
    q: Quadrature,
    op: fn(&SpectralField, &SpectralField, &DyadicPartition) -> Result<SpectralField>,
) -> Result<TrajectoryField> {
    f.check_aligned(g)?;
    let p = f.zip_map(g, |a, b| op(a, b, part))?;
    Ok(duhamel_with(&p, q).scale(-1.0))
}

/// The `Φ`-independent pieces of [`gamma_map`].
#[derive(Clone, Debug)]
pub struct GammaContext {
    y: TrajectoryField,
    /// `J(X^◇2)`.
    jw: TrajectoryField,
    /// `3 I(Y²X) + 3 B_{0◇}(Y, X^◇2)`.
    fixed: TrajectoryField,
    q: Quadrature,
}

impl GammaContext {
    pub fn new(xx: &RoughDistribution, part: &DyadicPartition) -> Result<Self> {
        let q = xx.quadrature;
        let x = xx.x();
        let w = xx.wick2();
        let y = xx.int_cube().scale(-1.0);
        let jw = duhamel_with(w, q);
        // Y²X = π_0(Y,Y)X + 2π_<(π_<(Y,Y),X) + 2π_>(π_<(Y,Y),X) + 2Y π_0(Y,X) + 2R(Y,Y,X)
        // with π_0(Y, X) = -c4 taken from the rough distribution.
        let mut y2x = Vec::with_capacity(x.n_steps() + 1);
        for i in 0..=x.n_steps() {
            let (yi, xi) = (y.snapshot(i), x.snapshot(i));
            let yy = bony(yi, yi, part)?;
            let pyx = xx.pi0_int_cube_x().snapshot(i).scale(-1.0);
            let lx = bony(&yy.lt, xi, part)?;
            let ypyx = pointwise_product_full(yi, &pyx)?;
            let r = lx.diag.sub(&ypyx)?;
            let mut s = pointwise_product_full(&yy.diag, xi)?;
            s.add_scaled(2.0, &lx.lt)?;
            s.add_scaled(2.0, &lx.gt)?;
            s.add_scaled(2.0, &ypyx)?;
            s.add_scaled(2.0, &r)?;
            y2x.push(s);
        }
        let y2x = TrajectoryField::new(x.t0(), x.t1(), y2x)?;
        // B_{0◇}(Y, X^◇2) = J(c6 + 3φX)
        let b0d = xx.res32().map_indexed(|i, _, c6| {
            let mut s = c6.clone();
            s.add_scaled(3.0 * xx.phi.values()[i], x.snapshot(i)).expect("same spec");
            s
        });
        let fixed = duhamel_with(&y2x, q).scale(-3.0).axpy(3.0, &duhamel_with(&b0d, q))?;
        Ok(Self { y, jw, fixed, q })
    }
}

/// `X^◇(Φ')` in the telescoped form
/// `J(Φ'(c5 + φ) + π_0(J(π_<(Φ', W)), W) - Φ' π_0(J(W), W))`, `W = X^◇2`.
pub fn diamond_operator(
    prime: &TrajectoryField,
    xx: &RoughDistribution,
    ctx: &GammaContext,
    part: &DyadicPartition,
) -> Result<TrajectoryField> {
    let w = xx.wick2();
    let jl = duhamel_with(&prime.zip_map(w, |a, b| para_lt(a, b, part))?, ctx.q);
    let mut out = Vec::with_capacity(w.n_steps() + 1);
    for i in 0..=w.n_steps() {
        let (p, wi) = (prime.snapshot(i), w.snapshot(i));
        let c5 = xx.res22().snapshot(i).clone().add_mean(xx.phi.values()[i]);
        let mut s = pointwise_product_full(p, &c5)?;
        s.add_scaled(1.0, &para_diag(jl.snapshot(i), wi, part)?)?;
        let r = para_diag(ctx.jw.snapshot(i), wi, part)?;
        s.add_scaled(-1.0, &pointwise_product_full(p, &r)?)?;
        out.push(s);
    }
    Ok(duhamel_with(&TrajectoryField::new(w.t0(), w.t1(), out)?, ctx.q))
}

/// The three commutator terms of `X^◇(Φ')` at every snapshot `s`, with
/// `A_i = M_i(s) W_i` and `M_i(s)` the quadrature multiplier of node `i`:
/// `T2 = Σ_i (Φ'_i - Φ'_s) π_0(A_i, W_s)`,
/// `T3 = π_0(J(π_<(Φ', W))_s - Σ_i π_<(Φ'_i, A_i), W_s)`,
/// `T4 = π_0(Σ_i π_<(Φ'_i, A_i), W_s) - Σ_i Φ'_i π_0(A_i, W_s)`.
/// Quadratic in the number of steps; used to cross-check [`diamond_operator`].
pub fn diamond_commutator_terms(
    prime: &TrajectoryField,
    w: &TrajectoryField,
    q: Quadrature,
    part: &DyadicPartition,
) -> Result<[TrajectoryField; 3]> {
    prime.check_aligned(w)?;
    let h = w.dt();
    let jl = duhamel_with(&prime.zip_map(w, |a, b| para_lt(a, b, part))?, q);
    let (mut t2, mut t3, mut t4) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..=w.n_steps() {
        let ws = w.snapshot(s);
        let spec = ws.spec();
        let (mut a2, mut sum_lt, mut sum_pd) =
            (SpectralField::zeros(spec), SpectralField::zeros(spec), SpectralField::zeros(spec));
        for i in 0..=s {
            let ai = w.snapshot(i).apply_radial(|k2| crate::paracalc::quadrature_weight(q, k2 as f64, h, i, s));
            let pd = para_diag(&ai, ws, part)?;
            let dp = prime.snapshot(i).sub(prime.snapshot(s))?;
            a2.add_scaled(1.0, &pointwise_product_full(&dp, &pd)?)?;
            sum_lt.add_scaled(1.0, &para_lt(prime.snapshot(i), &ai, part)?)?;
            sum_pd.add_scaled(1.0, &pointwise_product_full(prime.snapshot(i), &pd)?)?;
        }
        t2.push(a2);
        t3.push(para_diag(&jl.snapshot(s).sub(&sum_lt)?, ws, part)?);
        t4.push(para_diag(&sum_lt, ws, part)?.sub(&sum_pd)?);
    }
    let mk = |v| TrajectoryField::new(w.t0(), w.t1(), v);
    Ok([mk(t2)?, mk(t3)?, mk(t4)?])
}

/// One application of the fixed-point map. Returns `Γ(Φ)` with
/// `Γ(Φ)' = 3Φ` and `Γ(Φ)^♯ = Γ(Φ) - Y - B_<(3Φ, X^◇2)`.
pub fn gamma_map(
    phi: &ControlledDistribution,
    xx: &RoughDistribution,
    psi: &TrajectoryField,
    part: &DyadicPartition,
) -> Result<ControlledDistribution> {
    let ctx = GammaContext::new(xx, part)?;
    gamma_map_with(phi, xx, psi, part, &ctx)
}

pub fn gamma_map_with(
    phi: &ControlledDistribution,
    xx: &RoughDistribution,
    psi: &TrajectoryField,
    part: &DyadicPartition,
    ctx: &GammaContext,
) -> Result<ControlledDistribution> {
    let x = xx.x();
    let w = xx.wick2();
    for t in [&phi.phi, &phi.gubinelli_derivative, &phi.remainder, psi, w] {
        if !x.aligned(t) || t.spec() != x.spec() {
            return Err(Error::GridMismatch);
        }
    }
    let residual = phi.identity_residual(xx, part)?;
    if !(residual <= IDENTITY_TOL) {
        return Err(Error::InvalidControlled { residual });
    }
    let q = ctx.q;
    let n = x.n_steps();
    // integrand of -Γ(Φ) + Y + Ψ + fixed terms, accumulated per snapshot under J
    let mut integrand = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let (p, xi, wi) = (phi.phi.snapshot(i), x.snapshot(i), w.snapshot(i));
        let sh = phi.remainder.snapshot(i);
        let th = p.sub(ctx.y.snapshot(i))?;
        let pw = bony(p, wi, part)?;
        let mut s = pw.lt.add(&pw.gt)?.scale(3.0);
        s.add_scaled(3.0, &para_diag(sh, wi, part)?)?;
        s.add_scaled(3.0, &triple_product_full(&th, &th, xi)?)?;
        s.add_scaled(6.0, &triple_product_full(&th, ctx.y.snapshot(i), xi)?)?;
        s.add_scaled(1.0, &cube_full(p))?;
        integrand.push(s);
    }
    let integrand = TrajectoryField::new(x.t0(), x.t1(), integrand)?;
    let xd = diamond_operator(&phi.gubinelli_derivative, xx, ctx, part)?;
    let gamma = ctx
        .y
        .add(psi)?
        .add(&ctx.fixed)?
        .axpy(1.0, &xd.scale(3.0))?
        .sub(&duhamel_with(&integrand, q))?;
    let prime = phi.phi.scale(3.0);
    let bl = b_minus(&prime, w, part, q, para_lt)?;
    let remainder = gamma.sub(&ctx.y)?.sub(&bl)?;
    Ok(ControlledDistribution { phi: gamma, gubinelli_derivative: prime, remainder, weights: phi.weights, z: phi.z })
}

/// `Ψ_t = P_{t - t0} u0` on the grid of `like`.
pub fn heat_flow(u0: &SpectralField, like: &TrajectoryField) -> Result<TrajectoryField> {
    let snaps = (0..=like.n_steps())
        .map(|i| Ok(heat_apply(u0, HeatParams::new(like.time(i) - like.t0())?)))
        .collect::<Result<Vec<_>>>()?;
    TrajectoryField::new(like.t0(), like.t1(), snaps)
}

/// The weighted star norms of a controlled distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlledNorms {
    pub remainder: f64,
    pub derivative: f64,
}

impl ControlledNorms {
    pub fn total(&self) -> f64 {
        self.remainder + self.derivative
    }
}

fn star_norms(prime: &TrajectoryField, sharp: &TrajectoryField, l: &ControlWeights, z: f64, part: &DyadicPartition) -> Result<ControlledNorms> {
    let t0 = sharp.t0();
    let rel = |i: usize| sharp.time(i) - t0;
    let sb = sharp.snapshots().iter().map(|s| block_sup_norms(s, part)).collect::<Result<Vec<_>>>()?;
    let pb = prime.snapshots().iter().map(|s| block_sup_norms(s, part)).collect::<Result<Vec<_>>>()?;
    let mut r_sup = 0.0f64;
    let mut p_sup = 0.0f64;
    for i in 1..sb.len() {
        let t = rel(i);
        let v = t.powf((1.0 + l.delta + z) / 2.0) * holder_from_blocks(&sb[i], 1.0 + l.delta)
            + t.powf(0.25 + (l.gamma + z) / 2.0) * holder_from_blocks(&sb[i], 0.5 + l.gamma)
            + t.powf((l.kappa + z) / 2.0) * holder_from_blocks(&sb[i], l.kappa);
        r_sup = r_sup.max(v);
        p_sup = p_sup.max(t.powf((l.eta + z) / 2.0) * holder_from_blocks(&pb[i], l.eta));
    }
    let mut r_inc = 0.0f64;
    let mut p_inc = 0.0f64;
    for (i, j) in time_pairs(sb.len(), PairSet::Dyadic) {
        if i == 0 {
            continue;
        }
        let (s, gap) = (rel(i), rel(j) - rel(i));
        let ds = block_sup_norms(&sharp.snapshot(j).sub(sharp.snapshot(i))?, part)?;
        r_inc = r_inc.max(s.powf((z + l.a) / 2.0) * holder_from_blocks(&ds, l.a - 2.0 * l.b) / gap.powf(l.b));
        let dp = block_sup_norms(&prime.snapshot(j).sub(prime.snapshot(i))?, part)?;
        p_inc = p_inc.max(s.powf((z + l.c) / 2.0) * holder_from_blocks(&dp, l.c - 2.0 * l.d) / gap.powf(l.d));
    }
    Ok(ControlledNorms { remainder: r_sup + r_inc, derivative: p_inc + p_sup })
}

/// `‖Φ^♯‖_{⋆,1,L,T}` and `‖Φ'‖_{⋆,2,L,T}` on the grid, skipping `t = t0`.
pub fn controlled_norms(phi: &ControlledDistribution, part: &DyadicPartition) -> Result<ControlledNorms> {
    star_norms(&phi.gubinelli_derivative, &phi.remainder, &phi.weights, phi.z, part)
}

/// `d_{L,T}(Φ_1, Φ_2) = ‖Φ'_1 - Φ'_2‖_⋆ + ‖Φ^♯_1 - Φ^♯_2‖_⋆`.
pub fn controlled_distance(
    p1: &ControlledDistribution,
    p2: &ControlledDistribution,
    part: &DyadicPartition,
) -> Result<f64> {
    let dp = p1.gubinelli_derivative.sub(&p2.gubinelli_derivative)?;
    let ds = p1.remainder.sub(&p2.remainder)?;
    Ok(star_norms(&dp, &ds, &p1.weights, p1.z, part)?.total())
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub phi: ControlledDistribution,
    pub status: SolveStatus,
    /// Accepted horizon (after any bisection).
    pub t_accepted: f64,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl PicardSolution {
    /// `u = X + Φ` on the accepted horizon.
    pub fn solution(&self, xx: &RoughDistribution) -> Result<TrajectoryField> {
        let n = self.phi.phi.n_steps();
        xx.x().prefix(n)?.add(&self.phi.phi)
    }
}

struct Attempt {
    phi: ControlledDistribution,
    distances: Vec<f64>,
    ratios: Vec<f64>,
    converged: bool,
}

fn iterate(u0: &SpectralField, xx: &RoughDistribution, cfg: &SolveConfig, part: &DyadicPartition) -> Result<Attempt> {
    let ctx = GammaContext::new(xx, part)?;
    let psi = heat_flow(u0, xx.x())?;
    let y = xx.int_cube().scale(-1.0);
    let prime0 = y.add(&psi)?.scale(3.0);
    let mut cur = ControlledDistribution::from_parts(prime0, psi.clone(), xx, part, cfg.weights, cfg.z)?;
    let (mut distances, mut ratios) = (Vec::new(), Vec::new());
    let mut growing = 0;
    for _ in 0..cfg.max_picard {
        let next = gamma_map_with(&cur, xx, &psi, part, &ctx)?;
        let d = controlled_distance(&next, &cur, part)?;
        if let Some(&prev) = distances.last() {
            let r: f64 = d / prev;
            ratios.push(r);
            growing = if r >= 1.0 { growing + 1 } else { 0 };
        }
        distances.push(d);
        cur = next;
        if !d.is_finite() || cur.phi.max_abs() > cfg.blowup_threshold {
            return Ok(Attempt { phi: cur, distances, ratios, converged: false });
        }
        if d < cfg.contraction_tol {
            return Ok(Attempt { phi: cur, distances, ratios, converged: true });
        }
        if growing >= 2 {
            break;
        }
    }
    Ok(Attempt { phi: cur, distances, ratios, converged: false })
}

/// Picard iteration `Φ_{n+1} = Γ(Φ_n)` from `Φ_0' = 3(Y + Ψ)`, `Φ_0^♯ = Ψ`.
/// Without contraction the horizon is halved (down to `4·dt`).
pub fn picard_solve(u0: &SpectralField, xx: &RoughDistribution, cfg: &SolveConfig, part: &DyadicPartition) -> Result<PicardSolution> {
    cfg.validate()?;
    check_grid(xx.x(), cfg)?;
    let mut n = xx.x().n_steps();
    let mut sub = xx.clone();
    loop {
        let a = iterate(u0, &sub, cfg, part)?;
        if a.converged {
            let iterations = a.distances.len();
            return Ok(PicardSolution {
                t_accepted: sub.x().t1() - sub.x().t0(),
                phi: a.phi,
                status: SolveStatus::Converged { iterations },
                distances: a.distances,
                ratios: a.ratios,
            });
        }
        if n / 2 < 4 {
            return Err(Error::NoLocalSolution { t_min: sub.x().t1() - sub.x().t0(), ratios: a.ratios });
        }
        n /= 2;
        sub = xx.prefix(n)?;
    }
}

/// One point of the continuity estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuityPoint {
    /// `sup_t ‖Φ^A_t - Φ^B_t‖_{-z}`.
    pub d_out: f64,
    /// `d_{T,K}(X^A, X^B) + ‖u0^A - u0^B‖_{-z}`.
    pub d_in: f64,
}

pub fn continuity_probe(
    u0_a: &SpectralField,
    u0_b: &SpectralField,
    xx_a: &RoughDistribution,
    xx_b: &RoughDistribution,
    cfg: &SolveConfig,
    part: &DyadicPartition,
) -> Result<ContinuityPoint> {
    let sa = picard_solve(u0_a, xx_a, cfg, part)?;
    let sb = picard_solve(u0_b, xx_b, cfg, part)?;
    let n = sa.phi.phi.n_steps().min(sb.phi.phi.n_steps());
    let (pa, pb) = (sa.phi.phi.prefix(n)?, sb.phi.phi.prefix(n)?);
    let mut d_out = 0.0f64;
    for i in 0..=n {
        d_out = d_out.max(holder_norm(&pa.snapshot(i).sub(pb.snapshot(i))?, -cfg.z, part)?);
    }
    let rd = rough_distance(&xx_a.prefix(n)?, &xx_b.prefix(n)?, xx_a.exponents, part)?;
    let d_in = rd + holder_norm(&u0_a.sub(u0_b)?, -cfg.z, part)?;
    Ok(ContinuityPoint { d_out, d_in })
}
