//! Renormalization constants, the counter-function, diamond products, the
//! seven-component rough distribution and Monte-Carlo variance checks.
//!
//! Stochastic objects use the positive Duhamel integral `J = ∫_0^t P_{t-s}`.
//! Scalar counter-terms are subtracted on the mean channel (`k = 0`), which the
//! `_full` products keep.

use crate::besov::DyadicPartition;
use crate::error::{Error, Result};
use crate::lattice::{cube_full, pointwise_product_full, square_increments, LatticeSpec, SpectralField, TrajectoryField};
use crate::ou::{sample_ou, sample_ou_at, MollifierProfile, OuMode, OuSampler};
use crate::paracalc::{
    duhamel_with, para_diag, trajectory_profiles, weighted_seminorm, PairSet, Quadrature,
    WeightedSeminormSpec,
};
use crate::stats::{median, Moments};
use crate::sums::{c1_sum, grid_expectation, pair_bins, reduce};
use rayon::prelude::*;

pub use crate::sums::SumDomain;
pub use crate::sums::SumSpec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenormConstants {
    pub c1: f64,
    pub c2: f64,
    pub c_combined: f64,
    pub epsilon: f64,
    pub truncation: usize,
}

impl RenormConstants {
    pub fn new(c1: f64, c2: f64, epsilon: f64, truncation: usize) -> Self {
        Self { c1, c2, c_combined: 3.0 * (c1 - 3.0 * c2), epsilon, truncation }
    }
}

/// Which lattice sum defines `C_2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum C2Variant {
    Plain,
    /// Weighted by `Σ_{|i-j|≤1} θ_i θ_j(|k1+k2|)`, the variant matching `φ`.
    #[default]
    Block,
}

pub fn compute_c1(s: &SumSpec) -> Result<f64> {
    c1_sum(s)
}

/// `2 Σ G(k1) G(k2) [w0(|k1+k2|)] / (|k1|² + |k2|² + |k1+k2|²)`.
pub fn compute_c2(s: &SumSpec, variant: C2Variant) -> Result<f64> {
    let bins = pair_bins(s, false)?;
    let b = match variant {
        C2Variant::Plain => &bins.plain,
        C2Variant::Block => &bins.block,
    };
    Ok(reduce(b, |l| 1.0 / l))
}

/// Both `C_2` variants from one pass.
pub fn compute_c2_both(s: &SumSpec) -> Result<(f64, f64)> {
    let bins = pair_bins(s, false)?;
    Ok((reduce(&bins.plain, |l| 1.0 / l), reduce(&bins.block, |l| 1.0 / l)))
}

pub fn compute_constants(s: &SumSpec, variant: C2Variant) -> Result<RenormConstants> {
    Ok(RenormConstants::new(compute_c1(s)?, compute_c2(s, variant)?, s.epsilon, s.truncation))
}

/// `φ` sampled on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterFunction {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl CounterFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { times, values })
    }

    pub fn zero(times: Vec<f64>) -> Self {
        let values = vec![0.0; times.len()];
        Self { times, values }
    }

    pub fn zero_on(u: &TrajectoryField) -> Self {
        Self::zero(u.times())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn aligned_with(&self, u: &TrajectoryField) -> bool {
        self.times.len() == u.n_steps() + 1
            && (self.times[0] - u.t0()).abs() <= 1e-12 * (1.0 + u.t0().abs())
            && (self.times[self.times.len() - 1] - u.t1()).abs() <= 1e-12 * (1.0 + u.t1().abs())
    }

    pub fn seminorm(&self, spec: WeightedSeminormSpec) -> f64 {
        weighted_seminorm(&self.times, &self.values, spec)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.values.len() != other.values.len() {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { times: self.times.clone(), values })
    }

    /// The first `n + 1` samples.
    pub fn prefix(&self, n: usize) -> Self {
        Self { times: self.times[..=n].to_vec(), values: self.values[..=n].to_vec() }
    }
}

/// `φ(t) = -2 Σ θθ-weighted G1 G2 e^{-λt}/λ` with the continuous time kernel.
pub fn compute_phi_eps(times: &[f64], s: &SumSpec) -> Result<CounterFunction> {
    let bins = pair_bins(s, false)?;
    let values = times.iter().map(|&t| -reduce(&bins.block, |l| (-l * t).exp() / l)).collect();
    CounterFunction::new(times.to_vec(), values)
}

/// Smallest `|k1|² + |k2|² + |k1+k2|²` over surviving pairs, or `None`.
pub fn min_exponent(s: &SumSpec) -> Result<Option<usize>> {
    let bins = pair_bins(s, false)?;
    Ok(bins.block.iter().position(|&v| v != 0.0))
}

/// Counter-terms consistent with a time-discretized rough distribution built
/// from stationary input on `spec`: returns the lattice block-weighted `C_2`
/// and `φ_n = E[π_0(J(W), W)](t_n)(mean) - C_2`, where `J` is the discrete
/// Duhamel quadrature `q` with step `(t1 - t0)/n_steps`.
pub fn compute_phi_grid(
    spec: LatticeSpec,
    epsilon: f64,
    profile: MollifierProfile,
    t0: f64,
    t1: f64,
    n_steps: usize,
    q: Quadrature,
) -> Result<(f64, CounterFunction)> {
    let s = SumSpec::lattice(spec, epsilon, profile);
    let bins = pair_bins(&s, true)?;
    let c2 = reduce(&bins.block, |l| 1.0 / l);
    let h = (t1 - t0) / n_steps as f64;
    let e = grid_expectation(bins.grid.as_ref().expect("grid bins requested"), h, n_steps, q);
    let times = (0..=n_steps).map(|i| if i == n_steps { t1 } else { t0 + i as f64 * h }).collect();
    let values = e.iter().map(|v| v - c2).collect();
    Ok((c2, CounterFunction::new(times, values)?))
}

/// `X² - c1` per snapshot, subtraction on the mean channel.
pub fn wick_square(x: &TrajectoryField, c1: f64) -> TrajectoryField {
    x.map(|s| wick_square_snapshot(s, c1))
}

pub fn wick_square_snapshot(x: &SpectralField, c1: f64) -> SpectralField {
    pointwise_product_full(x, x).expect("same spec").add_mean(-c1)
}

/// `X³ - 3 c1 X` per snapshot.
pub fn diamond_cube(x: &TrajectoryField, c1: f64) -> TrajectoryField {
    x.map(|s| {
        let mut c = cube_full(s);
        c.add_scaled(-3.0 * c1, s).expect("same spec");
        c
    })
}

/// `J(X³ - 3 c1 X)`.
pub fn diamond_cube_integrated(x: &TrajectoryField, c1: f64) -> TrajectoryField {
    diamond_cube_integrated_with(x, c1, Quadrature::PiecewiseLinear)
}

pub fn diamond_cube_integrated_with(x: &TrajectoryField, c1: f64, q: Quadrature) -> TrajectoryField {
    duhamel_with(&diamond_cube(x, c1), q)
}

fn check_phi(phi: &CounterFunction, x: &TrajectoryField) -> Result<()> {
    if phi.aligned_with(x) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `π_0(J(X^◇2), X^◇2) - c2 - φ`.
pub fn resonant_diamond_22(
    x: &TrajectoryField,
    c1: f64,
    c2: f64,
    phi: &CounterFunction,
    part: &DyadicPartition,
) -> Result<TrajectoryField> {
    resonant_diamond_22_with(x, c1, c2, phi, part, Quadrature::PiecewiseLinear)
}

pub fn resonant_diamond_22_with(
    x: &TrajectoryField,
    c1: f64,
    c2: f64,
    phi: &CounterFunction,
    part: &DyadicPartition,
    q: Quadrature,
) -> Result<TrajectoryField> {
    check_phi(phi, x)?;
    let w = wick_square(x, c1);
    let jw = duhamel_with(&w, q);
    res22_from(&jw, &w, c2, phi, part)
}

fn res22_from(
    jw: &TrajectoryField,
    w: &TrajectoryField,
    c2: f64,
    phi: &CounterFunction,
    part: &DyadicPartition,
) -> Result<TrajectoryField> {
    let snaps = (0..=w.n_steps())
        .map(|i| Ok(para_diag(jw.snapshot(i), w.snapshot(i), part)?.add_mean(-c2 - phi.values[i])))
        .collect::<Result<Vec<_>>>()?;
    TrajectoryField::new(w.t0(), w.t1(), snaps)
}

/// `π_0(J(X^◇3), X^◇2) - 3 c2 X - 3 φ X`.
pub fn resonant_diamond_32(
    x: &TrajectoryField,
    c1: f64,
    c2: f64,
    phi: &CounterFunction,
    part: &DyadicPartition,
) -> Result<TrajectoryField> {
    check_phi(phi, x)?;
    let w = wick_square(x, c1);
    let y = diamond_cube_integrated(x, c1);
    res32_from(&y, &w, x, c2, phi, part)
}

fn res32_from(
    y: &TrajectoryField,
    w: &TrajectoryField,
    x: &TrajectoryField,
    c2: f64,
    phi: &CounterFunction,
    part: &DyadicPartition,
) -> Result<TrajectoryField> {
    let snaps = (0..=w.n_steps())
        .map(|i| {
            let mut r = para_diag(y.snapshot(i), w.snapshot(i), part)?;
            r.add_scaled(-3.0 * (c2 + phi.values[i]), x.snapshot(i))?;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    TrajectoryField::new(w.t0(), w.t1(), snaps)
}

/// `K = (δ, δ', ν, ρ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoughExponents {
    pub delta: f64,
    pub delta_prime: f64,
    pub nu: f64,
    pub rho: f64,
}

impl Default for RoughExponents {
    fn default() -> Self {
        Self { delta: 0.20, delta_prime: 0.04, nu: 0.10, rho: 0.05 }
    }
}

impl RoughExponents {
    pub fn new(delta: f64, delta_prime: f64, nu: f64, rho: f64) -> Result<Self> {
        let k = Self { delta, delta_prime, nu, rho };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_prime > 0.0 && 4.0 * self.delta_prime < self.delta) {
            return Err(Error::InvalidExponents(format!(
                "need 0 < 4δ' < δ, got δ = {}, δ' = {}",
                self.delta, self.delta_prime
            )));
        }
        WeightedSeminormSpec::new(self.nu, self.rho)?;
        Ok(())
    }

    pub fn seminorm(&self) -> WeightedSeminormSpec {
        WeightedSeminormSpec { nu: self.nu, rho: self.rho }
    }

    /// Space exponents of the six field components in the rough metric.
    pub fn space_exponents(&self) -> [f64; 6] {
        let d = self.delta;
        [-0.5 - d, -1.0 - d, 0.5 - d, -0.5 - d, -1.0 - d, -1.0 - d]
    }
}

/// The seven-component rough distribution with its metadata.
#[derive(Clone, Debug)]
pub struct RoughDistribution {
    /// `X, X^◇2, J(X^◇3), π_0(J(X^◇3), X), π_0(J(X^◇2), X^◇2) - b - φ,
    /// π_0(J(X^◇3), X^◇2) - 3bX - 3φX`.
    pub fields: [TrajectoryField; 6],
    pub phi: CounterFunction,
    pub exponents: RoughExponents,
    pub a: f64,
    pub b: f64,
    pub quadrature: Quadrature,
}

impl RoughDistribution {
    pub fn x(&self) -> &TrajectoryField {
        &self.fields[0]
    }

    pub fn wick2(&self) -> &TrajectoryField {
        &self.fields[1]
    }

    pub fn int_cube(&self) -> &TrajectoryField {
        &self.fields[2]
    }

    pub fn pi0_int_cube_x(&self) -> &TrajectoryField {
        &self.fields[3]
    }

    pub fn res22(&self) -> &TrajectoryField {
        &self.fields[4]
    }

    pub fn res32(&self) -> &TrajectoryField {
        &self.fields[5]
    }

    pub fn spec(&self) -> LatticeSpec {
        self.fields[0].spec()
    }

    /// Restriction to the first `n` time steps.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        let mut f = Vec::with_capacity(6);
        for c in &self.fields {
            f.push(c.prefix(n)?);
        }
        let fields: [TrajectoryField; 6] = f.try_into().expect("six components");
        Ok(Self { fields, phi: self.phi.prefix(n), ..self.clone() })
    }
}

/// Assembles the rough distribution of a regular `X` for counter-terms `(a, b, φ)`.
pub fn build_rough_distribution(
    x: &TrajectoryField,
    a: f64,
    b: f64,
    phi: &CounterFunction,
    part: &DyadicPartition,
    k: RoughExponents,
) -> Result<RoughDistribution> {
    build_rough_distribution_with(x, a, b, phi, part, k, Quadrature::PiecewiseLinear)
}

pub fn build_rough_distribution_with(
    x: &TrajectoryField,
    a: f64,
    b: f64,
    phi: &CounterFunction,
    part: &DyadicPartition,
    k: RoughExponents,
    q: Quadrature,
) -> Result<RoughDistribution> {
    k.validate()?;
    check_phi(phi, x)?;
    let w = wick_square(x, a);
    let y = diamond_cube_integrated_with(x, a, q);
    let jw = duhamel_with(&w, q);
    let c4 = y.zip_map(x, |u, v| para_diag(u, v, part))?;
    let c5 = res22_from(&jw, &w, b, phi, part)?;
    let c6 = res32_from(&y, &w, x, b, phi, part)?;
    Ok(RoughDistribution {
        fields: [x.clone(), w, y, c4, c5, c6],
        phi: phi.clone(),
        exponents: k,
        a,
        b,
        quadrature: q,
    })
}

/// The seven terms of the rough metric, in component order.
pub fn rough_distance_terms(
    a: &RoughDistribution,
    b: &RoughDistribution,
    k: RoughExponents,
    part: &DyadicPartition,
) -> Result<[f64; 7]> {
    let exps = k.space_exponents();
    let mut out = [0.0; 7];
    for i in 0..6 {
        let d = a.fields[i].sub(&b.fields[i]).map_err(|_| Error::GridMismatch)?;
        out[i] = trajectory_profiles(&d, PairSet::Dyadic, part)?.holder(k.delta_prime, exps[i]);
    }
    out[6] = a.phi.sub(&b.phi)?.seminorm(k.seminorm());
    Ok(out)
}

pub fn rough_distance(
    a: &RoughDistribution,
    b: &RoughDistribution,
    k: RoughExponents,
    part: &DyadicPartition,
) -> Result<f64> {
    Ok(rough_distance_terms(a, b, k, part)?.iter().sum())
}

/// Stochastic objects probed by [`mc_variance_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    X,
    Wick2,
    IntCube,
    Pi0IntCubeX,
    Res22,
    Res32,
}

impl Quantity {
    /// Spatial regularity exponent entering the bound shape.
    pub fn regularity(self) -> f64 {
        match self {
            Quantity::X => -0.5,
            Quantity::Wick2 => -1.0,
            Quantity::IntCube => 0.5,
            Quantity::Pi0IntCubeX => 0.0,
            Quantity::Res22 => 0.0,
            Quantity::Res32 => -0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct McVarianceConfig {
    pub spec: LatticeSpec,
    pub epsilon: f64,
    pub profile: MollifierProfile,
    pub seed: u64,
    pub replicas: usize,
    pub theta: f64,
    pub blocks: Vec<i32>,
    /// Lags `|t - s|`, each a multiple of the smallest.
    pub lags: Vec<f64>,
    /// Start time `s` (a multiple of the smallest lag).
    pub start: f64,
}

#[derive(Clone, Debug)]
pub struct McVarianceRow {
    pub q: i32,
    pub lag: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct McVarianceReport {
    pub rows: Vec<McVarianceRow>,
    pub max_ratio: f64,
    pub median_ratio: f64,
    /// `max_ratio / median_ratio ≤ 3`.
    pub bounded: bool,
}

impl McVarianceReport {
    pub fn csv(&self) -> String {
        let mut c = crate::io::Csv::new(&["q", "lag", "estimate", "std_err", "ratio"]);
        for r in &self.rows {
            c.push(vec![
                r.q.to_string(),
                crate::io::fmt_f(r.lag),
                crate::io::fmt_f(r.estimate),
                crate::io::fmt_f(r.std_err),
                crate::io::fmt_f(r.ratio),
            ]);
        }
        c.render()
    }
}

/// `‖Δ_q v‖²_{L²}` by Parseval.
fn block_energy(v: &SpectralField, q: i32, part: &DyadicPartition) -> f64 {
    part.block(q)
        .iter()
        .map(|&(i, w)| (v.coeffs()[i as usize] * w).norm_sqr())
        .sum()
}

/// Monte-Carlo estimate of `E‖Δ_q (Q_t - Q_s)‖²_{L²}` over a `(q, |t-s|)` grid
/// for stationary mollified input, with the ratio to `|t-s|^θ 2^{2q(2θ - α_Q)}`.
pub fn mc_variance_check(quantity: Quantity, cfg: &McVarianceConfig) -> Result<McVarianceReport> {
    if cfg.replicas == 0 || cfg.lags.is_empty() || cfg.blocks.is_empty() {
        return Err(Error::Config("mc_variance_check needs replicas, lags and blocks".into()));
    }
    let h = cfg.lags.iter().cloned().fold(f64::INFINITY, f64::min);
    let steps: Vec<usize> = cfg.lags.iter().map(|l| (l / h).round() as usize).collect();
    let base = (cfg.start / h).round() as usize;
    let n_steps = base + steps.iter().max().copied().unwrap_or(1);
    let part = crate::besov::build_partition(cfg.spec);
    let sums = SumSpec::lattice(cfg.spec, cfg.epsilon, cfg.profile);
    let c1 = compute_c1(&sums)?;
    let needs_pairs = matches!(quantity, Quantity::Res22 | Quantity::Res32);
    let (c2, phi) = if needs_pairs {
        let (c2, phi) = compute_phi_grid(
            cfg.spec,
            cfg.epsilon,
            cfg.profile,
            0.0,
            n_steps as f64 * h,
            n_steps,
            Quadrature::PiecewiseLinear,
        )?;
        (c2, Some(phi))
    } else {
        (0.0, None)
    };
    let sampler = OuSampler::new(cfg.spec, OuMode::Stationary, cfg.epsilon, cfg.profile, cfg.seed, 0)?;
    let per_replica = |r: usize| -> Result<Vec<f64>> {
        let stream = sampler.with_stream(r as u64);
        let diffs = if quantity == Quantity::Wick2 {
            // W_t - W_s = X_t² - X_s², and only the probed times are needed
            let mut times = vec![base as f64 * h];
            times.extend(steps.iter().map(|s| (base + s) as f64 * h));
            let snaps = sample_ou_at(&stream, &times)?;
            let later: Vec<&SpectralField> = snaps[1..].iter().collect();
            square_increments(&snaps[0], &later)?
        } else {
            let x = sample_ou(&stream, 0.0, n_steps as f64 * h, n_steps)?;
            let full = match quantity {
                Quantity::X | Quantity::Wick2 => x,
                Quantity::IntCube => diamond_cube_integrated(&x, c1),
                Quantity::Pi0IntCubeX => diamond_cube_integrated(&x, c1).zip_map(&x, |u, v| para_diag(u, v, &part))?,
                Quantity::Res22 => resonant_diamond_22(&x, c1, c2, phi.as_ref().unwrap(), &part)?,
                Quantity::Res32 => resonant_diamond_32(&x, c1, c2, phi.as_ref().unwrap(), &part)?,
            };
            let q0 = full.snapshot(base);
            steps.iter().map(|s| full.snapshot(base + s).sub(q0)).collect::<Result<Vec<_>>>()?
        };
        let mut out = Vec::with_capacity(steps.len() * cfg.blocks.len());
        for d in &diffs {
            for &q in &cfg.blocks {
                out.push(block_energy(d, q, &part));
            }
        }
        Ok(out)
    };
    let samples = (0..cfg.replicas)
        .into_par_iter()
        .map(per_replica)
        .collect::<Result<Vec<_>>>()?;
    let alpha = quantity.regularity();
    let mut rows = Vec::new();
    for (li, lag) in cfg.lags.iter().enumerate() {
        for (qi, &q) in cfg.blocks.iter().enumerate() {
            let m: Moments = samples.iter().map(|s| s[li * cfg.blocks.len() + qi]).collect();
            let shape = lag.powf(cfg.theta) * f64::powf(2.0, 2.0 * q as f64 * (2.0 * cfg.theta - alpha));
            rows.push(McVarianceRow { q, lag: *lag, estimate: m.mean(), std_err: m.std_err(), ratio: m.mean() / shape });
        }
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let median_ratio = median(&ratios);
    Ok(McVarianceReport { rows, max_ratio, median_ratio, bounded: max_ratio <= 3.0 * median_ratio })
}
