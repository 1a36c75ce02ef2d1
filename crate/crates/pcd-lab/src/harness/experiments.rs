//! Experiment drivers. Every driver returns a report carrying its CSV table and
//! a pass flag; writing files is left to the caller.

use super::config::{ExperimentConfig, NoiseStart};
use crate::besov::{build_partition, holder_norm, resonant_weight, DyadicPartition};
use crate::error::{Error, Result};
use crate::io::{fmt_f, Csv};
use crate::lattice::{LatticeSpec, SpectralField, TrajectoryField};
use crate::ou::{coupled_ladder, MollifierProfile, OuMode, OuSampler};
use crate::paracalc::{duhamel_with, Quadrature};
use crate::renorm::{
    build_rough_distribution_with, compute_c1, compute_c2, compute_c2_both, compute_phi_eps, compute_phi_grid,
    rough_distance_terms, wick_square_snapshot, C2Variant, CounterFunction, RoughDistribution, SumSpec,
};
use crate::solver::{solve_direct, Forcing, SolveConfig};
use crate::stats::Moments;
use rayon::prelude::*;

/// `true` when every entry is strictly below its predecessor.
pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// `|a - b| / |b| < tol`.
pub fn within(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() < tol * b.abs()
}

#[derive(Clone, Debug)]
pub struct DivergenceRow {
    pub epsilon: f64,
    pub c1: f64,
    pub eps_c1: f64,
    pub c2_plain: f64,
    pub c2_block: f64,
    /// `C2(ε) - C2(2ε)` for the selected variant (`NaN` on the first row).
    pub dc2: f64,
}

#[derive(Clone, Debug)]
pub struct DivergenceReport {
    pub rows: Vec<DivergenceRow>,
    /// Relative change of `ε·C1` between the last two rows.
    pub c1_spread: f64,
    /// Relative change of `ΔC2` between the last two increments.
    pub c2_spread: f64,
    pub c1_stable: bool,
    pub c2_stable: bool,
}

impl DivergenceReport {
    pub fn pass(&self) -> bool {
        self.c1_stable && self.c2_stable
    }

    pub fn csv(&self) -> String {
        let mut c = Csv::new(&["epsilon", "c1", "eps_c1", "c2_plain", "c2_block", "dc2"]);
        for r in &self.rows {
            c.push(vec![fmt_f(r.epsilon), fmt_f(r.c1), fmt_f(r.eps_c1), fmt_f(r.c2_plain), fmt_f(r.c2_block), fmt_f(r.dc2)]);
        }
        c.render()
    }
}

/// `C1` along `c1_eps` and `C2` along `c2_eps` (both halving ladders), full-space sums.
pub fn divergence_table(
    dim: usize,
    profile: MollifierProfile,
    c1_eps: &[f64],
    c2_eps: &[f64],
    variant: C2Variant,
) -> Result<DivergenceReport> {
    let mut rows = Vec::new();
    let mut all: Vec<f64> = c1_eps.iter().chain(c2_eps).cloned().collect();
    all.sort_by(|a, b| b.partial_cmp(a).unwrap());
    all.dedup();
    let mut prev_c2: Option<f64> = None;
    for &eps in &all {
        let s = SumSpec::full(dim, eps, profile);
        let c1 = compute_c1(&s)?;
        let (c2_plain, c2_block) = if c2_eps.contains(&eps) { compute_c2_both(&s)? } else { (f64::NAN, f64::NAN) };
        let sel = match variant {
            C2Variant::Plain => c2_plain,
            C2Variant::Block => c2_block,
        };
        let dc2 = match prev_c2 {
            Some(p) if sel.is_finite() => sel - p,
            _ => f64::NAN,
        };
        if sel.is_finite() {
            prev_c2 = Some(sel);
        }
        rows.push(DivergenceRow { epsilon: eps, c1, eps_c1: eps * c1, c2_plain, c2_block, dc2 });
    }
    let ec: Vec<f64> = rows.iter().filter(|r| c1_eps.contains(&r.epsilon)).map(|r| r.eps_c1).collect();
    let d2: Vec<f64> = rows.iter().map(|r| r.dc2).filter(|v| v.is_finite()).collect();
    let spread = |v: &[f64]| {
        if v.len() < 2 {
            f64::NAN
        } else {
            let (a, b) = (v[v.len() - 1], v[v.len() - 2]);
            (a - b).abs() / b.abs()
        }
    };
    let c1_spread = spread(&ec);
    let c2_spread = spread(&d2);
    Ok(DivergenceReport { rows, c1_spread, c2_spread, c1_stable: c1_spread < 0.05, c2_stable: c2_spread < 0.10 })
}

#[derive(Clone, Debug)]
pub struct ResonantMeanRow {
    pub epsilon: f64,
    pub raw_mean: f64,
    pub raw_se: f64,
    pub subtracted_mean: f64,
    pub subtracted_se: f64,
    pub c2: f64,
    pub phi: f64,
}

#[derive(Clone, Debug)]
pub struct ResonantMeanReport {
    pub rows: Vec<ResonantMeanRow>,
    /// Increments of the raw MC mean between successive levels.
    pub raw_increments: Vec<f64>,
    /// Root-mean-square over replicas of the per-replica increments of the subtracted term.
    pub subtracted_increments: Vec<f64>,
    /// Raw increments positive with the last two within 10%.
    pub raw_stabilizing: bool,
    /// Subtracted increments strictly decreasing.
    pub subtracted_cauchy: bool,
}

impl ResonantMeanReport {
    pub fn pass(&self) -> bool {
        self.raw_stabilizing && self.subtracted_cauchy
    }

    pub fn csv(&self) -> String {
        let mut c = Csv::new(&["epsilon", "raw_mean", "raw_se", "subtracted_mean", "subtracted_se", "c2", "phi"]);
        for r in &self.rows {
            c.push(vec![
                fmt_f(r.epsilon),
                fmt_f(r.raw_mean),
                fmt_f(r.raw_se),
                fmt_f(r.subtracted_mean),
                fmt_f(r.subtracted_se),
                fmt_f(r.c2),
                fmt_f(r.phi),
            ]);
        }
        c.render()
    }
}

/// Spatial mean of `π_0(f, g)`: `Σ_k w0(|k|) f̂(k) conj(ĝ(k))`.
fn resonant_mean(f: &SpectralField, g: &SpectralField, w0: &[f64]) -> f64 {
    f.coeffs().iter().zip(g.coeffs()).zip(w0).map(|((a, b), w)| w * (a * b.conj()).re).sum()
}

/// Monte-Carlo mean of the spatial mean of `π_0(J(X^◇2), X^◇2)` at `t_end`, raw and
/// with `C2 + φ` subtracted, along a coupled `ε` ladder of stationary input.
#[allow(clippy::too_many_arguments)]
pub fn resonant_mean_study(
    spec: LatticeSpec,
    profile: MollifierProfile,
    epsilons: &[f64],
    t_end: f64,
    n_steps: usize,
    replicas: usize,
    seed: u64,
) -> Result<ResonantMeanReport> {
    let part = build_partition(spec);
    let geo = spec.geometry();
    let w0: Vec<f64> = geo.k2.iter().map(|&k2| resonant_weight((k2 as f64).sqrt(), part.j_max())).collect();
    let q = Quadrature::PiecewiseLinear;
    let mut consts = Vec::new();
    for &eps in epsilons {
        let c1 = compute_c1(&SumSpec::lattice(spec, eps, profile))?;
        let (c2, phi) = compute_phi_grid(spec, eps, profile, 0.0, t_end, n_steps, q)?;
        consts.push((c1, c2, phi.values()[n_steps]));
    }
    let sampler = OuSampler::new(spec, OuMode::Stationary, 0.0, profile, seed, 0)?;
    let samples: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let ladder = coupled_ladder(&sampler.with_stream(r as u64), epsilons, 0.0, t_end, n_steps)?;
            Ok(ladder
                .iter()
                .zip(&consts)
                .map(|(x, (c1, _, _))| {
                    let w = x.map(|s| wick_square_snapshot(s, *c1));
                    let jw = duhamel_with(&w, q);
                    resonant_mean(jw.last(), w.last(), &w0)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (e, &eps) in epsilons.iter().enumerate() {
        let (_, c2, phi) = consts[e];
        let raw: Moments = samples.iter().map(|s| s[e]).collect();
        let sub: Moments = samples.iter().map(|s| s[e] - c2 - phi).collect();
        rows.push(ResonantMeanRow {
            epsilon: eps,
            raw_mean: raw.mean(),
            raw_se: raw.std_err(),
            subtracted_mean: sub.mean(),
            subtracted_se: sub.std_err(),
            c2,
            phi,
        });
    }
    let raw_increments: Vec<f64> = rows.windows(2).map(|w| w[1].raw_mean - w[0].raw_mean).collect();
    let subtracted_increments: Vec<f64> = (1..epsilons.len())
        .map(|e| {
            let shift = consts[e].1 + consts[e].2 - consts[e - 1].1 - consts[e - 1].2;
            let m: Moments = samples.iter().map(|s| (s[e] - s[e - 1] - shift).powi(2)).collect();
            m.mean().sqrt()
        })
        .collect();
    let raw_stabilizing = raw_increments.iter().all(|&d| d > 0.0)
        && raw_increments.len() >= 2
        && within(raw_increments[raw_increments.len() - 1], raw_increments[raw_increments.len() - 2], 0.10);
    let subtracted_cauchy = strictly_decreasing(&subtracted_increments);
    Ok(ResonantMeanReport { rows, raw_increments, subtracted_increments, raw_stabilizing, subtracted_cauchy })
}

/// Counter-terms `(C1, C2, φ)` for one mollification level on the config grid.
pub fn counter_terms(cfg: &ExperimentConfig, eps: f64) -> Result<(f64, f64, CounterFunction)> {
    let spec = cfg.spec()?;
    let profile = cfg.profile()?;
    let n = cfg.n_steps();
    let sums = SumSpec::lattice(spec, eps, profile);
    let c1 = compute_c1(&sums)?;
    match cfg.noise.start {
        NoiseStart::Stationary => {
            let (c2, phi) = compute_phi_grid(spec, eps, profile, 0.0, cfg.grid.t_end, n, cfg.quadrature()?)?;
            let c2 = match cfg.c2_variant()? {
                C2Variant::Block => c2,
                C2Variant::Plain => compute_c2(&sums, C2Variant::Plain)?,
            };
            Ok((c1, c2, phi))
        }
        NoiseStart::ZeroStart => {
            let c2 = compute_c2(&sums, cfg.c2_variant()?)?;
            let times: Vec<f64> = (0..=n).map(|i| i as f64 * cfg.grid.dt).collect();
            Ok((c1, c2, compute_phi_eps(&times, &sums)?))
        }
    }
}

fn ladder(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<TrajectoryField>> {
    let sampler = OuSampler::new(cfg.spec()?, cfg.ou_mode(), 0.0, cfg.profile()?, seed, 0)?;
    coupled_ladder(&sampler, &cfg.noise.epsilons, 0.0, cfg.grid.t_end, cfg.n_steps())
}

#[derive(Clone, Debug)]
pub struct RoughCauchyRow {
    pub seed: u64,
    pub eps_coarse: f64,
    pub eps_fine: f64,
    pub terms: [f64; 7],
    pub distance: f64,
}

/// Rough distances between successive `ε` levels of one coupled ladder.
pub fn rough_cauchy(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<RoughCauchyRow>> {
    let spec = cfg.spec()?;
    let part = build_partition(spec);
    let k = cfg.rough_exponents()?;
    let q = cfg.quadrature()?;
    let xs = ladder(cfg, seed)?;
    let rough: Vec<RoughDistribution> = xs
        .iter()
        .zip(&cfg.noise.epsilons)
        .map(|(x, &eps)| {
            let (c1, c2, phi) = counter_terms(cfg, eps)?;
            build_rough_distribution_with(x, c1, c2, &phi, &part, k, q)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for i in 1..rough.len() {
        let terms = rough_distance_terms(&rough[i - 1], &rough[i], k, &part)?;
        rows.push(RoughCauchyRow {
            seed,
            eps_coarse: cfg.noise.epsilons[i - 1],
            eps_fine: cfg.noise.epsilons[i],
            terms,
            distance: terms.iter().sum(),
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct SolutionCauchyRow {
    pub seed: u64,
    pub eps_coarse: f64,
    pub eps_fine: f64,
    /// `sup_t ‖u^{ε}_t - u^{ε/2}_t‖_{C^{-z}}` over probe times.
    pub distance: f64,
    pub blowup: bool,
}

fn sup_distance(a: &TrajectoryField, b: &TrajectoryField, z: f64, every: usize, part: &DyadicPartition) -> Result<f64> {
    let mut d = 0.0f64;
    for i in (0..=a.n_steps()).step_by(every) {
        d = d.max(holder_norm(&a.snapshot(i).sub(b.snapshot(i))?, -z, part)?);
    }
    if a.n_steps() % every != 0 {
        d = d.max(holder_norm(&a.last().sub(b.last())?, -z, part)?);
    }
    Ok(d)
}

/// Direct solutions from `u0 = 0` driven by each level of one coupled ladder,
/// with counter-terms `(C1, C2)`, and the distances between successive levels.
pub fn solution_cauchy(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<SolutionCauchyRow>> {
    let spec = cfg.spec()?;
    let part = build_partition(spec);
    let scfg: SolveConfig = cfg.solve_config()?;
    let xs = ladder(cfg, seed)?;
    let mut sols = Vec::new();
    for (x, &eps) in xs.iter().zip(&cfg.noise.epsilons) {
        let sums = SumSpec::lattice(spec, eps, cfg.profile()?);
        let (c1, c2) = (compute_c1(&sums)?, compute_c2(&sums, cfg.c2_variant()?)?);
        let u0 = x.snapshot(0).clone();
        sols.push(solve_direct(&u0, Forcing::Linear(x), c1, c2, &scfg)?);
    }
    let mut rows = Vec::new();
    for i in 1..sols.len() {
        rows.push(SolutionCauchyRow {
            seed,
            eps_coarse: cfg.noise.epsilons[i - 1],
            eps_fine: cfg.noise.epsilons[i],
            distance: sup_distance(&sols[i - 1].u, &sols[i].u, scfg.z, cfg.solver.probe_every, &part)?,
            blowup: sols[i - 1].status != crate::solver::SolveStatus::Completed
                || sols[i].status != crate::solver::SolveStatus::Completed,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceReport {
    pub rough: Vec<RoughCauchyRow>,
    pub solution: Vec<SolutionCauchyRow>,
    /// Seeds whose rough distances decrease strictly.
    pub rough_monotone: Vec<(u64, bool)>,
    /// Seeds whose solution distances decrease strictly.
    pub solution_monotone: Vec<(u64, bool)>,
}

impl ConvergenceReport {
    /// Fraction of seeds with a monotone solution table.
    pub fn solution_fraction(&self) -> f64 {
        frac(&self.solution_monotone)
    }

    pub fn rough_fraction(&self) -> f64 {
        frac(&self.rough_monotone)
    }

    /// Every requested table is monotone for at least 4/5 of the seeds.
    pub fn pass(&self) -> bool {
        let ok = |v: &[(u64, bool)]| v.is_empty() || frac(v) >= 0.8;
        ok(&self.rough_monotone) && ok(&self.solution_monotone)
    }

    pub fn rough_csv(&self) -> String {
        let mut c = Csv::new(&[
            "seed", "eps_coarse", "eps_fine", "d_x", "d_wick2", "d_int_cube", "d_pi0_x", "d_res22", "d_res32", "d_phi",
            "distance",
        ]);
        for r in &self.rough {
            let mut row = vec![r.seed.to_string(), fmt_f(r.eps_coarse), fmt_f(r.eps_fine)];
            row.extend(r.terms.iter().map(|t| fmt_f(*t)));
            row.push(fmt_f(r.distance));
            c.push(row);
        }
        c.render()
    }

    pub fn solution_csv(&self) -> String {
        let mut c = Csv::new(&["seed", "eps_coarse", "eps_fine", "distance", "blowup"]);
        for r in &self.solution {
            c.push(vec![r.seed.to_string(), fmt_f(r.eps_coarse), fmt_f(r.eps_fine), fmt_f(r.distance), r.blowup.to_string()]);
        }
        c.render()
    }
}

fn frac(v: &[(u64, bool)]) -> f64 {
    if v.is_empty() {
        return 1.0;
    }
    v.iter().filter(|(_, ok)| *ok).count() as f64 / v.len() as f64
}

/// Coupled `ε`-halving Cauchy tables for the rough distribution and/or the
/// direct solution. Tables with fewer than three increments are reported but
/// not judged.
pub fn run_convergence(cfg: &ExperimentConfig, rough: bool, solution: bool) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let judge = cfg.noise.epsilons.len() >= 4;
    let seeds = cfg.noise.seeds.clone();
    let per_seed = seeds
        .par_iter()
        .map(|&seed| -> Result<(Vec<RoughCauchyRow>, Vec<SolutionCauchyRow>)> {
            let r = if rough { rough_cauchy(cfg, seed)? } else { Vec::new() };
            let s = if solution { solution_cauchy(cfg, seed)? } else { Vec::new() };
            Ok((r, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rep = ConvergenceReport::default();
    for (seed, (r, s)) in seeds.iter().zip(per_seed) {
        if judge && rough {
            let d: Vec<f64> = r.iter().map(|x| x.distance).collect();
            rep.rough_monotone.push((*seed, strictly_decreasing(&d)));
        }
        if judge && solution {
            let d: Vec<f64> = s.iter().map(|x| x.distance).collect();
            rep.solution_monotone.push((*seed, strictly_decreasing(&d) && s.iter().all(|x| !x.blowup)));
        }
        rep.rough.extend(r);
        rep.solution.extend(s);
    }
    Ok(rep)
}

/// Divergence table from the config's `ε` schedule (used for both constants).
pub fn run_divergence_demo(cfg: &ExperimentConfig) -> Result<DivergenceReport> {
    cfg.validate()?;
    let e = &cfg.noise.epsilons;
    if e.iter().any(|&x| x <= 0.0) {
        return Err(Error::Config("divergence demo needs epsilon > 0".into()));
    }
    divergence_table(cfg.lattice.dim, cfg.profile()?, e, e, cfg.c2_variant()?)
}
