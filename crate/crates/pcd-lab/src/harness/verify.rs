//! A seeded battery of invariant checks across all modules.

use super::config::ExperimentConfig;
use crate::besov::{block_lp_norms, build_partition, lp_block, DyadicPartition};
use crate::error::Result;
use crate::io::{fmt_f, Csv};
use crate::lattice::{pointwise_product_full, to_physical, LatticeSpec, SpectralField, TrajectoryField};
use crate::ou::{covariance_oracle, sample_ou, synthetic_field, OuMode, OuSampler};
use crate::paracalc::{bony, duhamel, heat_apply, HeatParams};
use crate::renorm::{
    build_rough_distribution, compute_constants, compute_phi_eps, rough_distance, C2Variant, CounterFunction,
    RoughExponents, SumSpec,
};
use crate::solver::{picard_solve, solve_direct, Forcing, SolveConfig};
use crate::stats::Moments;
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect()
    }

    pub fn csv(&self) -> String {
        let mut c = Csv::new(&["check", "pass", "detail"]);
        for r in &self.checks {
            c.push(vec![r.name.to_string(), r.pass.to_string(), r.detail.replace(',', ";")]);
        }
        c.render()
    }
}

type Check = fn(&Ctx) -> Result<(bool, String)>;

struct Ctx {
    spec: LatticeSpec,
    part: DyadicPartition,
    seed: u64,
    replicas: usize,
    corrupt: bool,
}

impl Ctx {
    fn field(&self, salt: u64, s: f64) -> SpectralField {
        let mut u = synthetic_field(self.spec, self.seed.wrapping_add(salt), s);
        if self.corrupt && salt == 0 {
            // negative control: shift one mode after the fact
            let k = [1, 0, 0];
            let c = u.coeff(&k).expect("mode exists");
            u.set_mode(&k, c + Complex64::new(1e-3, 0.0)).expect("mode exists");
        }
        u
    }
}

fn rel(a: f64, b: f64) -> f64 {
    a / b.max(f64::MIN_POSITIVE)
}

fn partition_of_unity(c: &Ctx) -> Result<(bool, String)> {
    let mut sum = vec![0.0; c.spec.len()];
    for j in c.part.indices() {
        for &(i, w) in c.part.block(j) {
            sum[i as usize] += w;
        }
    }
    let geo = c.spec.geometry();
    let worst = sum
        .iter()
        .enumerate()
        .filter(|(i, _)| !geo.nyquist[*i])
        .map(|(_, s)| (s - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-12, format!("residual {}", fmt_f(worst))))
}

fn lp_reconstruction(c: &Ctx) -> Result<(bool, String)> {
    let u = synthetic_field(c.spec, c.seed, 1.0);
    let mut acc = SpectralField::zeros(c.spec);
    for j in c.part.indices() {
        acc.add_scaled(1.0, &lp_block(&u, j, &c.part)?)?;
    }
    let e = rel(acc.sub(&u)?.max_abs(), u.max_abs());
    Ok((e <= 1e-12, format!("relative residual {}", fmt_f(e))))
}

fn bony_identity(c: &Ctx) -> Result<(bool, String)> {
    let f = c.field(0, 1.0);
    let g = synthetic_field(c.spec, c.seed + 1, 2.0);
    let b = bony(&f, &g, &c.part)?;
    let sum = b.lt.add(&b.diag)?.add(&b.gt)?;
    let reference = pointwise_product_full(&synthetic_field(c.spec, c.seed, 1.0), &g)?;
    let e = rel(sum.sub(&reference)?.max_abs(), reference.max_abs());
    Ok((e <= 1e-12, format!("relative residual {}", fmt_f(e))))
}

fn parseval(c: &Ctx) -> Result<(bool, String)> {
    let u = synthetic_field(c.spec, c.seed + 2, 1.0);
    let b = block_lp_norms(&u, 2.0, &c.part)?;
    let direct = {
        let v = to_physical(&lp_block(&u, 1, &c.part)?)?;
        (v.values().iter().map(|x| x * x).sum::<f64>() / v.values().len() as f64).sqrt()
    };
    let spectral = b[2];
    let e = rel((spectral - direct).abs(), direct);
    Ok((e <= 1e-10, format!("block 1: spectral {} vs grid {}", fmt_f(spectral), fmt_f(direct))))
}

fn heat_semigroup(c: &Ctx) -> Result<(bool, String)> {
    let u = synthetic_field(c.spec, c.seed + 3, 1.0);
    let a = heat_apply(&heat_apply(&u, HeatParams::new(0.01)?), HeatParams::new(0.02)?);
    let b = heat_apply(&u, HeatParams::new(0.03)?);
    let e = rel(a.sub(&b)?.max_abs(), b.max_abs());
    Ok((e <= 1e-13, format!("relative residual {}", fmt_f(e))))
}

fn duhamel_constant(c: &Ctx) -> Result<(bool, String)> {
    let k = [1i64, 0, 0];
    let f = SpectralField::single_mode(c.spec, &k, Complex64::new(1.0, 0.0))?;
    let traj = TrajectoryField::constant(&f, 0.0, 0.5, 20)?;
    let j = duhamel(&traj);
    let exact = 1.0 - (-0.5f64).exp();
    let got = j.last().coeff(&k)?.re;
    let e = (got - exact).abs();
    Ok((e <= 1e-12, format!("{} vs {}", fmt_f(got), fmt_f(exact))))
}

fn ou_variance(c: &Ctx) -> Result<(bool, String)> {
    let f = crate::ou::MollifierProfile::new(1.0)?;
    let s = OuSampler::new(c.spec, OuMode::Stationary, 0.0, f, c.seed, 0)?;
    let k = [1i64, 0, 0];
    let mut m = Moments::default();
    for r in 0..c.replicas {
        let x = sample_ou(&s.with_stream(r as u64), 0.0, 0.1, 1)?;
        m.push(x.last().coeff(&k)?.norm_sqr());
    }
    let oracle = covariance_oracle(&k, 0.1, 0.1, OuMode::Stationary, 0.0, &f)?;
    let z = (m.mean() - oracle).abs() / m.std_err();
    Ok((z <= 4.0, format!("mean {} oracle {} ({:.2} se)", fmt_f(m.mean()), fmt_f(oracle), z)))
}

fn constants_identity(c: &Ctx) -> Result<(bool, String)> {
    let f = crate::ou::MollifierProfile::new(1.0)?;
    let k = compute_constants(&SumSpec::full(c.spec.dim(), 0.25, f), C2Variant::Block)?;
    let ok = k.c_combined == 3.0 * (k.c1 - 3.0 * k.c2) && k.c1 >= 0.0 && k.c2 >= 0.0;
    Ok((ok, format!("c1 {} c2 {}", fmt_f(k.c1), fmt_f(k.c2))))
}

fn phi_sign(c: &Ctx) -> Result<(bool, String)> {
    let f = crate::ou::MollifierProfile::new(1.0)?;
    let times: Vec<f64> = (1..=10).map(|i| 0.01 * i as f64).collect();
    let phi = compute_phi_eps(&times, &SumSpec::full(c.spec.dim(), 0.25, f))?;
    let v = phi.values();
    let ok = v.iter().all(|x| *x < 0.0) && v.windows(2).all(|w| w[1].abs() < w[0].abs());
    Ok((ok, format!("phi(0.01) {} phi(0.1) {}", fmt_f(v[0]), fmt_f(v[9]))))
}

fn rough_self_distance(c: &Ctx) -> Result<(bool, String)> {
    let f = crate::ou::MollifierProfile::new(1.0)?;
    let s = OuSampler::new(c.spec, OuMode::Stationary, 0.25, f, c.seed, 0)?;
    let x = sample_ou(&s, 0.0, 0.05, 5)?;
    let phi = CounterFunction::zero_on(&x);
    let xx = build_rough_distribution(&x, 1.0, 0.1, &phi, &c.part, RoughExponents::default())?;
    let d = rough_distance(&xx, &xx, xx.exponents, &c.part)?;
    Ok((d == 0.0, format!("d(A, A) = {}", fmt_f(d))))
}

fn direct_linear(c: &Ctx) -> Result<(bool, String)> {
    let k = [1i64, 0, 0];
    let u0 = SpectralField::single_mode(c.spec, &k, Complex64::new(0.5, 0.0))?;
    let cfg = SolveConfig { t_end: 0.2, dt: 0.01, cubic: false, ..SolveConfig::default() };
    let xi = TrajectoryField::zeros(c.spec, 0.0, 0.2, 20)?;
    let sol = solve_direct(&u0, Forcing::Source(&xi), 0.0, 0.0, &cfg)?;
    let got = sol.u.last().coeff(&k)?.re;
    let exact = 0.5 * (-0.2f64).exp();
    let e = (got - exact).abs();
    Ok((e <= 1e-12, format!("{} vs {}", fmt_f(got), fmt_f(exact))))
}

fn picard_identity(c: &Ctx) -> Result<(bool, String)> {
    let f = crate::ou::MollifierProfile::new(1.0)?;
    let s = OuSampler::new(c.spec, OuMode::Stationary, 0.5, f, c.seed, 0)?;
    let x = sample_ou(&s, 0.0, 0.05, 10)?;
    let phi = CounterFunction::zero_on(&x);
    let xx = build_rough_distribution(&x, 0.2, 0.01, &phi, &c.part, RoughExponents::default())?;
    let cfg = SolveConfig { t_end: 0.05, dt: 0.005, ..SolveConfig::default() };
    let u0 = synthetic_field(c.spec, c.seed + 5, 4.0).scale(0.1);
    let sol = picard_solve(&u0, &xx, &cfg, &c.part)?;
    let res = sol.phi.identity_residual(&xx.prefix(sol.phi.phi.n_steps())?, &c.part)?;
    Ok((res <= 1e-7, format!("{} residual {}", sol.status, fmt_f(res))))
}

const BATTERY: &[(&str, Check)] = &[
    ("partition_of_unity", partition_of_unity),
    ("lp_reconstruction", lp_reconstruction),
    ("bony_identity", bony_identity),
    ("parseval", parseval),
    ("heat_semigroup", heat_semigroup),
    ("duhamel_constant", duhamel_constant),
    ("ou_variance", ou_variance),
    ("constants_identity", constants_identity),
    ("phi_sign", phi_sign),
    ("rough_self_distance", rough_self_distance),
    ("direct_linear", direct_linear),
    ("picard_identity", picard_identity),
];

/// Runs the battery on the configured lattice. `corrupt` perturbs one input
/// after the reference is taken (negative control).
pub fn run_verify(cfg: &ExperimentConfig, corrupt: bool) -> Result<VerifyReport> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let ctx = Ctx {
        spec,
        part: build_partition(spec),
        seed: cfg.noise.seeds[0],
        replicas: cfg.noise.replicas.max(100),
        corrupt,
    };
    run_checks(&ctx, BATTERY)
}

fn run_checks(ctx: &Ctx, battery: &[(&'static str, Check)]) -> Result<VerifyReport> {
    let mut rep = VerifyReport::default();
    for (name, check) in battery {
        let (pass, detail) = match check(ctx) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        rep.checks.push(CheckResult { name, pass, detail });
    }
    Ok(rep)
}

/// The battery with no checks: trivially passes.
pub fn run_empty(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let spec = cfg.spec()?;
    let ctx = Ctx { spec, part: build_partition(spec), seed: 0, replicas: 0, corrupt: false };
    run_checks(&ctx, &[])
}
