//! Bony paraproducts, resonant commutators, the heat semigroup, Duhamel
//! integration and the time-weighted seminorms.
//!
//! Paraproducts are evaluated in physical space on the padded grid: every
//! nonempty Littlewood–Paley block is transformed once, the block products are
//! accumulated pointwise, and a single forward transform truncates back to the
//! stored modes. The `k = 0` output (spatial mean) is kept.

use crate::besov::{block_sup_norms, holder_from_blocks, DyadicPartition};
use crate::error::{Error, Result};
use crate::lattice::{pointwise_product_full, Padder, SpectralField, TrajectoryField};
use crate::stats::linear_fit;
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatParams {
    t: f64,
}

impl HeatParams {
    pub fn new(t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidTime(format!("heat time {t} must be finite and >= 0")));
        }
        Ok(Self { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

fn block_grids(u: &SpectralField, part: &DyadicPartition, pad: &Padder) -> Vec<Option<Vec<f64>>> {
    let nb = (part.j_max() + 2) as usize;
    let mut out: Vec<Option<Vec<f64>>> = vec![None; nb];
    let live: Vec<i32> = part
        .indices()
        .filter(|&j| part.block(j).iter().any(|&(i, _)| u.coeffs()[i as usize].norm_sqr() > 0.0))
        .collect();
    for pair in live.chunks(2) {
        let (a, b) = pad.to_phys_weighted2(u, part.block(pair[0]), pair.get(1).map(|&j| part.block(j)));
        out[(pair[0] + 1) as usize] = Some(a);
        if let (Some(b), Some(&j)) = (b, pair.get(1)) {
            out[(j + 1) as usize] = Some(b);
        }
    }
    out
}

fn check_pair(f: &SpectralField, g: &SpectralField, part: &DyadicPartition) -> Result<()> {
    if f.spec() != g.spec() {
        return Err(Error::SpecMismatch);
    }
    part.check(f)
}

fn add_product(acc: &mut [f64], a: &[f64], b: &[f64]) {
    for ((s, x), y) in acc.iter_mut().zip(a).zip(b) {
        *s += x * y;
    }
}

/// The three Bony pieces of `fg`.
#[derive(Clone, Debug)]
pub struct BonyParts {
    pub lt: SpectralField,
    pub diag: SpectralField,
    pub gt: SpectralField,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Piece {
    Lt,
    Diag,
    Gt,
}

fn paraproducts(
    f: &SpectralField,
    g: &SpectralField,
    part: &DyadicPartition,
    want: &[Piece],
) -> Result<Vec<SpectralField>> {
    check_pair(f, g, part)?;
    let pad = Padder::for_products(f.spec());
    let fb = block_grids(f, part, &pad);
    let gb = block_grids(g, part, &pad);
    let len = fb.iter().chain(&gb).flatten().map(|v| v.len()).next();
    let Some(len) = len else {
        return Ok(want.iter().map(|_| SpectralField::zeros(f.spec())).collect());
    };
    let nb = fb.len();
    let mut out = Vec::new();
    for piece in want {
        let mut acc = vec![0.0; len];
        match piece {
            Piece::Lt | Piece::Gt => {
                let (lo, hi) = if *piece == Piece::Lt { (&fb, &gb) } else { (&gb, &fb) };
                let mut partial = vec![0.0; len];
                let mut any = false;
                // index b = j + 1; S_{j-1} collects blocks i <= j - 2, i.e. index <= b - 2
                for b in 2..nb {
                    if let Some(l) = &lo[b - 2] {
                        partial.iter_mut().zip(l).for_each(|(s, x)| *s += x);
                        any = true;
                    }
                    if let (true, Some(h)) = (any, &hi[b]) {
                        add_product(&mut acc, &partial, h);
                    }
                }
            }
            Piece::Diag => {
                for b in 0..nb {
                    let Some(h) = &gb[b] else { continue };
                    for a in b.saturating_sub(1)..(b + 2).min(nb) {
                        if let Some(l) = &fb[a] {
                            add_product(&mut acc, l, h);
                        }
                    }
                }
            }
        }
        out.push(pad.from_phys(&acc));
    }
    Ok(out)
}

/// `π_<(f, g) = Σ_j S_{j-1} f · Δ_j g`.
pub fn para_lt(f: &SpectralField, g: &SpectralField, part: &DyadicPartition) -> Result<SpectralField> {
    Ok(paraproducts(f, g, part, &[Piece::Lt])?.remove(0))
}

/// `π_>(f, g) = π_<(g, f)`.
pub fn para_gt(f: &SpectralField, g: &SpectralField, part: &DyadicPartition) -> Result<SpectralField> {
    para_lt(g, f, part)
}

/// `π_0(f, g) = Σ_{|i-j| ≤ 1} Δ_i f · Δ_j g`.
pub fn para_diag(f: &SpectralField, g: &SpectralField, part: &DyadicPartition) -> Result<SpectralField> {
    Ok(paraproducts(f, g, part, &[Piece::Diag])?.remove(0))
}

/// All three pieces sharing one set of block transforms.
pub fn bony(f: &SpectralField, g: &SpectralField, part: &DyadicPartition) -> Result<BonyParts> {
    let mut v = paraproducts(f, g, part, &[Piece::Lt, Piece::Diag, Piece::Gt])?;
    let gt = v.pop().unwrap();
    let diag = v.pop().unwrap();
    let lt = v.pop().unwrap();
    Ok(BonyParts { lt, diag, gt })
}

/// `R(f, x, y) = π_0(π_<(f, x), y) - f·π_0(x, y)`.
pub fn commutator_r(
    f: &SpectralField,
    x: &SpectralField,
    y: &SpectralField,
    part: &DyadicPartition,
) -> Result<SpectralField> {
    let lhs = para_diag(&para_lt(f, x, part)?, y, part)?;
    let rhs = pointwise_product_full(f, &para_diag(x, y, part)?)?;
    lhs.sub(&rhs)
}

pub fn heat_apply(u: &SpectralField, hp: HeatParams) -> SpectralField {
    let t = hp.t;
    if t == 0.0 {
        return u.clone();
    }
    u.apply_radial(|k2| (-(k2 as f64) * t).exp())
}

/// `m(D) π_<(f, g) - π_<(f, m(D) g)` for a radial multiplier `m(|k|^2)`.
pub fn multiplier_para_commutator(
    f: &SpectralField,
    g: &SpectralField,
    m: impl Fn(i64) -> f64 + Copy,
    part: &DyadicPartition,
) -> Result<SpectralField> {
    let a = para_lt(f, g, part)?.apply_radial(m);
    let b = para_lt(f, &g.apply_radial(m), part)?;
    a.sub(&b)
}

/// `P_t π_<(f, g) - π_<(f, P_t g)`.
pub fn heat_para_commutator(
    f: &SpectralField,
    g: &SpectralField,
    hp: HeatParams,
    part: &DyadicPartition,
) -> Result<SpectralField> {
    let t = hp.t;
    multiplier_para_commutator(f, g, move |k2| (-(k2 as f64) * t).exp(), part)
}

/// Time quadrature used by [`duhamel_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// Exact integral of the heat kernel against the linear interpolant (second order).
    #[default]
    PiecewiseLinear,
    /// Exact integral against the left-endpoint value (first order, matches ETD1).
    LeftPoint,
}

/// `φ_1(z) = (1 - e^{-z})/z`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - z / 2.0 + z * z / 6.0
    } else {
        -f64::exp_m1(-z) / z
    }
}

/// `ψ(z) = ∫_0^1 τ e^{-zτ} dτ = (1 - e^{-z} - z e^{-z})/z^2`.
pub fn psi(z: f64) -> f64 {
    if z.abs() < 0.1 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 0..16 {
            sum += term / (n as f64 + 2.0);
            term *= -z / (n as f64 + 1.0);
        }
        sum
    } else {
        (-f64::exp_m1(-z) - z * (-z).exp()) / (z * z)
    }
}

/// One-step weights `(e^{-κh}, w_left, w_right)` so that
/// `I_{n+1} = e^{-κh} I_n + w_left f_n + w_right f_{n+1}`.
pub fn step_weights(kappa: f64, h: f64, q: Quadrature) -> (f64, f64, f64) {
    let z = kappa * h;
    let e = (-z).exp();
    match q {
        Quadrature::PiecewiseLinear => {
            let p = psi(z);
            (e, h * p, h * (phi1(z) - p))
        }
        Quadrature::LeftPoint => (e, h * phi1(z), 0.0),
    }
}

/// Coefficient of `f_i` in `I(f)(t_n)` at `|k|^2 = κ`.
pub fn quadrature_weight(q: Quadrature, kappa: f64, h: f64, i: usize, n: usize) -> f64 {
    if i > n || n == 0 {
        return 0.0;
    }
    let (_, wl, wr) = step_weights(kappa, h, q);
    let mut w = 0.0;
    if i < n {
        w += wl * (-kappa * h * (n - 1 - i) as f64).exp();
    }
    if i >= 1 {
        w += wr * (-kappa * h * (n - i) as f64).exp();
    }
    w
}

/// Per-storage-index step weights for one lattice and step size.
pub(crate) fn weight_table(spec: crate::lattice::LatticeSpec, h: f64, q: Quadrature) -> Vec<(f64, f64, f64)> {
    let geo = spec.geometry();
    let mut cache: HashMap<i64, (f64, f64, f64)> = HashMap::new();
    geo.k2
        .iter()
        .map(|&k2| *cache.entry(k2).or_insert_with(|| step_weights(k2 as f64, h, q)))
        .collect()
}

/// `I(f)(t) = ∫_{t0}^t P_{t-s} f_s ds` with the piecewise-linear quadrature.
pub fn duhamel(f: &TrajectoryField) -> TrajectoryField {
    duhamel_with(f, Quadrature::PiecewiseLinear)
}

pub fn duhamel_with(f: &TrajectoryField, q: Quadrature) -> TrajectoryField {
    let spec = f.spec();
    let w = weight_table(spec, f.dt(), q);
    let mut snaps = Vec::with_capacity(f.n_steps() + 1);
    let mut cur = SpectralField::zeros(spec);
    snaps.push(cur.clone());
    for n in 0..f.n_steps() {
        let a = f.snapshot(n).coeffs();
        let b = f.snapshot(n + 1).coeffs();
        let c = cur.coeffs_mut();
        for i in 0..c.len() {
            let (e, wl, wr) = w[i];
            c[i] = c[i] * e + a[i] * wl + b[i] * wr;
        }
        snaps.push(cur.clone());
    }
    TrajectoryField::new(f.t0(), f.t1(), snaps).expect("duhamel keeps the input grid")
}

fn per_snapshot(
    f: &TrajectoryField,
    g: &TrajectoryField,
    op: impl Fn(&SpectralField, &SpectralField) -> Result<SpectralField>,
) -> Result<TrajectoryField> {
    if f.spec() != g.spec() || !f.aligned(g) {
        return Err(Error::GridMismatch);
    }
    f.zip_map(g, op)
}

/// `B_<(f, g) = I(π_<(f, g))`.
pub fn b_lt(f: &TrajectoryField, g: &TrajectoryField, part: &DyadicPartition) -> Result<TrajectoryField> {
    b_lt_with(f, g, part, Quadrature::PiecewiseLinear)
}

/// `B_0(f, g) = I(π_0(f, g))`.
pub fn b_diag(f: &TrajectoryField, g: &TrajectoryField, part: &DyadicPartition) -> Result<TrajectoryField> {
    b_diag_with(f, g, part, Quadrature::PiecewiseLinear)
}

/// `B_>(f, g) = I(π_>(f, g))`.
pub fn b_gt(f: &TrajectoryField, g: &TrajectoryField, part: &DyadicPartition) -> Result<TrajectoryField> {
    b_gt_with(f, g, part, Quadrature::PiecewiseLinear)
}

pub fn b_lt_with(
    f: &TrajectoryField,
    g: &TrajectoryField,
    part: &DyadicPartition,
    q: Quadrature,
) -> Result<TrajectoryField> {
    Ok(duhamel_with(&per_snapshot(f, g, |a, b| para_lt(a, b, part))?, q))
}

pub fn b_diag_with(
    f: &TrajectoryField,
    g: &TrajectoryField,
    part: &DyadicPartition,
    q: Quadrature,
) -> Result<TrajectoryField> {
    Ok(duhamel_with(&per_snapshot(f, g, |a, b| para_diag(a, b, part))?, q))
}

pub fn b_gt_with(
    f: &TrajectoryField,
    g: &TrajectoryField,
    part: &DyadicPartition,
    q: Quadrature,
) -> Result<TrajectoryField> {
    Ok(duhamel_with(&per_snapshot(f, g, |a, b| para_gt(a, b, part))?, q))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedSeminormSpec {
    pub nu: f64,
    pub rho: f64,
}

impl WeightedSeminormSpec {
    pub fn new(nu: f64, rho: f64) -> Result<Self> {
        if !(nu >= 0.0 && (0.0..=1.0).contains(&rho)) {
            return Err(Error::InvalidExponents(format!("nu = {nu}, rho = {rho}")));
        }
        Ok(Self { nu, rho })
    }
}

/// Which grid pairs `s < t` enter a Hölder-in-time supremum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PairSet {
    /// Gaps `1, 2, 4, …`: `O(n log n)` pairs.
    #[default]
    Dyadic,
    /// All pairs.
    Dense,
}

pub fn time_pairs(points: usize, set: PairSet) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    match set {
        PairSet::Dyadic => {
            let mut gap = 1;
            while gap < points {
                out.extend((0..points - gap).map(|i| (i, i + gap)));
                gap *= 2;
            }
        }
        PairSet::Dense => {
            for i in 0..points {
                out.extend((i + 1..points).map(|j| (i, j)));
            }
        }
    }
    out
}

/// `sup_t t^ν|φ_t| + sup_{s<t} s^ν|φ_t - φ_s|/|t - s|^ρ` over the grid.
pub fn weighted_seminorm(times: &[f64], phi: &[f64], spec: WeightedSeminormSpec) -> f64 {
    weighted_seminorm_with(times, phi, spec, PairSet::Dyadic)
}

pub fn weighted_seminorm_with(
    times: &[f64],
    phi: &[f64],
    spec: WeightedSeminormSpec,
    set: PairSet,
) -> f64 {
    assert_eq!(times.len(), phi.len());
    let sup = times
        .iter()
        .zip(phi)
        .map(|(t, p)| t.powf(spec.nu) * p.abs())
        .fold(0.0, f64::max);
    let inc = time_pairs(times.len(), set)
        .into_iter()
        .map(|(i, j)| {
            times[i].powf(spec.nu) * (phi[j] - phi[i]).abs() / (times[j] - times[i]).powf(spec.rho)
        })
        .fold(0.0, f64::max);
    sup + inc
}

/// Block sup-norm profiles of every snapshot and of the increments over a pair set.
#[derive(Clone, Debug)]
pub struct TrajectoryProfiles {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub increments: Vec<(usize, usize, Vec<f64>)>,
}

pub fn trajectory_profiles(
    u: &TrajectoryField,
    set: PairSet,
    part: &DyadicPartition,
) -> Result<TrajectoryProfiles> {
    let snapshots = u
        .snapshots()
        .iter()
        .map(|s| block_sup_norms(s, part))
        .collect::<Result<Vec<_>>>()?;
    let increments = time_pairs(u.n_steps() + 1, set)
        .into_iter()
        .map(|(i, j)| {
            let d = u.snapshot(j).sub(u.snapshot(i))?;
            Ok((i, j, block_sup_norms(&d, part)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryProfiles { times: u.times(), snapshots, increments })
}

impl TrajectoryProfiles {
    /// `d_{α,β}` distance to zero.
    pub fn holder(&self, alpha_time: f64, beta_space: f64) -> f64 {
        let sup = self
            .snapshots
            .iter()
            .map(|b| holder_from_blocks(b, beta_space))
            .fold(0.0, f64::max);
        let inc = self
            .increments
            .iter()
            .map(|(i, j, b)| {
                holder_from_blocks(b, beta_space) / (self.times[*j] - self.times[*i]).powf(alpha_time)
            })
            .fold(0.0, f64::max);
        sup + inc
    }
}

/// `sup_{s<t} ‖u_t - u_s‖_β / |t - s|^α + sup_t ‖u_t‖_β` over dyadic pairs.
pub fn space_time_holder_norm(
    u: &TrajectoryField,
    alpha_time: f64,
    beta_space: f64,
    part: &DyadicPartition,
) -> Result<f64> {
    space_time_holder_norm_with(u, alpha_time, beta_space, part, PairSet::Dyadic)
}

pub fn space_time_holder_norm_with(
    u: &TrajectoryField,
    alpha_time: f64,
    beta_space: f64,
    part: &DyadicPartition,
    set: PairSet,
) -> Result<f64> {
    Ok(trajectory_profiles(u, set, part)?.holder(alpha_time, beta_space))
}

/// CSV with columns `scale,value,fit_slope,fit_r2` for a log-log regression.
pub fn regression_csv(scales: &[f64], values: &[f64]) -> String {
    let lx: Vec<f64> = scales.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|x| x.ln()).collect();
    let fit = linear_fit(&lx, &ly);
    let mut csv = crate::io::Csv::new(&["scale", "value", "fit_slope", "fit_r2"]);
    for (s, v) in scales.iter().zip(values) {
        csv.push(vec![
            crate::io::fmt_f(*s),
            crate::io::fmt_f(*v),
            crate::io::fmt_f(fit.slope),
            crate::io::fmt_f(fit.r2),
        ]);
    }
    csv.render()
}
