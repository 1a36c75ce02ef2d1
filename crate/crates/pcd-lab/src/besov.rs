//! Littlewood–Paley partition, blocks `Δ_j`, Besov norms and empirical
//! regularity estimates.
//!
//! `χ` equals 1 on `[0, 3/4]` and vanishes from `4/3` on, with a `C^∞` step
//! `s(x) = g(x)/(g(x) + g(1-x))`, `g(x) = e^{-1/x}`. Then `θ(r) = χ(r/2) - χ(r)`
//! is supported in `[3/4, 8/3]`, so blocks more than one scale apart never
//! overlap and the telescoping sum gives an exact partition of unity.

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Padder, SpectralField};
use crate::stats::linear_fit;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub const CHI_INNER: f64 = 0.75;
pub const CHI_OUTER: f64 = 4.0 / 3.0;

/// `C^∞` monotone step from 0 (x ≤ 0) to 1 (x ≥ 1).
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

pub fn chi(r: f64) -> f64 {
    1.0 - smooth_step((r - CHI_INNER) / (CHI_OUTER - CHI_INNER))
}

pub fn theta(r: f64) -> f64 {
    chi(0.5 * r) - chi(r)
}

/// Weight of block `j ≥ -1` at radius `r`: `χ(r)` for `j = -1`, else `θ(2^{-j} r)`.
pub fn block_weight(j: i32, r: f64) -> f64 {
    if j < 0 {
        chi(r)
    } else {
        theta(r / f64::powi(2.0, j))
    }
}

/// `Σ_{|i-j| ≤ 1} θ_i θ_j` at radius `r`: the weight of the resonant product.
pub fn resonant_weight(r: f64, j_max: i32) -> f64 {
    let w: Vec<f64> = (-1..=j_max).map(|j| block_weight(j, r)).collect();
    let mut s = 0.0;
    for i in 0..w.len() {
        for j in i.saturating_sub(1)..(i + 2).min(w.len()) {
            s += w[i] * w[j];
        }
    }
    s
}

/// The partition evaluated on one lattice.
#[derive(Clone)]
pub struct DyadicPartition {
    spec: LatticeSpec,
    j_max: i32,
    blocks: Arc<Vec<Vec<(u32, f64)>>>,
}

impl std::fmt::Debug for DyadicPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DyadicPartition")
            .field("spec", &self.spec)
            .field("j_max", &self.j_max)
            .finish()
    }
}

pub fn j_max_for(spec: LatticeSpec) -> i32 {
    ((spec.n() as f64) * (spec.dim() as f64).sqrt()).log2().ceil() as i32
}

pub fn build_partition(spec: LatticeSpec) -> DyadicPartition {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<Vec<(u32, f64)>>>>>> =
        OnceLock::new();
    let j_max = j_max_for(spec);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let blocks = cache
        .lock()
        .expect("partition cache poisoned")
        .entry((spec.dim(), spec.n()))
        .or_insert_with(|| {
            let geo = spec.geometry();
            let mut blocks = vec![Vec::new(); (j_max + 2) as usize];
            for (i, &k2) in geo.k2.iter().enumerate() {
                if geo.nyquist[i] {
                    continue;
                }
                let r = (k2 as f64).sqrt();
                for j in -1..=j_max {
                    let w = block_weight(j, r);
                    if w != 0.0 {
                        blocks[(j + 1) as usize].push((i as u32, w));
                    }
                }
            }
            Arc::new(blocks)
        })
        .clone();
    DyadicPartition { spec, j_max, blocks }
}

impl DyadicPartition {
    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn chi(&self, r: f64) -> f64 {
        chi(r)
    }

    pub fn theta(&self, r: f64) -> f64 {
        theta(r)
    }

    pub fn weight(&self, j: i32, r: f64) -> f64 {
        block_weight(j, r)
    }

    /// Nonzero `(storage index, weight)` pairs of block `j`.
    pub fn block(&self, j: i32) -> &[(u32, f64)] {
        &self.blocks[(j + 1) as usize]
    }

    pub fn is_nonempty(&self, j: i32) -> bool {
        !self.block(j).is_empty()
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.j_max
    }

    pub(crate) fn check(&self, u: &SpectralField) -> Result<()> {
        if u.spec().dim() != self.spec.dim() || u.spec().n() != self.spec.n() {
            Err(Error::SpecMismatch)
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesovIndex {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovIndex {
    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        if !(p >= 1.0 && q >= 1.0) || alpha.is_nan() {
            return Err(Error::InvalidExponents(format!("B^{alpha}_{{{p},{q}}}")));
        }
        Ok(Self { alpha, p, q })
    }

    /// `C^α = B^α_{∞,∞}`.
    pub fn holder(alpha: f64) -> Self {
        Self { alpha, p: f64::INFINITY, q: f64::INFINITY }
    }
}

pub fn lp_block(u: &SpectralField, j: i32, part: &DyadicPartition) -> Result<SpectralField> {
    part.check(u)?;
    if j < -1 || j > part.j_max {
        return Err(Error::IndexError { j, j_max: part.j_max });
    }
    let mut out = SpectralField::zeros(u.spec());
    let c = out.coeffs_mut();
    for &(i, w) in part.block(j) {
        c[i as usize] = u.coeffs()[i as usize] * w;
    }
    Ok(out)
}

/// `L^p` norms (normalized measure) of every block on the collocation grid,
/// indexed by `j + 1`.
pub fn block_lp_norms(u: &SpectralField, p: f64, part: &DyadicPartition) -> Result<Vec<f64>> {
    part.check(u)?;
    let nb = (part.j_max + 2) as usize;
    if p == 2.0 {
        return Ok((0..nb)
            .map(|b| {
                part.blocks[b]
                    .iter()
                    .map(|&(i, w)| (u.coeffs()[i as usize] * w).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect());
    }
    let pad = Padder::new(u.spec(), u.spec().n());
    let norm = |v: &[f64]| -> f64 {
        if p.is_infinite() {
            v.iter().fold(0.0, |m, x| m.max(x.abs()))
        } else {
            (v.iter().map(|x| x.abs().powf(p)).sum::<f64>() / v.len() as f64).powf(1.0 / p)
        }
    };
    let mut out = vec![0.0; nb];
    let live: Vec<usize> = (0..nb).filter(|&b| !part.blocks[b].is_empty()).collect();
    for pair in live.chunks(2) {
        let (a, b) = pad.to_phys_weighted2(u, &part.blocks[pair[0]], pair.get(1).map(|&b| part.blocks[b].as_slice()));
        out[pair[0]] = norm(&a);
        if let (Some(b), Some(&ib)) = (b, pair.get(1)) {
            out[ib] = norm(&b);
        }
    }
    Ok(out)
}

/// Sup-norms of all blocks, indexed by `j + 1`.
pub fn block_sup_norms(u: &SpectralField, part: &DyadicPartition) -> Result<Vec<f64>> {
    block_lp_norms(u, f64::INFINITY, part)
}

/// `max_j 2^{jα} b_j` for block sup-norms `b` indexed by `j + 1`.
pub fn holder_from_blocks(b: &[f64], alpha: f64) -> f64 {
    b.iter()
        .enumerate()
        .map(|(i, &x)| if x == 0.0 { 0.0 } else { f64::powf(2.0, (i as f64 - 1.0) * alpha) * x })
        .fold(0.0, f64::max)
}

fn aggregate(b: &[f64], alpha: f64, q: f64) -> f64 {
    if q.is_infinite() {
        return holder_from_blocks(b, alpha);
    }
    b.iter()
        .enumerate()
        .map(|(i, &x)| (f64::powf(2.0, (i as f64 - 1.0) * alpha) * x).powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

pub fn besov_norm(u: &SpectralField, idx: BesovIndex, part: &DyadicPartition) -> Result<f64> {
    let b = block_lp_norms(u, idx.p, part)?;
    Ok(aggregate(&b, idx.alpha, idx.q))
}

/// The `C^α` proxy `sup_j 2^{jα}‖Δ_j u‖_∞`.
pub fn holder_norm(u: &SpectralField, alpha: f64, part: &DyadicPartition) -> Result<f64> {
    besov_norm(u, BesovIndex::holder(alpha), part)
}

/// Largest `j` whose plateau `θ(2^{-j}r) = 1`, `r ≤ 1.5·2^j`, fits inside the
/// retained cube `|k_i| < N/2`. Higher blocks are clipped by the lattice.
pub fn resolved_block(spec: LatticeSpec) -> i32 {
    let kmax = (spec.n() / 2 - 1) as f64;
    (kmax / 1.5).log2().floor() as i32
}

/// Fit window of [`estimate_regularity`]: `[2, j_r]`, widened down to three
/// blocks when the lattice is small, with `j_r` from [`resolved_block`].
pub fn regularity_window(spec: LatticeSpec) -> (i32, i32) {
    let hi = resolved_block(spec);
    ((hi - 2).clamp(0, 2), hi)
}

/// Negative least-squares slope of `log2 ‖Δ_j u‖_∞` over [`regularity_window`],
/// skipping blocks that vanish.
pub fn estimate_regularity(u: &SpectralField, part: &DyadicPartition) -> Result<f64> {
    let b = block_sup_norms(u, part)?;
    regularity_from_blocks(&b, regularity_window(part.spec()))
}

pub fn regularity_from_blocks(b: &[f64], (lo, hi): (i32, i32)) -> Result<f64> {
    let scale = b.iter().cloned().fold(0.0, f64::max);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for j in lo.max(-1)..=hi {
        let Some(&v) = b.get((j + 1) as usize) else { break };
        if v > 1e-12 * scale && v > 0.0 {
            xs.push(j as f64);
            ys.push(v.log2());
        }
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientScales { usable: xs.len() });
    }
    Ok(-linear_fit(&xs, &ys).slope)
}

/// CSV of block norms with columns `j,l2_norm,linf_norm`.
pub fn block_norms_csv(u: &SpectralField, part: &DyadicPartition) -> Result<String> {
    let l2 = block_lp_norms(u, 2.0, part)?;
    let linf = block_sup_norms(u, part)?;
    let mut csv = crate::io::Csv::new(&["j", "l2_norm", "linf_norm"]);
    for (i, (a, b)) in l2.iter().zip(&linf).enumerate() {
        csv.push(vec![(i as i32 - 1).to_string(), crate::io::fmt_f(*a), crate::io::fmt_f(*b)]);
    }
    Ok(csv.render())
}
