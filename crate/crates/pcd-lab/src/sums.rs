//! Lattice sums behind the renormalization constants.
//!
//! All pair sums have the form `Σ_{k1,k2} G(k1) G(k2) K(|k1|², |k2|², |k1+k2|²)`
//! with `G(k) = f(ε|k|)²/|k|²`. The summand is invariant under signed axis
//! permutations applied to both vectors, so `k1` runs over one representative
//! per orbit with the orbit size as weight. For fixed `k1` the contributions are
//! binned by the integer `λ = |k1|² + |k2|² + |k1+k2|²` (or by
//! `(|k1+k2|², |k1|² + |k2|²)` for the time-grid kernel), after which any kernel
//! is a cheap one-dimensional reduction.

use crate::besov::resonant_weight;
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::ou::MollifierProfile;
use crate::paracalc::{step_weights, Quadrature};
use crate::stats::KahanSum;

/// Where `k1`, `k2` and `k1 + k2` may live.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SumDomain {
    /// All of `Z^d`, restricted only by the mollifier support.
    Full,
    /// The retained modes of a lattice; `k1 + k2` must be retained too.
    Lattice(LatticeSpec),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SumSpec {
    pub dim: usize,
    pub epsilon: f64,
    pub profile: MollifierProfile,
    /// Radius `R` of the summation ball (ignored for [`SumDomain::Lattice`]).
    pub truncation: usize,
    pub domain: SumDomain,
}

impl SumSpec {
    /// Full-space sums on `T^dim` with the default radius `⌈S/ε⌉ + 1`.
    pub fn full(dim: usize, epsilon: f64, profile: MollifierProfile) -> Self {
        let truncation = if epsilon > 0.0 {
            (profile.support_radius() / epsilon).ceil() as usize + 1
        } else {
            0
        };
        Self { dim, epsilon, profile, truncation, domain: SumDomain::Full }
    }

    pub fn with_truncation(mut self, r: usize) -> Self {
        self.truncation = r;
        self
    }

    /// Sums restricted to the modes retained by `spec`.
    pub fn lattice(spec: LatticeSpec, epsilon: f64, profile: MollifierProfile) -> Self {
        Self { dim: spec.dim(), epsilon, profile, truncation: 0, domain: SumDomain::Lattice(spec) }
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) || !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidExponents(format!("epsilon {} / dim {}", self.epsilon, self.dim)));
        }
        if let SumDomain::Full = self.domain {
            let needed = if self.epsilon > 0.0 {
                self.profile.support_radius() / self.epsilon
            } else {
                f64::INFINITY
            };
            if (self.truncation as f64) < needed {
                return Err(Error::TruncationError { radius: self.truncation, needed });
            }
        }
        Ok(())
    }

    fn k_bound(&self) -> i64 {
        match self.domain {
            SumDomain::Full => self.truncation as i64,
            SumDomain::Lattice(spec) => spec.k_max(),
        }
    }

    fn in_domain(&self, k: &[i64; 3]) -> bool {
        match self.domain {
            SumDomain::Full => true,
            SumDomain::Lattice(spec) => {
                let m = spec.k_max();
                k.iter().all(|c| c.abs() <= m)
            }
        }
    }

    /// Every nonzero `k` in the domain with `G(k) > 0`, and `G(k)`.
    pub(crate) fn modes(&self) -> Vec<([i64; 3], f64)> {
        let b = self.k_bound();
        let r2 = b * b;
        let mut out = Vec::new();
        let range = |a: usize| if a < self.dim { -b..=b } else { 0..=0 };
        for x in range(0) {
            for y in range(1) {
                for z in range(2) {
                    let k = [x, y, z];
                    let k2 = x * x + y * y + z * z;
                    if k2 == 0 {
                        continue;
                    }
                    if matches!(self.domain, SumDomain::Full) && k2 > r2 {
                        continue;
                    }
                    let f = self.profile.at(self.epsilon, k2);
                    if f > 0.0 {
                        out.push((k, f * f / k2 as f64));
                    }
                }
            }
        }
        out
    }
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    match d {
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        _ => vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ],
    }
}

/// Size of the orbit of `k` under signed permutations of the first `d` axes.
pub(crate) fn orbit_size(k: &[i64; 3], d: usize) -> usize {
    let mut images = Vec::new();
    for p in permutations(d) {
        for signs in 0..(1u32 << d) {
            let mut im = [0i64; 3];
            for a in 0..d {
                let s = if signs >> a & 1 == 1 { -1 } else { 1 };
                im[a] = s * k[p[a]];
            }
            images.push(im);
        }
    }
    images.sort_unstable();
    images.dedup();
    images.len()
}

fn is_canonical(k: &[i64; 3], d: usize) -> bool {
    (0..d).all(|a| k[a] >= 0) && (1..d).all(|a| k[a - 1] <= k[a])
}

/// Binned pair sums.
pub(crate) struct PairBins {
    /// `Σ G1 G2` by `λ`.
    pub plain: Vec<f64>,
    /// `Σ G1 G2 w0(|k12|²)` by `λ`, with `w0` the resonant block weight.
    pub block: Vec<f64>,
    /// `Σ G1 G2 w0` by `(c, μ)`, `c = |k12|²`, `μ = |k1|² + |k2|²`, row-major in `c`.
    pub grid: Option<(Vec<f64>, usize)>,
}

pub(crate) fn pair_bins(s: &SumSpec, with_grid: bool) -> Result<PairBins> {
    s.check()?;
    let d = s.dim;
    let modes = s.modes();
    let max_k2 = modes.iter().map(|(k, _)| k.iter().map(|c| c * c).sum::<i64>()).max().unwrap_or(0) as usize;
    let max_c = 4 * max_k2;
    let max_lambda = 2 * max_k2 + max_c;
    let j_cover = (((max_c as f64).sqrt().max(1.0)).log2().ceil() as i32 + 2).max(1);
    let w0: Vec<f64> = (0..=max_c).map(|c| resonant_weight((c as f64).sqrt(), j_cover)).collect();
    let mut plain = vec![0.0; max_lambda + 1];
    let mut block = vec![0.0; max_lambda + 1];
    let mu_stride = 2 * max_k2 + 1;
    let mut grid = if with_grid { vec![0.0; (max_c + 1) * mu_stride] } else { Vec::new() };
    let list: Vec<([i64; 3], i64, f64)> =
        modes.iter().map(|(k, g)| (*k, k.iter().map(|c| c * c).sum::<i64>(), *g)).collect();
    let lattice = !matches!(s.domain, SumDomain::Full);
    for &(k1, a, g1) in list.iter().filter(|(k, _, _)| is_canonical(k, d)) {
        let wgt = orbit_size(&k1, d) as f64 * g1;
        for &(k2, b, g2) in &list {
            let dot = k1[0] * k2[0] + k1[1] * k2[1] + k1[2] * k2[2];
            let c = a + b + 2 * dot;
            if lattice && !s.in_domain(&[k1[0] + k2[0], k1[1] + k2[1], k1[2] + k2[2]]) {
                continue;
            }
            let lam = (a + b + c) as usize;
            let v = wgt * g2;
            plain[lam] += v;
            let vw = v * w0[c as usize];
            block[lam] += vw;
            if with_grid {
                grid[c as usize * mu_stride + (a + b) as usize] += vw;
            }
        }
    }
    Ok(PairBins { plain, block, grid: with_grid.then_some((grid, mu_stride)) })
}

/// `Σ_{k ≠ 0} f(ε|k|)²/|k|²` with compensated accumulation.
pub(crate) fn c1_sum(s: &SumSpec) -> Result<f64> {
    s.check()?;
    let mut acc = KahanSum::default();
    for (_, g) in s.modes() {
        acc.add(g);
    }
    Ok(acc.value())
}

/// `2 Σ_λ bins[λ] · kernel(λ)`.
pub(crate) fn reduce(bins: &[f64], kernel: impl Fn(f64) -> f64) -> f64 {
    let mut acc = KahanSum::default();
    for (lam, &v) in bins.iter().enumerate() {
        if v != 0.0 {
            acc.add(v * kernel(lam as f64));
        }
    }
    2.0 * acc.value()
}

/// `2 Σ G1 G2 w0 Q_n(c, μ)` for every grid time `n`, where `Q_n` is the
/// discrete analogue of `∫_0^{t_n} e^{-c(t_n - s)} e^{-μ(t_n - s)} ds` produced by
/// the Duhamel quadrature `q` with step `h` (stationary input).
pub(crate) fn grid_expectation(grid: &(Vec<f64>, usize), h: f64, n_steps: usize, q: Quadrature) -> Vec<f64> {
    let (data, stride) = grid;
    let mut acc = vec![KahanSum::default(); n_steps + 1];
    let rows = data.len() / stride;
    for c in 0..rows {
        let (e, wl, wr) = step_weights(c as f64, h, q);
        for mu in 0..*stride {
            let v = data[c * stride + mu];
            if v == 0.0 {
                continue;
            }
            let em = (-(mu as f64) * h).exp();
            let mut qn = 0.0;
            for a in acc.iter_mut().skip(1) {
                qn = e * em * qn + wl * em + wr;
                a.add(v * qn);
            }
        }
    }
    acc.iter().map(|a| 2.0 * a.value()).collect()
}
