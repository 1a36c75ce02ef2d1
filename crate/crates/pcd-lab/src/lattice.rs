//! Truncated Fourier representation of real fields on the torus `T^d = (R/2πZ)^d`.
//!
//! Coefficients are stored in FFT order on the `N^d` grid, with the convention
//! `u(x) = Σ_k û(k) e^{ik·x}`. Modes with a component equal to `-N/2` (Nyquist)
//! are always zero so that hermitian symmetry is exact on the stored set.
//!
//! The `k = 0` slot carries the spatial mean. The lattice-level operations
//! [`to_spectral`] and [`pointwise_product`] project it to zero; the `_full`
//! variants keep it, which is what the renormalized (diamond) products need.

use crate::error::{Error, Result};
use crate::fft::fftn;
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Zero-padding factor used by nonlinear products.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dealias {
    None,
    ThreeHalves,
    Two,
}

impl Dealias {
    pub fn padded(self, n: usize) -> usize {
        match self {
            Dealias::None => n,
            Dealias::ThreeHalves => 3 * n / 2,
            Dealias::Two => 2 * n,
        }
    }

    pub fn factor(self) -> f64 {
        match self {
            Dealias::None => 1.0,
            Dealias::ThreeHalves => 1.5,
            Dealias::Two => 2.0,
        }
    }

    pub fn from_factor(f: f64) -> Result<Self> {
        if f == 1.0 {
            Ok(Dealias::None)
        } else if f == 1.5 {
            Ok(Dealias::ThreeHalves)
        } else if f == 2.0 {
            Ok(Dealias::Two)
        } else {
            Err(Error::InvalidSpec(format!("dealias factor {f} not in {{1, 3/2, 2}}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    dim: usize,
    n: usize,
    dealias: Dealias,
}

impl LatticeSpec {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidSpec(format!("dimension {dim} not in 1..=3")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidSpec(format!("N = {n} must be even and >= 8")));
        }
        Ok(Self { dim, n, dealias: Dealias::Two })
    }

    pub fn with_dealias(mut self, dealias: Dealias) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dealias(&self) -> Dealias {
        self.dealias
    }

    /// Number of stored coefficients, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn padded_n(&self) -> usize {
        self.dealias.padded(self.n)
    }

    pub fn geometry(&self) -> Arc<Geometry> {
        geometry(self.dim, self.n)
    }

    /// Storage index of wavevector `k`, or `None` if it is not on the lattice.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let n = self.n as i64;
        let mut idx = 0usize;
        for a in 0..self.dim {
            let ka = k.get(a).copied().unwrap_or(0);
            if ka < -n / 2 || ka >= n / 2 {
                return None;
            }
            idx = idx * self.n + ka.rem_euclid(n) as usize;
        }
        for a in self.dim..k.len() {
            if k[a] != 0 {
                return None;
            }
        }
        Some(idx)
    }

    /// Largest retained per-axis wavenumber magnitude.
    pub fn k_max(&self) -> i64 {
        self.n as i64 / 2 - 1
    }
}

/// Per-lattice lookup tables shared by all fields of the same `(d, N)`.
pub struct Geometry {
    pub dim: usize,
    pub n: usize,
    /// Wavevector of every storage index (unused axes are 0).
    pub kvec: Vec<[i64; 3]>,
    /// `|k|^2` of every storage index.
    pub k2: Vec<i64>,
    /// Storage index of `-k`.
    pub neg: Vec<usize>,
    /// True when some component equals `-N/2`.
    pub nyquist: Vec<bool>,
}

fn geometry(dim: usize, n: usize) -> Arc<Geometry> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Geometry>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("geometry cache poisoned");
    guard
        .entry((dim, n))
        .or_insert_with(|| Arc::new(build_geometry(dim, n)))
        .clone()
}

fn build_geometry(dim: usize, n: usize) -> Geometry {
    let len = n.pow(dim as u32);
    let half = n / 2;
    let mut kvec = Vec::with_capacity(len);
    let mut k2 = Vec::with_capacity(len);
    let mut neg = Vec::with_capacity(len);
    let mut nyquist = Vec::with_capacity(len);
    for idx in 0..len {
        let mut rem = idx;
        let mut k = [0i64; 3];
        let mut nidx = 0usize;
        let mut stride = 1usize;
        let mut nyq = false;
        for a in (0..dim).rev() {
            let i = rem % n;
            rem /= n;
            k[a] = if i < half { i as i64 } else { i as i64 - n as i64 };
            nyq |= i == half;
            nidx += ((n - i) % n) * stride;
            stride *= n;
        }
        kvec.push(k);
        k2.push(k.iter().map(|c| c * c).sum());
        neg.push(nidx);
        nyquist.push(nyq);
    }
    Geometry { dim, n, kvec, k2, neg, nyquist }
}

fn padded_map(dim: usize, n: usize, m: usize) -> Arc<Vec<usize>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, usize), Arc<Vec<usize>>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("padding cache poisoned");
    guard
        .entry((dim, n, m))
        .or_insert_with(|| {
            let geo = geometry(dim, n);
            let map = geo
                .kvec
                .iter()
                .map(|k| {
                    (0..dim).fold(0usize, |acc, a| acc * m + k[a].rem_euclid(m as i64) as usize)
                })
                .collect();
            Arc::new(map)
        })
        .clone()
}

const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    spec: LatticeSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(spec: LatticeSpec) -> Self {
        Self { spec, coeffs: vec![Complex64::default(); spec.len()] }
    }

    /// Validates length, finiteness and hermitian symmetry (relative tolerance
    /// 1e-10), then symmetrizes exactly and clears Nyquist modes.
    pub fn from_coeffs(spec: LatticeSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != spec.len() {
            return Err(Error::InvalidField(format!(
                "expected {} coefficients, got {}",
                spec.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidField("non-finite coefficient".into()));
        }
        let geo = spec.geometry();
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for (i, c) in coeffs.iter().enumerate() {
            if !geo.nyquist[i] {
                worst = worst.max((c - coeffs[geo.neg[i]].conj()).norm());
            }
        }
        if worst > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidField(format!(
                "hermitian symmetry violated by {worst:.3e} (scale {scale:.3e})"
            )));
        }
        let mut u = Self { spec, coeffs };
        u.symmetrize();
        Ok(u)
    }

    /// Builds a real field from a mode function evaluated on one representative
    /// of every `{k, -k}` pair; the partner gets the conjugate.
    pub fn from_modes(spec: LatticeSpec, mut f: impl FnMut(&[i64; 3]) -> Complex64) -> Self {
        let geo = spec.geometry();
        let mut coeffs = vec![Complex64::default(); spec.len()];
        for i in 0..coeffs.len() {
            if geo.nyquist[i] {
                continue;
            }
            let j = geo.neg[i];
            if j < i {
                continue;
            }
            let c = f(&geo.kvec[i]);
            if j == i {
                coeffs[i] = Complex64::new(c.re, 0.0);
            } else {
                coeffs[i] = c;
                coeffs[j] = c.conj();
            }
        }
        Self { spec, coeffs }
    }

    /// `amp·e_k + conj(amp)·e_{-k}`.
    pub fn single_mode(spec: LatticeSpec, k: &[i64], amp: Complex64) -> Result<Self> {
        let mut u = Self::zeros(spec);
        u.set_mode(k, amp)?;
        Ok(u)
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: &[i64]) -> Result<Complex64> {
        let i = self
            .spec
            .index_of(k)
            .ok_or_else(|| Error::InvalidField(format!("wavevector {k:?} off lattice")))?;
        Ok(self.coeffs[i])
    }

    /// Sets `û(k) = amp` and `û(-k) = conj(amp)`.
    pub fn set_mode(&mut self, k: &[i64], amp: Complex64) -> Result<()> {
        let i = self
            .spec
            .index_of(k)
            .ok_or_else(|| Error::InvalidField(format!("wavevector {k:?} off lattice")))?;
        let geo = self.spec.geometry();
        if geo.nyquist[i] {
            return Err(Error::InvalidField(format!("wavevector {k:?} is a Nyquist mode")));
        }
        let j = geo.neg[i];
        if i == j {
            self.coeffs[i] = Complex64::new(amp.re, 0.0);
        } else {
            self.coeffs[i] = amp;
            self.coeffs[j] = amp.conj();
        }
        Ok(())
    }

    /// Spatial mean (the real part of the `k = 0` coefficient).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.coeffs[0] = Complex64::new(mean, 0.0);
        self
    }

    pub fn add_mean(mut self, shift: f64) -> Self {
        self.coeffs[0].re += shift;
        self
    }

    pub fn without_mean(self) -> Self {
        self.with_mean(0.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { spec: self.spec, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    pub fn scale_in_place(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    /// `self += a·other`.
    pub fn add_scaled(&mut self, a: f64, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch);
        }
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        axpy(1.0, other, self)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        axpy(-1.0, other, self)
    }

    /// Multiplies every coefficient by `m(|k|^2)`.
    pub fn apply_radial(&self, m: impl Fn(i64) -> f64) -> Self {
        let geo = self.spec.geometry();
        let mut cache: HashMap<i64, f64> = HashMap::new();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&geo.k2)
            .map(|(c, &k2)| {
                let w = *cache.entry(k2).or_insert_with(|| m(k2));
                c * w
            })
            .collect();
        Self { spec: self.spec, coeffs }
    }

    /// Multiplies coefficient `i` by `w[i]`.
    pub fn apply_weights(&self, w: &[f64]) -> Self {
        let coeffs = self.coeffs.iter().zip(w).map(|(c, w)| c * w).collect();
        Self { spec: self.spec, coeffs }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `L^2` norm for the normalized measure (Parseval).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub(crate) fn from_raw(spec: LatticeSpec, coeffs: Vec<Complex64>) -> Self {
        Self { spec, coeffs }
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub(crate) fn symmetrize(&mut self) {
        let geo = self.spec.geometry();
        for i in 0..self.coeffs.len() {
            if geo.nyquist[i] {
                self.coeffs[i] = Complex64::default();
                continue;
            }
            let j = geo.neg[i];
            if j < i {
                continue;
            }
            if j == i {
                self.coeffs[i].im = 0.0;
            } else if self.coeffs[i] != self.coeffs[j].conj() {
                let avg = self.coeffs[i] * 0.5 + self.coeffs[j].conj() * 0.5;
                self.coeffs[i] = avg;
                self.coeffs[j] = avg.conj();
            }
        }
    }
}

/// Real values on the `N^d` collocation grid `x_n = 2πn/N`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    spec: LatticeSpec,
    values: Vec<f64>,
}

impl PhysicalField {
    pub fn new(spec: LatticeSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidField(format!(
                "expected {} grid values, got {}",
                spec.len(),
                values.len()
            )));
        }
        Ok(Self { spec, values })
    }

    /// Samples `f(x)` on the collocation grid.
    pub fn from_fn(spec: LatticeSpec, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let n = spec.n();
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let values = (0..spec.len())
            .map(|idx| {
                let mut rem = idx;
                let mut x = [0.0; 3];
                for a in (0..spec.dim()).rev() {
                    x[a] = (rem % n) as f64 * h;
                    rem /= n;
                }
                f(&x)
            })
            .collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Inverse transform onto the `N^d` grid.
pub fn to_physical(u: &SpectralField) -> Result<PhysicalField> {
    let spec = u.spec;
    let mut buf = u.coeffs.clone();
    fftn(&mut buf, spec.dim, spec.n, true);
    let re_max = buf.iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
    let im_max = buf.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if im_max > 1e-12 * re_max.max(f64::MIN_POSITIVE) && im_max > 1e-300 {
        return Err(Error::InvalidField(format!(
            "imaginary residue {im_max:.3e} relative to {re_max:.3e}"
        )));
    }
    Ok(PhysicalField { spec, values: buf.into_iter().map(|c| c.re).collect() })
}

/// Forward transform; keeps the mean in the `k = 0` slot.
pub fn to_spectral_full(v: &PhysicalField) -> Result<SpectralField> {
    if v.values.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidField("non-finite grid value".into()));
    }
    let spec = v.spec;
    let mut buf: Vec<Complex64> = v.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fftn(&mut buf, spec.dim, spec.n, false);
    let norm = 1.0 / spec.len() as f64;
    buf.iter_mut().for_each(|c| *c *= norm);
    let mut u = SpectralField { spec, coeffs: buf };
    u.symmetrize();
    Ok(u)
}

/// Forward transform with the mean removed (zero mode forced to 0).
pub fn to_spectral(v: &PhysicalField) -> Result<SpectralField> {
    Ok(to_spectral_full(v)?.without_mean())
}

/// Moves fields between the stored coefficients and an `m^d` padded grid.
pub(crate) struct Padder {
    spec: LatticeSpec,
    m: usize,
    map: Arc<Vec<usize>>,
}

impl Padder {
    pub(crate) fn new(spec: LatticeSpec, m: usize) -> Self {
        Self { spec, m, map: padded_map(spec.dim, spec.n, m) }
    }

    pub(crate) fn for_products(spec: LatticeSpec) -> Self {
        Self::new(spec, spec.padded_n())
    }

    pub(crate) fn for_cubes(spec: LatticeSpec) -> Self {
        Self::new(spec, spec.padded_n().max(2 * spec.n))
    }

    fn grid_len(&self) -> usize {
        self.m.pow(self.spec.dim as u32)
    }

    pub(crate) fn to_phys(&self, u: &SpectralField) -> Vec<f64> {
        let mut buf = vec![Complex64::default(); self.grid_len()];
        for (c, &p) in u.coeffs.iter().zip(self.map.iter()) {
            buf[p] = *c;
        }
        fftn(&mut buf, self.spec.dim, self.m, true);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Two real fields with one complex transform.
    pub(crate) fn to_phys2(&self, u: &SpectralField, v: &SpectralField) -> (Vec<f64>, Vec<f64>) {
        let mut buf = vec![Complex64::default(); self.grid_len()];
        for ((a, b), &p) in u.coeffs.iter().zip(&v.coeffs).zip(self.map.iter()) {
            buf[p] = Complex64::new(a.re - b.im, a.im + b.re);
        }
        fftn(&mut buf, self.spec.dim, self.m, true);
        buf.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Weighted copies `w_a·û` and `w_b·û` of one field, transformed together.
    pub(crate) fn to_phys_weighted2(
        &self,
        u: &SpectralField,
        wa: &[(u32, f64)],
        wb: Option<&[(u32, f64)]>,
    ) -> (Vec<f64>, Option<Vec<f64>>) {
        let mut buf = vec![Complex64::default(); self.grid_len()];
        for &(i, w) in wa {
            buf[self.map[i as usize]] += u.coeffs[i as usize] * w;
        }
        if let Some(wb) = wb {
            let iu = Complex64::new(0.0, 1.0);
            for &(i, w) in wb {
                buf[self.map[i as usize]] += iu * u.coeffs[i as usize] * w;
            }
        }
        fftn(&mut buf, self.spec.dim, self.m, true);
        if wb.is_some() {
            let (a, b) = buf.into_iter().map(|c| (c.re, c.im)).unzip();
            (a, Some(b))
        } else {
            (buf.into_iter().map(|c| c.re).collect(), None)
        }
    }

    /// Forward transforms of two padded real fields with one complex transform.
    pub(crate) fn from_phys2(&self, a: &[f64], b: &[f64]) -> (SpectralField, SpectralField) {
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        fftn(&mut buf, self.spec.dim, self.m, false);
        let norm = 1.0 / self.grid_len() as f64;
        let geo = self.spec.geometry();
        let (mut ca, mut cb) = (Vec::with_capacity(self.map.len()), Vec::with_capacity(self.map.len()));
        for (i, &p) in self.map.iter().enumerate() {
            let f = buf[p];
            let g = buf[self.map[geo.neg[i]]].conj();
            ca.push((f + g) * (0.5 * norm));
            cb.push((f - g) * Complex64::new(0.0, -0.5 * norm));
        }
        let mut u = SpectralField { spec: self.spec, coeffs: ca };
        let mut v = SpectralField { spec: self.spec, coeffs: cb };
        u.symmetrize();
        v.symmetrize();
        (u, v)
    }

    /// Forward transform of padded real values, truncated to the stored modes.
    pub(crate) fn from_phys(&self, vals: &[f64]) -> SpectralField {
        let mut buf: Vec<Complex64> = vals.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fftn(&mut buf, self.spec.dim, self.m, false);
        let norm = 1.0 / self.grid_len() as f64;
        let coeffs = self.map.iter().map(|&p| buf[p] * norm).collect();
        let mut u = SpectralField { spec: self.spec, coeffs };
        u.symmetrize();
        u
    }
}

fn check_same(u: &SpectralField, v: &SpectralField) -> Result<()> {
    if u.spec != v.spec {
        Err(Error::SpecMismatch)
    } else {
        Ok(())
    }
}

/// Dealiased product keeping the mean.
pub fn pointwise_product_full(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    check_same(u, v)?;
    // the paired transform leaks rounding from one factor into the other
    if u.is_zero() || v.is_zero() {
        return Ok(SpectralField::zeros(u.spec));
    }
    let pad = Padder::for_products(u.spec);
    let (a, b) = pad.to_phys2(u, v);
    let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    Ok(pad.from_phys(&prod))
}

/// Dealiased product, mean projected out.
pub fn pointwise_product(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    Ok(pointwise_product_full(u, v)?.without_mean())
}

/// `u_i² - base²` for each `u_i`, dealiased, means kept. Transforms are paired,
/// so this costs about half of separate squares.
pub fn square_increments(base: &SpectralField, later: &[&SpectralField]) -> Result<Vec<SpectralField>> {
    for u in later {
        check_same(base, u)?;
    }
    let pad = Padder::for_products(base.spec);
    let mut fields = vec![base];
    fields.extend_from_slice(later);
    let mut phys = Vec::with_capacity(fields.len());
    for pair in fields.chunks(2) {
        match pair {
            [u, v] => {
                let (a, b) = pad.to_phys2(u, v);
                phys.push(a);
                phys.push(b);
            }
            [u] => phys.push(pad.to_phys(u)),
            _ => unreachable!(),
        }
    }
    let b2: Vec<f64> = phys[0].iter().map(|x| x * x).collect();
    let incs: Vec<Vec<f64>> = phys[1..]
        .iter()
        .map(|v| v.iter().zip(&b2).map(|(x, y)| x * x - y).collect())
        .collect();
    let mut out = Vec::with_capacity(incs.len());
    for pair in incs.chunks(2) {
        match pair {
            [a, b] => {
                let (u, v) = pad.from_phys2(a, b);
                out.push(u);
                out.push(v);
            }
            [a] => out.push(pad.from_phys(a)),
            _ => unreachable!(),
        }
    }
    Ok(out)
}

/// Triple product `uvw` on a grid padded by at least 2, exact on the retained modes.
pub fn triple_product_full(
    u: &SpectralField,
    v: &SpectralField,
    w: &SpectralField,
) -> Result<SpectralField> {
    check_same(u, v)?;
    check_same(u, w)?;
    let pad = Padder::for_cubes(u.spec);
    let (a, b) = pad.to_phys2(u, v);
    let c = pad.to_phys(w);
    let prod: Vec<f64> = a.iter().zip(&b).zip(&c).map(|((x, y), z)| x * y * z).collect();
    Ok(pad.from_phys(&prod))
}

/// `u^3` computed in one shot on the factor-2 padded grid, mean kept.
pub fn cube_full(u: &SpectralField) -> SpectralField {
    let pad = Padder::for_cubes(u.spec);
    let a = pad.to_phys(u);
    let prod: Vec<f64> = a.iter().map(|x| x * x * x).collect();
    pad.from_phys(&prod)
}

/// `a·u + v`.
pub fn axpy(a: f64, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    check_same(u, v)?;
    let coeffs = u.coeffs.iter().zip(&v.coeffs).map(|(x, y)| x * a + y).collect();
    Ok(SpectralField { spec: u.spec, coeffs })
}

/// Snapshots on the uniform grid `t_i = t0 + i·(t1 - t0)/n_steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryField {
    spec: LatticeSpec,
    t0: f64,
    t1: f64,
    snapshots: Vec<SpectralField>,
}

impl TrajectoryField {
    pub fn new(t0: f64, t1: f64, snapshots: Vec<SpectralField>) -> Result<Self> {
        if snapshots.len() < 2 {
            return Err(Error::InvalidTime("a trajectory needs n_steps >= 1".into()));
        }
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::InvalidTime(format!("need t1 > t0, got [{t0}, {t1}]")));
        }
        let spec = snapshots[0].spec;
        if snapshots.iter().any(|s| s.spec != spec) {
            return Err(Error::SpecMismatch);
        }
        Ok(Self { spec, t0, t1, snapshots })
    }

    pub fn zeros(spec: LatticeSpec, t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        Self::new(t0, t1, vec![SpectralField::zeros(spec); n_steps + 1])
    }

    pub fn constant(u: &SpectralField, t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        Self::new(t0, t1, vec![u.clone(); n_steps + 1])
    }

    pub fn from_fn(
        spec: LatticeSpec,
        t0: f64,
        t1: f64,
        n_steps: usize,
        mut f: impl FnMut(f64) -> SpectralField,
    ) -> Result<Self> {
        let dt = (t1 - t0) / n_steps as f64;
        let snaps: Vec<SpectralField> = (0..=n_steps).map(|i| f(t0 + i as f64 * dt)).collect();
        if snaps.iter().any(|s| s.spec != spec) {
            return Err(Error::SpecMismatch);
        }
        Self::new(t0, t1, snaps)
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn n_steps(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps() {
            self.t1
        } else {
            self.t0 + i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|i| self.time(i)).collect()
    }

    pub fn snapshot(&self, i: usize) -> &SpectralField {
        &self.snapshots[i]
    }

    pub fn snapshots(&self) -> &[SpectralField] {
        &self.snapshots
    }

    pub fn last(&self) -> &SpectralField {
        self.snapshots.last().expect("trajectory is never empty")
    }

    pub fn into_snapshots(self) -> Vec<SpectralField> {
        self.snapshots
    }

    /// True when both trajectories share spec and time grid.
    pub fn aligned(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.snapshots.len() == other.snapshots.len()
            && (self.t0 - other.t0).abs() <= 1e-12 * (1.0 + self.t0.abs())
            && (self.t1 - other.t1).abs() <= 1e-12 * (1.0 + self.t1.abs())
    }

    pub fn check_aligned(&self, other: &Self) -> Result<()> {
        if self.aligned(other) {
            Ok(())
        } else if self.spec != other.spec {
            Err(Error::SpecMismatch)
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl FnMut(&SpectralField) -> SpectralField) -> Self {
        Self {
            spec: self.spec,
            t0: self.t0,
            t1: self.t1,
            snapshots: self.snapshots.iter().map(f).collect(),
        }
    }

    /// Maps snapshot `i` at time `t_i`.
    pub fn map_indexed(&self, mut f: impl FnMut(usize, f64, &SpectralField) -> SpectralField) -> Self {
        let snapshots = (0..self.snapshots.len())
            .map(|i| f(i, self.time(i), &self.snapshots[i]))
            .collect();
        Self { spec: self.spec, t0: self.t0, t1: self.t1, snapshots }
    }

    pub fn try_map(&self, f: impl FnMut(&SpectralField) -> Result<SpectralField>) -> Result<Self> {
        let snapshots = self.snapshots.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.t0, self.t1, snapshots)
    }

    pub fn zip_map(
        &self,
        other: &Self,
        mut f: impl FnMut(&SpectralField, &SpectralField) -> Result<SpectralField>,
    ) -> Result<Self> {
        self.check_aligned(other)?;
        let snapshots = self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.t0, self.t1, snapshots)
    }

    /// `a·self + other`.
    /// `self + a·other`, snapshot by snapshot.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.zip_map(other, |x, y| axpy(a, y, x))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|u| u.scale(a))
    }

    /// The first `n` steps of the trajectory, on `[t0, t0 + n·dt]`.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_steps() {
            return Err(Error::InvalidTime(format!("prefix of {n} steps out of range")));
        }
        Self::new(self.t0, self.time(n), self.snapshots[..=n].to_vec())
    }

    pub fn max_abs(&self) -> f64 {
        self.snapshots.iter().map(|s| s.max_abs()).fold(0.0, f64::max)
    }
}
