//! Exact per-mode sampling of the (mollified) Ornstein–Uhlenbeck field
//! `∂_t X = ΔX + ξ` on the torus.
//!
//! Each pair `{k, -k}` evolves as an AR(1) chain with factor `e^{-|k|^2 h}`.
//! The stationary variance of `X̂(k)` is `f(ε|k|)^2/|k|^2` (complex circular,
//! so real and imaginary parts each carry half). The mollifier acts as a
//! deterministic factor on the unmollified chain, which makes coupled pairs at
//! different `ε` share their noise exactly.

use crate::besov::smooth_step;
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, SpectralField, TrajectoryField};
use crate::rng::{mode_key, ModeStream};
use num_complex::Complex64;

/// Radial profile equal to 1 on `[0, plateau]`, 0 from `support_radius` on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierProfile {
    support_radius: f64,
    plateau: f64,
}

impl MollifierProfile {
    pub fn new(support_radius: f64) -> Result<Self> {
        Self::with_plateau(support_radius, 0.5 * support_radius)
    }

    pub fn with_plateau(support_radius: f64, plateau: f64) -> Result<Self> {
        if !(support_radius > 0.0 && support_radius.is_finite() && plateau > 0.0 && plateau < support_radius) {
            return Err(Error::InvalidExponents(format!(
                "mollifier needs 0 < plateau < support, got {plateau} and {support_radius}"
            )));
        }
        Ok(Self { support_radius, plateau })
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    pub fn eval(&self, r: f64) -> f64 {
        1.0 - smooth_step((r - self.plateau) / (self.support_radius - self.plateau))
    }

    /// `f(ε|k|)` from `|k|^2`; `ε = 0` means no mollification.
    pub fn at(&self, epsilon: f64, k2: i64) -> f64 {
        if epsilon == 0.0 {
            1.0
        } else {
            self.eval(epsilon * (k2 as f64).sqrt())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OuMode {
    Stationary,
    ZeroStart,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuSampler {
    pub spec: LatticeSpec,
    pub mode: OuMode,
    pub epsilon: f64,
    pub profile: MollifierProfile,
    pub seed: u64,
    pub stream_id: u64,
}

impl OuSampler {
    pub fn new(
        spec: LatticeSpec,
        mode: OuMode,
        epsilon: f64,
        profile: MollifierProfile,
        seed: u64,
        stream_id: u64,
    ) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidExponents(format!("epsilon {epsilon} must be >= 0")));
        }
        Ok(Self { spec, mode, epsilon, profile, seed, stream_id })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_stream(mut self, stream_id: u64) -> Self {
        self.stream_id = stream_id;
        self
    }
}

/// The unmollified chain on `[t0, t1]`, scaled mode-wise by `amp(|k|^2)`.
fn sample_scaled(
    s: &OuSampler,
    t0: f64,
    t1: f64,
    n_steps: usize,
    amp: impl Fn(i64) -> f64,
) -> Result<TrajectoryField> {
    if !(t1 > t0 && t0 >= 0.0) || n_steps == 0 {
        return Err(Error::InvalidTime(format!("need t1 > t0 >= 0 and n_steps >= 1, got [{t0}, {t1}], {n_steps}")));
    }
    let h = (t1 - t0) / n_steps as f64;
    let times: Vec<f64> = (0..=n_steps).map(|i| t0 + i as f64 * h).collect();
    let snaps = sample_chain(s, &times, amp);
    TrajectoryField::new(t0, t1, snaps)
}

/// Exact AR(1) chain at increasing `times`; draw `i` drives the step into `times[i]`.
fn sample_chain(s: &OuSampler, times: &[f64], amp: impl Fn(i64) -> f64) -> Vec<SpectralField> {
    let spec = s.spec;
    let geo = spec.geometry();
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mut snaps = vec![vec![Complex64::default(); spec.len()]; times.len()];
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut rho = vec![0.0; gaps.len()];
    let mut sd = vec![0.0; gaps.len()];
    for i in 0..spec.len() {
        let j = geo.neg[i];
        if geo.nyquist[i] || geo.k2[i] == 0 || j < i {
            continue;
        }
        let a = amp(geo.k2[i]);
        if a == 0.0 {
            continue;
        }
        let lam = geo.k2[i] as f64;
        for (g, h) in gaps.iter().enumerate() {
            rho[g] = (-lam * h).exp();
            sd[g] = (-f64::exp_m1(-2.0 * lam * h) / lam).sqrt() * inv_sqrt2;
        }
        let sd0 = (1.0 / lam).sqrt();
        let mut rng = ModeStream::new(s.seed, s.stream_id, mode_key(&geo.kvec[i]));
        let (g0, g1) = rng.normal_pair();
        let mut x = match s.mode {
            OuMode::Stationary => Complex64::new(g0, g1) * (sd0 * inv_sqrt2),
            OuMode::ZeroStart => Complex64::default(),
        };
        snaps[0][i] = x * a;
        snaps[0][j] = (x * a).conj();
        for step in 1..times.len() {
            let (g0, g1) = rng.normal_pair();
            x = x * rho[step - 1] + Complex64::new(g0, g1) * sd[step - 1];
            snaps[step][i] = x * a;
            snaps[step][j] = (x * a).conj();
        }
    }
    snaps.into_iter().map(|c| SpectralField::from_raw(spec, c)).collect()
}

/// Mollified snapshots at arbitrary increasing `times`. Only a uniform grid
/// reproduces [`sample_ou`] draw for draw.
pub fn sample_ou_at(s: &OuSampler, times: &[f64]) -> Result<Vec<SpectralField>> {
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidTime("times must be finite, nonnegative and strictly increasing".into()));
    }
    let (eps, prof) = (s.epsilon, s.profile);
    Ok(sample_chain(s, times, move |k2| prof.at(eps, k2)))
}

pub fn sample_ou(s: &OuSampler, t0: f64, t1: f64, n_steps: usize) -> Result<TrajectoryField> {
    let (eps, prof) = (s.epsilon, s.profile);
    sample_scaled(s, t0, t1, n_steps, move |k2| prof.at(eps, k2))
}

/// `E[X̂_t(k) conj(X̂_s(k))]`; the zero-start variant starts at time 0.
pub fn covariance_oracle(
    k: &[i64],
    t: f64,
    s: f64,
    mode: OuMode,
    epsilon: f64,
    f: &MollifierProfile,
) -> Result<f64> {
    let k2: i64 = k.iter().map(|c| c * c).sum();
    if k2 == 0 {
        return Err(Error::ZeroMode);
    }
    let lam = k2 as f64;
    let f2 = f.at(epsilon, k2).powi(2);
    Ok(match mode {
        OuMode::Stationary => f2 * (-lam * (t - s).abs()).exp() / lam,
        OuMode::ZeroStart => {
            f2 * ((-lam * (t - s).abs()).exp() - (-lam * (t + s)).exp()) / lam
        }
    })
}

pub fn mollify(u: &SpectralField, f: &MollifierProfile, epsilon: f64) -> SpectralField {
    let f = *f;
    u.apply_radial(move |k2| f.at(epsilon, k2))
}

pub fn mollify_trajectory(u: &TrajectoryField, f: &MollifierProfile, epsilon: f64) -> TrajectoryField {
    u.map(|s| mollify(s, f, epsilon))
}

/// Two mollification levels of the same unmollified noise.
pub fn coupled_pair(
    s: &OuSampler,
    eps1: f64,
    eps2: f64,
    t0: f64,
    t1: f64,
    n_steps: usize,
) -> Result<(TrajectoryField, TrajectoryField)> {
    let base = sample_scaled(s, t0, t1, n_steps, |_| 1.0)?;
    Ok((
        mollify_trajectory(&base, &s.profile, eps1),
        mollify_trajectory(&base, &s.profile, eps2),
    ))
}

/// A whole ladder of mollification levels of the same noise.
pub fn coupled_ladder(
    s: &OuSampler,
    eps: &[f64],
    t0: f64,
    t1: f64,
    n_steps: usize,
) -> Result<Vec<TrajectoryField>> {
    let base = sample_scaled(s, t0, t1, n_steps, |_| 1.0)?;
    Ok(eps.iter().map(|&e| mollify_trajectory(&base, &s.profile, e)).collect())
}

/// Gaussian field with `E|û(k)|² = (1 + |k|²)^{-s}` on every nonzero retained
/// mode and zero mean; deterministic in `seed`.
pub fn synthetic_field(spec: LatticeSpec, seed: u64, s: f64) -> SpectralField {
    SpectralField::from_modes(spec, |k| {
        let k2: i64 = k.iter().map(|c| c * c).sum();
        if k2 == 0 {
            return Complex64::default();
        }
        let (g0, g1) = ModeStream::new(seed, u64::MAX - 1, mode_key(k)).normal_pair();
        let sd = (1.0 + k2 as f64).powf(-0.5 * s) * std::f64::consts::FRAC_1_SQRT_2;
        Complex64::new(g0, g1) * sd
    })
}
