//! TOML experiment configuration with validation of every cross-module constraint.

use crate::error::{Error, Result};
use crate::lattice::{Dealias, LatticeSpec};
use crate::ou::{MollifierProfile, OuMode};
use crate::paracalc::Quadrature;
use crate::renorm::{C2Variant, RoughExponents};
use crate::solver::{BSign, ControlWeights, SolveConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub id: String,
    pub out_dir: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { id: "run".into(), out_dir: "out".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub dim: usize,
    pub n: usize,
    /// Padding factor for pairwise products: 1, 1.5 or 2.
    pub dealias: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self { dim: 3, n: 32, dealias: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub t_end: f64,
    pub dt: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { t_end: 0.25, dt: 0.005 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifierSection {
    pub support_radius: f64,
    /// Defaults to half the support radius.
    pub plateau: Option<f64>,
}

impl Default for MollifierSection {
    fn default() -> Self {
        Self { support_radius: 1.0, plateau: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseStart {
    Stationary,
    ZeroStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub epsilons: Vec<f64>,
    pub replicas: usize,
    pub seeds: Vec<u64>,
    pub start: NoiseStart,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.5, 0.25, 0.125, 0.0625],
            replicas: 100,
            seeds: vec![1],
            start: NoiseStart::Stationary,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentsSection {
    pub delta: f64,
    pub delta_prime: f64,
    pub nu: f64,
    pub rho: f64,
}

impl Default for ExponentsSection {
    fn default() -> Self {
        let k = RoughExponents::default();
        Self { delta: k.delta, delta_prime: k.delta_prime, nu: k.nu, rho: k.rho }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlledSection {
    pub delta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub eta: f64,
    pub z: f64,
}

impl Default for ControlledSection {
    fn default() -> Self {
        let l = ControlWeights::default();
        Self { delta: l.delta, gamma: l.gamma, kappa: l.kappa, a: l.a, b: l.b, c: l.c, d: l.d, eta: l.eta, z: 0.6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_picard: usize,
    pub contraction_tol: f64,
    pub blowup_threshold: f64,
    /// `"minus"` or `"plus"`.
    pub b_sign: String,
    /// `"block"` or `"plain"`.
    pub c2_variant: String,
    /// `"piecewise_linear"` or `"left_point"`.
    pub quadrature: String,
    pub cubic: bool,
    /// Times at which solution distances are evaluated: every `probe_every` steps.
    pub probe_every: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            max_picard: 30,
            contraction_tol: 1e-10,
            blowup_threshold: 1e6,
            b_sign: "minus".into(),
            c2_variant: "block".into(),
            quadrature: "piecewise_linear".into(),
            cubic: true,
            probe_every: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub lattice: LatticeSection,
    pub grid: GridSection,
    pub mollifier: MollifierSection,
    pub noise: NoiseSection,
    pub exponents: ExponentsSection,
    pub controlled: ControlledSection,
    pub solver: SolverSection,
}

fn cfg_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(cfg_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Canonical serialized form, the input of the manifest hash.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        if !(self.grid.t_end > 0.0 && self.grid.dt > 0.0 && self.grid.dt <= self.grid.t_end) {
            return Err(cfg_err(format!("grid needs 0 < dt <= t_end, got {:?}", self.grid)));
        }
        let steps = self.grid.t_end / self.grid.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(cfg_err("t_end must be a multiple of dt"));
        }
        self.profile()?;
        if self.noise.epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(cfg_err("epsilons must be finite and >= 0"));
        }
        if self.noise.seeds.is_empty() {
            return Err(cfg_err("at least one seed is required"));
        }
        self.rough_exponents()?;
        self.solve_config()?;
        self.c2_variant()?;
        if self.solver.probe_every == 0 {
            return Err(cfg_err("probe_every must be >= 1"));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<LatticeSpec> {
        let d = Dealias::from_factor(self.lattice.dealias).map_err(cfg_err)?;
        Ok(LatticeSpec::new(self.lattice.dim, self.lattice.n).map_err(cfg_err)?.with_dealias(d))
    }

    pub fn profile(&self) -> Result<MollifierProfile> {
        let s = self.mollifier.support_radius;
        MollifierProfile::with_plateau(s, self.mollifier.plateau.unwrap_or(0.5 * s)).map_err(cfg_err)
    }

    pub fn ou_mode(&self) -> OuMode {
        match self.noise.start {
            NoiseStart::Stationary => OuMode::Stationary,
            NoiseStart::ZeroStart => OuMode::ZeroStart,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.grid.t_end / self.grid.dt).round() as usize
    }

    pub fn rough_exponents(&self) -> Result<RoughExponents> {
        let e = &self.exponents;
        RoughExponents::new(e.delta, e.delta_prime, e.nu, e.rho).map_err(cfg_err)
    }

    pub fn weights(&self) -> ControlWeights {
        let c = &self.controlled;
        ControlWeights { delta: c.delta, gamma: c.gamma, kappa: c.kappa, a: c.a, b: c.b, c: c.c, d: c.d, eta: c.eta }
    }

    pub fn quadrature(&self) -> Result<Quadrature> {
        match self.solver.quadrature.as_str() {
            "piecewise_linear" => Ok(Quadrature::PiecewiseLinear),
            "left_point" => Ok(Quadrature::LeftPoint),
            other => Err(cfg_err(format!("unknown quadrature {other:?}"))),
        }
    }

    pub fn c2_variant(&self) -> Result<C2Variant> {
        match self.solver.c2_variant.as_str() {
            "block" => Ok(C2Variant::Block),
            "plain" => Ok(C2Variant::Plain),
            other => Err(cfg_err(format!("unknown c2_variant {other:?}"))),
        }
    }

    pub fn solve_config(&self) -> Result<SolveConfig> {
        let b_sign = match self.solver.b_sign.as_str() {
            "minus" => BSign::Minus,
            "plus" => BSign::Plus,
            other => return Err(cfg_err(format!("unknown b_sign {other:?}"))),
        };
        let cfg = SolveConfig {
            t_end: self.grid.t_end,
            dt: self.grid.dt,
            z: self.controlled.z,
            weights: self.weights(),
            max_picard: self.solver.max_picard,
            contraction_tol: self.solver.contraction_tol,
            blowup_threshold: self.solver.blowup_threshold,
            b_sign,
            cubic: self.solver.cubic,
            quadrature: self.quadrature()?,
        };
        cfg.validate().map_err(cfg_err)?;
        Ok(cfg)
    }
}
