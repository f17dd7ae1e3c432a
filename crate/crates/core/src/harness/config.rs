//! Experiment configuration (TOML). Every field has a default, so an empty
//! file is a valid fold run on the embedded topology.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ccf::{CcfChoice, Clamp, Monotone, SontagSettings};
use crate::engine::{FoldSettings, StepRule};
use crate::error::{KcmError, Result};
use crate::tweezer::TorqueSum;

/// Folded conformation reported with the original simulations (rad).
pub const REFERENCE_THETA: [f64; 22] = [
    1.34, 1.37, 1.26, 1.29, 1.42, 1.73, 1.65, 1.65, 1.46, 1.62, 1.49, 2.01, 1.31, 0.99, 1.98, 1.9,
    1.59, 1.56, 1.57, 0.93, 1.22, 1.29,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Fold,
    UnfoldTweezer,
    UnfoldCcf,
    Certify,
    SphereScan,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fold => "fold",
            Self::UnfoldTweezer => "unfold-tweezer",
            Self::UnfoldCcf => "unfold-ccf",
            Self::Certify => "certify",
            Self::SphereScan => "sphere-scan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub mode: Mode,
    pub seed: u64,
    pub topology: TopologyConfig,
    pub reference: ReferenceConfig,
    pub start: StartConfig,
    pub integration: IntegrationConfig,
    pub fold: FoldConfig,
    pub tweezer: TweezerSection,
    pub sontag: SontagSection,
    pub chetaev: ChetaevSection,
    pub sphere: SphereSection,
    pub output: OutputConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Fold,
            seed: 0,
            topology: TopologyConfig::default(),
            reference: ReferenceConfig::default(),
            start: StartConfig::default(),
            integration: IntegrationConfig::default(),
            fold: FoldConfig::default(),
            tweezer: TweezerSection::default(),
            sontag: SontagSection::default(),
            chetaev: ChetaevSection::default(),
            sphere: SphereSection::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    /// TOML topology file; the embedded 10-plane chain when absent.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceSource {
    /// Fold `theta` (or the published angles) with the staged KCM schedule.
    Folded,
    /// Use `theta` (or the published angles) verbatim.
    Verbatim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub source: ReferenceSource,
    /// Starting angles; the published folded conformation when absent.
    pub theta: Option<Vec<f64>>,
    /// Successive fold passes, each started from the previous result.
    pub stages: Vec<FoldConfig>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            source: ReferenceSource::Folded,
            theta: None,
            stages: vec![
                // coarse pass: far from the minimum the capped rule moves fast
                FoldConfig {
                    step: 0.01,
                    max_iters: 20_000,
                    torque_tolerance: 1.0,
                    rule: StepRule::Capped,
                },
                FoldConfig {
                    step: 4.0e-4,
                    max_iters: 400_000,
                    torque_tolerance: 1.0e-8,
                    rule: StepRule::Capped,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// Start exactly at the reference.
    None,
    /// Step of length `magnitude` along `∂|r_NC|/∂θ`.
    Stretch,
    /// Uniform random direction of length `magnitude`.
    Random,
    /// Random direction of length `magnitude` inside the positive set of `C_twz`.
    PositiveSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartConfig {
    /// Mode-dependent when absent: `none` for fold, `stretch` for unfolding.
    pub kind: Option<StartKind>,
    pub magnitude: f64,
}

impl Default for StartConfig {
    fn default() -> Self {
        Self {
            kind: None,
            magnitude: 1.0e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub steps: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            dt: 5.0e-5,
            steps: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldConfig {
    pub step: f64,
    pub max_iters: usize,
    pub torque_tolerance: f64,
    pub rule: StepRule,
}

impl Default for FoldConfig {
    fn default() -> Self {
        let s = FoldSettings::<f64>::default();
        Self {
            step: s.step,
            max_iters: s.max_iters,
            torque_tolerance: s.torque_tolerance,
            rule: s.rule,
        }
    }
}

impl FoldConfig {
    pub fn settings(&self) -> Result<FoldSettings<f64>> {
        FoldSettings::new(self.step, self.max_iters, self.torque_tolerance, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TweezerSection {
    /// Trap displacement length (nm).
    pub x0_nm: f64,
    /// Explicit direction; `r_NC(θ*)` when absent.
    pub direction: Option<[f64; 3]>,
    /// pN/nm.
    pub kappa0: f64,
    pub m: u32,
    pub torque_sum: TorqueSum,
}

impl Default for TweezerSection {
    fn default() -> Self {
        Self {
            x0_nm: 51.0,
            direction: None,
            kappa0: 0.16,
            m: 2,
            torque_sum: TorqueSum::LastLink,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcfKind {
    CTwz,
    /// `g(s) = s`.
    Identity,
    /// `g(s) = s²`.
    Square,
    /// `g(s) = exp(s / 100) − 1`.
    ExpM1,
}

impl CcfKind {
    pub fn choice(self) -> CcfChoice {
        match self {
            Self::CTwz => CcfChoice::CTwz,
            Self::Identity => CcfChoice::GFamily(Monotone::Identity),
            Self::Square => CcfChoice::GFamily(Monotone::Power(2.0)),
            Self::ExpM1 => CcfChoice::GFamily(Monotone::ExpM1 { scale: 100.0 }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SontagSection {
    pub p: f64,
    pub q: f64,
    pub ccf: CcfKind,
    pub clamp: Clamp,
}

impl Default for SontagSection {
    fn default() -> Self {
        Self {
            p: 2.0,
            q: 2.0,
            ccf: CcfKind::CTwz,
            clamp: Clamp::default(),
        }
    }
}

impl SontagSection {
    pub fn settings(&self) -> Result<SontagSettings> {
        SontagSettings::new(self.p, self.q, self.ccf.choice(), self.clamp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChetaevSection {
    /// Cone half-angle (rad).
    pub alpha_c: f64,
    /// Forward-difference step for the Hessian of `P` (rad).
    pub hessian_eps: f64,
    /// Central-difference step for the field Jacobian (rad).
    pub field_eps: f64,
    pub samples: usize,
    pub radius: f64,
}

impl Default for ChetaevSection {
    fn default() -> Self {
        Self {
            alpha_c: std::f64::consts::FRAC_PI_4,
            hessian_eps: 1.0e-5,
            field_eps: 1.0e-6,
            samples: 1000,
            radius: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphereSection {
    pub points: usize,
    pub radius: f64,
}

impl Default for SphereSection {
    fn default() -> Self {
        Self {
            points: 2000,
            radius: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub energy_csv: String,
    pub trajectory_xyz: String,
    pub report: String,
    pub sphere_csv: String,
    /// Write every k-th state to the XYZ file.
    pub xyz_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            energy_csv: "energy.csv".into(),
            trajectory_xyz: "trajectory.xyz".into(),
            report: "report.txt".into(),
            sphere_csv: "sphere.csv".into(),
            xyz_stride: 1,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| KcmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| KcmError::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| KcmError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn start_kind(&self) -> StartKind {
        self.start.kind.unwrap_or(match self.mode {
            Mode::UnfoldTweezer | Mode::UnfoldCcf => StartKind::Stretch,
            _ => StartKind::None,
        })
    }

    /// Config with mode-dependent choices filled in, as echoed in reports.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.start.kind = Some(self.start_kind());
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KcmError::Config(m));
        let i = &self.integration;
        if !(i.dt > 0.0) || !i.dt.is_finite() {
            return bad(format!("integration.dt must be > 0, got {}", i.dt));
        }
        if i.steps == 0 {
            return bad("integration.steps must be >= 1".into());
        }
        if !(self.start.magnitude >= 0.0) || !self.start.magnitude.is_finite() {
            return bad(format!("start.magnitude must be >= 0, got {}", self.start.magnitude));
        }
        self.fold.settings()?;
        if self.reference.stages.is_empty() && self.reference.source == ReferenceSource::Folded {
            return bad("reference.stages must not be empty for a folded reference".into());
        }
        for s in &self.reference.stages {
            s.settings()?;
        }
        if let Some(th) = &self.reference.theta {
            if th.iter().any(|x| !x.is_finite()) {
                return bad("reference.theta has non-finite entries".into());
            }
        }
        let t = &self.tweezer;
        if !(t.kappa0 >= 0.0) || t.m < 1 || !t.x0_nm.is_finite() {
            return bad("tweezer needs kappa0 >= 0, m >= 1 and finite x0_nm".into());
        }
        self.sontag.settings()?;
        let c = &self.chetaev;
        if !(c.alpha_c > 0.0 && c.alpha_c < std::f64::consts::FRAC_PI_2) {
            return bad(format!("chetaev.alpha_c must lie in (0, pi/2), got {}", c.alpha_c));
        }
        if !(c.hessian_eps > 0.0) || !(c.field_eps > 0.0) || !(c.radius > 0.0) || c.samples == 0 {
            return bad("chetaev steps, radius and samples must be positive".into());
        }
        if self.sphere.points == 0 || !(self.sphere.radius > 0.0) {
            return bad("sphere needs points >= 1 and radius > 0".into());
        }
        if self.output.xyz_stride == 0 {
            return bad("output.xyz_stride must be >= 1".into());
        }
        Ok(())
    }
}
