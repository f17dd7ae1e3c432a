//! Control Chetaev functions and the universal destabilizing feedback.
//!
//! With drift `a = ∇C · τ` and input gradient `B = ∇C`, the feedback
//! `u = −φ(a, |B|) B`, where
//!
//! `φ(a, b) = (a − (|a|^p + b^{2q})^{1/p}) / b²` (and `0` when `b = 0`),
//!
//! gives `dC/dt = a + B·u = (|a|^p + |B|^{2q})^{1/p}` along the closed loop.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chain::{kinematic_state, ChainTopology, KinematicState};
use crate::chetaev::ChetaevParams;
use crate::energy::evaluate_forces;
use crate::engine::VectorField;
use crate::error::{KcmError, Result};
use crate::linalg::{dot, norm};
use crate::Scalar;

type CustomFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Strictly increasing `g` with `g(0) = 0`, applied to `s = |Δr|²`.
#[derive(Clone)]
pub enum Monotone {
    Identity,
    /// `s^k`, `k > 0`.
    Power(f64),
    /// `exp(s/scale) − 1`.
    ExpM1 { scale: f64 },
    /// User-supplied `s ↦ (g(s), g'(s))`.
    Custom(CustomFn),
}

impl fmt::Debug for Monotone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::Power(k) => write!(f, "Power({k})"),
            Self::ExpM1 { scale } => write!(f, "ExpM1 {{ scale: {scale} }}"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Monotone {
    /// `(g(s), g'(s))`.
    pub fn eval<T: Scalar>(&self, s: T) -> (T, T) {
        match self {
            Self::Identity => (s, T::one()),
            Self::Power(k) => {
                let k = T::lit(*k);
                if s == T::zero() {
                    let d = if k == T::one() { T::one() } else { T::zero() };
                    (T::zero(), d)
                } else {
                    (s.powf(k), k * s.powf(k - T::one()))
                }
            }
            Self::ExpM1 { scale } => {
                let sc = T::lit(*scale);
                let e = (s / sc).exp();
                (e - T::one(), e / sc)
            }
            Self::Custom(g) => {
                let (v, d) = g(s.to_f64_lossy());
                (T::lit(v), T::lit(d))
            }
        }
    }

    /// Checks `g(0) = 0` and strict increase on a uniform grid over `[0, s_max]`.
    pub fn check(&self, s_max: f64, points: usize) -> Result<()> {
        match self {
            Self::Power(k) if !(*k > 0.0) => {
                return Err(KcmError::Config(format!("power g needs k > 0, got {k}")))
            }
            Self::ExpM1 { scale } if !(*scale > 0.0) => {
                return Err(KcmError::Config(format!("exp g needs scale > 0, got {scale}")))
            }
            _ => {}
        }
        let g0 = self.eval(0.0f64).0;
        if g0 != 0.0 {
            return Err(KcmError::Config(format!("g(0) must be 0, got {g0}")));
        }
        let points = points.max(2);
        let mut prev = g0;
        for i in 1..points {
            let s = s_max * i as f64 / (points - 1) as f64;
            let v = self.eval(s).0;
            if !(v > prev) || !v.is_finite() {
                return Err(KcmError::Config(format!(
                    "g is not strictly increasing near s = {s} ({prev} -> {v})"
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum CcfChoice {
    /// `C = g(|Δr_NC|²)`.
    GFamily(Monotone),
    /// The cone function `C_twz`.
    CTwz,
}

/// Cap on `|u_c|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Clamp {
    None,
    Absolute(f64),
    /// Multiple of the open-loop torque norm at the start state.
    StartTorqueMultiple(f64),
}

impl Default for Clamp {
    fn default() -> Self {
        Self::StartTorqueMultiple(10.0)
    }
}

#[derive(Debug, Clone)]
pub struct SontagSettings {
    pub p: f64,
    pub q: f64,
    pub ccf: CcfChoice,
    pub clamp: Clamp,
}

/// Range of `|Δr|²` (Å²) over which a supplied `g` is checked.
const G_CHECK_MAX: f64 = 1.0e4;

impl SontagSettings {
    pub fn new(p: f64, q: f64, ccf: CcfChoice, clamp: Clamp) -> Result<Self> {
        if !(p > 1.0 && q > 1.0 && 2.0 * q >= p) || !p.is_finite() || !q.is_finite() {
            return Err(KcmError::param(format!(
                "Sontag exponents need 2q >= p > 1 and q > 1, got p = {p}, q = {q}"
            )));
        }
        if let CcfChoice::GFamily(g) = &ccf {
            g.check(G_CHECK_MAX, 1001)?;
        }
        match clamp {
            Clamp::Absolute(v) | Clamp::StartTorqueMultiple(v) if !(v > 0.0) => {
                return Err(KcmError::param(format!("clamp value must be positive, got {v}")))
            }
            _ => {}
        }
        Ok(Self { p, q, ccf, clamp })
    }
}

impl Default for SontagSettings {
    fn default() -> Self {
        Self {
            p: 2.0,
            q: 2.0,
            ccf: CcfChoice::CTwz,
            clamp: Clamp::default(),
        }
    }
}

/// `φ(a, b)` for `b ≥ 0`, with the `p`-th root read as `x^{1/p}`.
pub fn phi<T: Scalar>(a: T, b: T, p: T, q: T) -> T {
    if b == T::zero() {
        return T::zero();
    }
    let two = T::lit(2.0);
    let root = (a.abs().powf(p) + b.powf(two * q)).powf(p.recip());
    (a - root) / (b * b)
}

/// A control Chetaev function bound to its reference.
#[derive(Debug, Clone)]
pub struct Ccf<'a, T> {
    pub params: &'a ChetaevParams<T>,
    pub choice: CcfChoice,
}

impl<'a, T: Scalar> Ccf<'a, T> {
    pub fn new(params: &'a ChetaevParams<T>, choice: CcfChoice) -> Self {
        Self { params, choice }
    }

    pub fn value(&self, topology: &ChainTopology<T>, theta: &[T]) -> Result<T> {
        Ok(self.value_at(&kinematic_state(topology, theta)?))
    }

    pub fn gradient(&self, topology: &ChainTopology<T>, theta: &[T]) -> Result<Vec<T>> {
        Ok(self.gradient_at(&kinematic_state(topology, theta)?))
    }

    pub fn value_at(&self, state: &KinematicState<T>) -> T {
        match &self.choice {
            CcfChoice::CTwz => self.params.c_twz_at(state),
            CcfChoice::GFamily(g) => {
                let dr = state.end_to_end - self.params.r_star();
                g.eval(dr.norm_squared()).0
            }
        }
    }

    pub fn gradient_at(&self, state: &KinematicState<T>) -> Vec<T> {
        match &self.choice {
            CcfChoice::CTwz => self.params.grad_at(state),
            CcfChoice::GFamily(g) => {
                let dr = state.end_to_end - self.params.r_star();
                let w = dr * (T::lit(2.0) * g.eval(dr.norm_squared()).1);
                state.end_to_end_jacobian().iter().map(|c| w.dot(c)).collect()
            }
        }
    }
}

/// Pieces of one feedback evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SontagTerms<T> {
    /// Open-loop folding torque `τ = 𝒥ᵀℱ`.
    pub drift: Vec<T>,
    /// `B = ∇C`.
    pub gradient: Vec<T>,
    /// `a = ∇C · τ`.
    pub a: T,
    pub phi: T,
    /// `u_c = −φ B` before any clamp.
    pub input: Vec<T>,
}

impl<T: Scalar> SontagTerms<T> {
    /// `a + B·u_c`.
    pub fn rate(&self) -> T {
        self.a + dot(&self.gradient, &self.input)
    }

    /// `(|a|^p + |B|^{2q})^{1/p}`.
    pub fn margin(&self, p: T, q: T) -> T {
        let b = norm(&self.gradient);
        (self.a.abs().powf(p) + b.powf(T::lit(2.0) * q)).powf(p.recip())
    }
}

pub fn sontag_terms<T: Scalar>(
    ccf: &Ccf<'_, T>,
    settings: &SontagSettings,
    topology: &ChainTopology<T>,
    theta: &[T],
) -> Result<SontagTerms<T>> {
    let eval = evaluate_forces(topology, theta)?;
    let drift = eval.torques();
    let gradient = ccf.gradient_at(&eval.state);
    let a = dot(&gradient, &drift);
    let phi = phi(a, norm(&gradient), T::lit(settings.p), T::lit(settings.q));
    let input = gradient.iter().map(|b| -phi * *b).collect();
    Ok(SontagTerms {
        drift,
        gradient,
        a,
        phi,
        input,
    })
}

/// `u_c = −φ(a, |B|) B` (unclamped).
pub fn sontag_input<T: Scalar>(
    ccf: &Ccf<'_, T>,
    settings: &SontagSettings,
    topology: &ChainTopology<T>,
    theta: &[T],
) -> Result<Vec<T>> {
    Ok(sontag_terms(ccf, settings, topology, theta)?.input)
}

/// `θ ↦ τ(θ) + u_c(θ)`, with `|u_c|` optionally capped.
#[derive(Debug)]
pub struct SontagField<'a, T> {
    ccf: Ccf<'a, T>,
    settings: SontagSettings,
    topology: &'a ChainTopology<T>,
    limit: Option<T>,
    clamp_events: AtomicUsize,
}

impl<'a, T: Scalar> SontagField<'a, T> {
    /// `start` fixes the clamp for [`Clamp::StartTorqueMultiple`]. A zero
    /// start torque leaves the input unclamped.
    pub fn new(
        ccf: Ccf<'a, T>,
        settings: SontagSettings,
        topology: &'a ChainTopology<T>,
        start: &[T],
    ) -> Result<Self> {
        let limit = match settings.clamp {
            Clamp::None => None,
            Clamp::Absolute(v) => Some(T::lit(v)),
            Clamp::StartTorqueMultiple(k) => {
                let t0 = norm(&evaluate_forces(topology, start)?.torques());
                if t0 > T::zero() {
                    Some(T::lit(k) * t0)
                } else {
                    log::warn!("start torque is zero; Sontag input left unclamped");
                    None
                }
            }
        };
        Ok(Self {
            ccf,
            settings,
            topology,
            limit,
            clamp_events: AtomicUsize::new(0),
        })
    }

    pub fn limit(&self) -> Option<T> {
        self.limit
    }

    pub fn clamp_events(&self) -> usize {
        self.clamp_events.load(Ordering::Relaxed)
    }

    pub fn settings(&self) -> &SontagSettings {
        &self.settings
    }

    pub fn terms(&self, theta: &[T]) -> Result<SontagTerms<T>> {
        sontag_terms(&self.ccf, &self.settings, self.topology, theta)
    }
}

impl<T: Scalar> VectorField<T> for SontagField<'_, T> {
    fn eval(&self, theta: &[T]) -> Result<Vec<T>> {
        let terms = self.terms(theta)?;
        let mut scale = T::one();
        if let Some(limit) = self.limit {
            let n = norm(&terms.input);
            if n > limit {
                scale = limit / n;
                self.clamp_events.fetch_add(1, Ordering::Relaxed);
                log::debug!("Sontag input clamped: |u| = {n} > {limit}");
            }
        }
        Ok(terms
            .drift
            .iter()
            .zip(&terms.input)
            .map(|(t, u)| *t + scale * *u)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_examples() {
        assert_eq!(phi(3.7, 0.0, 2.0, 2.0), 0.0);
        assert_eq!(phi(0.0, 1.0, 2.0, 2.0), -1.0);
        assert_eq!(phi(3.0, 2.0, 2.0, 2.0), -0.5);
    }

    #[test]
    fn exponent_validation() {
        let c = || CcfChoice::CTwz;
        assert!(SontagSettings::new(2.0, 2.0, c(), Clamp::None).is_ok());
        assert!(SontagSettings::new(1.0, 2.0, c(), Clamp::None).is_err());
        assert!(SontagSettings::new(2.0, 1.0, c(), Clamp::None).is_err());
        assert!(SontagSettings::new(5.0, 2.0, c(), Clamp::None).is_err());
        assert!(SontagSettings::new(2.0, 2.0, c(), Clamp::Absolute(0.0)).is_err());
    }

    #[test]
    fn monotone_checks() {
        assert!(Monotone::Identity.check(10.0, 50).is_ok());
        assert!(Monotone::Power(2.0).check(10.0, 50).is_ok());
        assert!(Monotone::Power(-1.0).check(10.0, 50).is_err());
        assert!(Monotone::ExpM1 { scale: 100.0 }.check(10.0, 50).is_ok());
        let bump = Monotone::Custom(Arc::new(|s: f64| (s.sin(), s.cos())));
        assert!(bump.check(10.0, 50).is_err());
        let shifted = Monotone::Custom(Arc::new(|s: f64| (s + 1.0, 1.0)));
        assert!(shifted.check(10.0, 50).is_err());
        let ccf = CcfChoice::GFamily(Monotone::Custom(Arc::new(|s: f64| (s.sin(), s.cos()))));
        assert!(SontagSettings::new(2.0, 2.0, ccf, Clamp::None).is_err());
    }

    #[test]
    fn power_derivative() {
        let (v, d) = Monotone::Power(2.0).eval(3.0f64);
        assert_eq!((v, d), (9.0, 6.0));
    }
}
