//! Optical-tweezer pulling on the C-terminus.
//!
//! The trap stiffness is modulated by how far the end-to-end vector has moved
//! from the folded reference, `κ(θ) = κ₀ |r_NC(θ*) − r_NC(θ)|^m` (length in nm),
//! so the tweezer does nothing at `θ*` itself. The Hookean force `κ x_twz` acts
//! on the last link and is lifted to joint space through `𝒥ᵀ`.

use serde::{Deserialize, Serialize};

use crate::chain::{kinematic_state, ChainTopology, KinematicState};
use crate::energy::{evaluate_forces, GeneralizedForce, Wrench};
use crate::engine::VectorField;
use crate::error::{KcmError, Result};
use crate::linalg::Vec3;
use crate::units::{ANGSTROM_PER_NM, PN_TO_KCAL_MOL_A};
use crate::Scalar;

/// Which last-link atoms enter the torque sum `Σ r_i × F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TorqueSum {
    /// Every atom of the last link, each crossed with the same force.
    #[default]
    LastLink,
    /// Only the C-terminus carbon.
    CTerminus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TweezerConfig<T> {
    /// Trap displacement `x_twz` (nm).
    pub displacement_nm: Vec3<T>,
    /// Base stiffness `κ₀` (pN/nm).
    pub kappa0: T,
    /// Modulation exponent `m`.
    pub m: u32,
    pub theta_star: Vec<T>,
    pub torque_sum: TorqueSum,
}

impl<T: Scalar> TweezerConfig<T> {
    pub fn new(displacement_nm: Vec3<T>, kappa0: T, m: u32, theta_star: Vec<T>) -> Result<Self> {
        let cfg = Self {
            displacement_nm,
            kappa0,
            m,
            theta_star,
            torque_sum: TorqueSum::LastLink,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Displacement of length `x0_nm` along `r_NC(θ*)`.
    pub fn along_end_to_end(
        topology: &ChainTopology<T>,
        theta_star: Vec<T>,
        x0_nm: T,
        kappa0: T,
        m: u32,
    ) -> Result<Self> {
        let r_star = kinematic_state(topology, &theta_star)?.end_to_end;
        let dir = r_star
            .normalized()
            .ok_or_else(|| KcmError::param("reference end-to-end vector is zero"))?;
        Self::new(dir * x0_nm, kappa0, m, theta_star)
    }

    pub fn with_torque_sum(mut self, torque_sum: TorqueSum) -> Self {
        self.torque_sum = torque_sum;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa0 >= T::zero()) || !self.kappa0.is_finite() {
            return Err(KcmError::param(format!("kappa0 must be finite and >= 0, got {}", self.kappa0)));
        }
        if self.m < 1 {
            return Err(KcmError::param("modulation exponent m must be >= 1"));
        }
        if !self.displacement_nm.is_finite() {
            return Err(KcmError::param("tweezer displacement must be finite"));
        }
        Ok(())
    }
}

/// A tweezer configuration bound to a topology, with `r_NC(θ*)` cached.
#[derive(Debug, Clone)]
pub struct Tweezer<'a, T> {
    topology: &'a ChainTopology<T>,
    config: TweezerConfig<T>,
    r_star: Vec3<T>,
}

impl<'a, T: Scalar> Tweezer<'a, T> {
    pub fn new(topology: &'a ChainTopology<T>, config: TweezerConfig<T>) -> Result<Self> {
        config.validate()?;
        let r_star = kinematic_state(topology, &config.theta_star)?.end_to_end;
        Ok(Self {
            topology,
            config,
            r_star,
        })
    }

    pub fn config(&self) -> &TweezerConfig<T> {
        &self.config
    }

    pub fn topology(&self) -> &'a ChainTopology<T> {
        self.topology
    }

    pub fn reference_end_to_end(&self) -> Vec3<T> {
        self.r_star
    }

    /// `κ(θ)` in pN/nm.
    pub fn trap_stiffness(&self, theta: &[T]) -> Result<T> {
        Ok(self.stiffness_at(&kinematic_state(self.topology, theta)?))
    }

    /// `F_twz` in pN.
    pub fn force(&self, theta: &[T]) -> Result<Vec3<T>> {
        Ok(self.force_at(&kinematic_state(self.topology, theta)?))
    }

    /// `[T_twz; F_twz]` in internal units (kcal/mol and kcal/mol/Å).
    pub fn wrench(&self, theta: &[T]) -> Result<Wrench<T>> {
        Ok(self.wrench_at(&kinematic_state(self.topology, theta)?))
    }

    /// `u_unfold = 𝒥ᵀ ℱ_twz` with the wrench in the last slot only.
    pub fn unfold_input(&self, theta: &[T]) -> Result<Vec<T>> {
        let state = kinematic_state(self.topology, theta)?;
        Ok(state
            .chain_jacobian()
            .transpose_apply(&self.generalized_force_at(&state)))
    }

    /// `ℱ_twz = [0, …, 0, TF_twz]`.
    pub fn generalized_force(&self, theta: &[T]) -> Result<GeneralizedForce<T>> {
        Ok(self.generalized_force_at(&kinematic_state(self.topology, theta)?))
    }

    pub fn stiffness_at(&self, state: &KinematicState<T>) -> T {
        let dr_nm = (self.r_star - state.end_to_end).norm() / T::lit(ANGSTROM_PER_NM);
        self.config.kappa0 * dr_nm.powi(self.config.m as i32)
    }

    pub fn force_at(&self, state: &KinematicState<T>) -> Vec3<T> {
        self.config.displacement_nm * self.stiffness_at(state)
    }

    pub fn wrench_at(&self, state: &KinematicState<T>) -> Wrench<T> {
        let force = self.force_at(state) * T::lit(PN_TO_KCAL_MOL_A);
        let lever = match self.config.torque_sum {
            TorqueSum::CTerminus => state.end_to_end,
            TorqueSum::LastLink => {
                let last = self.topology.dof();
                let (anchor, xi) = (state.joint_positions[last - 1], state.transforms[last - 1]);
                self.topology
                    .flat_atoms()
                    .iter()
                    .filter(|a| a.link == last)
                    .fold(Vec3::zero(), |acc, a| acc + anchor + xi.mul_vec(&a.offset))
            }
        };
        Wrench {
            torque: lever.cross(&force),
            force,
        }
    }

    pub fn generalized_force_at(&self, state: &KinematicState<T>) -> GeneralizedForce<T> {
        let mut f = GeneralizedForce::zeros(self.topology.dof());
        if let Some(last) = f.slots.last_mut() {
            *last = self.wrench_at(state);
        }
        f
    }

    /// `θ ↦ 𝒥ᵀ(ℱ + ℱ_twz)`.
    pub fn unfold_field(&self) -> UnfoldField<'_, 'a, T> {
        UnfoldField { tweezer: self }
    }
}

/// The tweezer-driven unfolding dynamics.
#[derive(Debug, Clone, Copy)]
pub struct UnfoldField<'t, 'a, T> {
    tweezer: &'t Tweezer<'a, T>,
}

impl<T: Scalar> VectorField<T> for UnfoldField<'_, '_, T> {
    fn eval(&self, theta: &[T]) -> Result<Vec<T>> {
        let eval = evaluate_forces(self.tweezer.topology, theta)?;
        let mut f = eval.generalized_force();
        if let Some(last) = f.slots.last_mut() {
            *last = *last + self.tweezer.wrench_at(&eval.state);
        }
        Ok(eval.state.chain_jacobian().transpose_apply(&f))
    }
}
