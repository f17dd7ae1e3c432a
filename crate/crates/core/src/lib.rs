//! Kinetostatic compliance model (KCM) of a protein backbone.
//!
//! The backbone is a serial chain of rigid peptide planes turned by `2N`
//! dihedral angles. The crate provides forward kinematics, a nonbonded
//! free energy mapped to joint torques, KCM folding, optical-tweezer
//! unfolding, a cone-shaped Chetaev function with Hessian-based instability
//! checks, and Sontag-formula destabilizing feedback.
//!
//! Everything is generic over the scalar type (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.

pub mod ccf;
pub mod chain;
pub mod chetaev;
pub mod energy;
pub mod engine;
pub mod error;
pub mod harness;
pub mod linalg;
mod scalar;
pub mod tweezer;
pub mod units;

pub use error::{KcmError, Result};
pub use scalar::Scalar;

pub type Topology = chain::ChainTopology<f64>;
pub type State = chain::KinematicState<f64>;
pub type Jacobian = chain::ChainJacobian<f64>;
pub type Energy = energy::EnergyBreakdown<f64>;
pub type Wrench = energy::Wrench<f64>;
pub type GeneralizedForce = energy::GeneralizedForce<f64>;
pub type FoldSettings = engine::FoldSettings<f64>;
pub type Trajectory = engine::Trajectory<f64>;
pub type TweezerConfig = tweezer::TweezerConfig<f64>;
pub type Tweezer<'a> = tweezer::Tweezer<'a, f64>;
pub type ChetaevParams = chetaev::ChetaevParams<f64>;
pub type Ccf<'a> = ccf::Ccf<'a, f64>;
pub type Vector3 = linalg::Vec3<f64>;
pub type Matrix3 = linalg::Mat3<f64>;
pub type Matrix = linalg::DMat<f64>;
