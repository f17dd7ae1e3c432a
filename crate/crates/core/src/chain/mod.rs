//! Forward kinematics of the rigid peptide-plane chain.

mod kinematics;
mod topology;

pub use kinematics::{
    chain_jacobian, compose_transform, end_to_end_jacobian, kinematic_state, rotation_about_axis,
    ChainJacobian, JointTwist, KinematicState,
};
pub(crate) use kinematics::check_conformation;
pub use topology::{
    Atom, AtomGroup, ChainTopology, PairParams, TopologyFile, DEFAULT_N_PLANES,
};
