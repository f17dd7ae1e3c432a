//! Nonbonded free energy of the chain and its mapping onto dihedral torques.
//!
//! Electrostatics use a distance-dependent dielectric `ε(r) = 4r`, so a pair
//! contributes `k_e q_a q_b / (4 r²)`. Van der Waals uses the 12-6 form with
//! minimum at `σ`: `ε[(σ/r)¹² − 2(σ/r)⁶]`. Per-atom forces are aggregated into
//! one wrench per link (torque taken about the origin) and mapped through
//! `𝒥ᵀ`, which yields `τ = −∂𝒢/∂θ`.

use std::ops::Add;

use crate::chain::{check_conformation, kinematic_state, ChainTopology, KinematicState};
use crate::error::{KcmError, Result};
use crate::linalg::Vec3;
use crate::units::MIN_PAIR_DISTANCE;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown<T> {
    pub elec: T,
    pub vdw: T,
    pub total: T,
}

impl<T: Scalar> EnergyBreakdown<T> {
    pub fn new(elec: T, vdw: T) -> Self {
        Self {
            elec,
            vdw,
            total: elec + vdw,
        }
    }
}

/// Torque (about the world origin) and force acting on one rigid link.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench<T> {
    pub torque: Vec3<T>,
    pub force: Vec3<T>,
}

impl<T: Scalar> Wrench<T> {
    pub fn zero() -> Self {
        Self {
            torque: Vec3::zero(),
            force: Vec3::zero(),
        }
    }

    /// Wrench of a force applied at `point`.
    pub fn at_point(point: &Vec3<T>, force: &Vec3<T>) -> Self {
        Self {
            torque: point.cross(force),
            force: *force,
        }
    }

    pub fn to_array(&self) -> [T; 6] {
        let (t, f) = (self.torque, self.force);
        [t.x, t.y, t.z, f.x, f.y, f.z]
    }

    pub fn is_finite(&self) -> bool {
        self.torque.is_finite() && self.force.is_finite()
    }
}

impl<T: Scalar> Add for Wrench<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            torque: self.torque + o.torque,
            force: self.force + o.force,
        }
    }
}

/// Stacked wrench slots: slot `k` (0-based) carries the wrench on link `k+1`,
/// the body that turns with joints `1..=k+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedForce<T> {
    pub slots: Vec<Wrench<T>>,
}

impl<T: Scalar> GeneralizedForce<T> {
    pub fn zeros(dof: usize) -> Self {
        Self {
            slots: vec![Wrench::zero(); dof],
        }
    }

    /// Flattened 12N vector `[T_1; F_1; T_2; F_2; …]`.
    pub fn stacked(&self) -> Vec<T> {
        self.slots.iter().flat_map(|w| w.to_array()).collect()
    }
}

/// Joint torques `τ ∈ R^{2N}` (kcal/mol/rad).
pub type TorqueVector<T> = Vec<T>;

/// Everything derived from one pass over the pair list.
#[derive(Debug, Clone)]
pub struct ForceEvaluation<T> {
    pub state: KinematicState<T>,
    pub positions: Vec<Vec3<T>>,
    pub energy: EnergyBreakdown<T>,
    /// Per-atom forces `−∂𝒢/∂x` (kcal/mol/Å).
    pub atom_forces: Vec<Vec3<T>>,
    /// Wrench per link, index 0 being the fixed N-terminal base.
    pub link_wrenches: Vec<Wrench<T>>,
}

impl<T: Scalar> ForceEvaluation<T> {
    pub fn generalized_force(&self) -> GeneralizedForce<T> {
        GeneralizedForce {
            slots: self.link_wrenches[1..].to_vec(),
        }
    }

    pub fn torques(&self) -> TorqueVector<T> {
        self.state
            .chain_jacobian()
            .transpose_apply(&self.generalized_force())
    }
}

fn guard_distance<T: Scalar>(topology: &ChainTopology<T>, a: usize, b: usize, r: T) -> Result<()> {
    if !(r >= T::lit(MIN_PAIR_DISTANCE)) {
        return Err(KcmError::NearSingularity {
            a,
            a_name: topology.atom_name(a).to_string(),
            b,
            b_name: topology.atom_name(b).to_string(),
            distance: r.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Pair energy terms `(elec, vdw)` at distance `r`.
pub fn pair_energy<T: Scalar>(coulomb: T, epsilon: T, sigma: T, r: T) -> (T, T) {
    let s6 = (sigma / r).powi(6);
    (
        coulomb / (T::lit(4.0) * r * r),
        epsilon * (s6 * s6 - T::lit(2.0) * s6),
    )
}

/// `d/dr` of the pair energy.
pub fn pair_energy_derivative<T: Scalar>(coulomb: T, epsilon: T, sigma: T, r: T) -> T {
    let s6 = (sigma / r).powi(6);
    let elec = -coulomb / (T::lit(2.0) * r * r * r);
    let vdw = T::lit(12.0) * epsilon * (s6 - s6 * s6) / r;
    elec + vdw
}

fn energy_from_positions<T: Scalar>(
    topology: &ChainTopology<T>,
    positions: &[Vec3<T>],
) -> Result<EnergyBreakdown<T>> {
    let mut elec = T::zero();
    let mut vdw = T::zero();
    for p in topology.pairs() {
        let r = (positions[p.a] - positions[p.b]).norm();
        guard_distance(topology, p.a, p.b, r)?;
        let (e, v) = pair_energy(p.coulomb, p.epsilon, p.sigma, r);
        elec += e;
        vdw += v;
    }
    Ok(EnergyBreakdown::new(elec, vdw))
}

/// Aggregated free energy `𝒢 = 𝒢_elec + 𝒢_vdw` (kcal/mol).
pub fn free_energy<T: Scalar>(topology: &ChainTopology<T>, theta: &[T]) -> Result<EnergyBreakdown<T>> {
    let state = kinematic_state(topology, theta)?;
    energy_from_positions(topology, &state.atom_positions(topology))
}

/// Energy, per-atom forces and per-link wrenches at `theta`.
pub fn evaluate_forces<T: Scalar>(
    topology: &ChainTopology<T>,
    theta: &[T],
) -> Result<ForceEvaluation<T>> {
    check_conformation(topology, theta)?;
    let state = kinematic_state(topology, theta)?;
    let positions = state.atom_positions(topology);
    let mut atom_forces = vec![Vec3::zero(); positions.len()];
    let mut elec = T::zero();
    let mut vdw = T::zero();
    for p in topology.pairs() {
        let d = positions[p.a] - positions[p.b];
        let r = d.norm();
        guard_distance(topology, p.a, p.b, r)?;
        let (e, v) = pair_energy(p.coulomb, p.epsilon, p.sigma, r);
        elec += e;
        vdw += v;
        let f = d * (-pair_energy_derivative(p.coulomb, p.epsilon, p.sigma, r) / r);
        atom_forces[p.a] += f;
        atom_forces[p.b] -= f;
    }
    let mut link_wrenches = vec![Wrench::zero(); topology.dof() + 1];
    for (i, (x, f)) in positions.iter().zip(&atom_forces).enumerate() {
        let link = topology.atom_link(i);
        link_wrenches[link] = link_wrenches[link] + Wrench::at_point(x, f);
    }
    Ok(ForceEvaluation {
        state,
        positions,
        energy: EnergyBreakdown::new(elec, vdw),
        atom_forces,
        link_wrenches,
    })
}

/// Generalized force `ℱ(θ)`: one wrench slot per joint.
pub fn generalized_forces<T: Scalar>(
    topology: &ChainTopology<T>,
    theta: &[T],
) -> Result<GeneralizedForce<T>> {
    Ok(evaluate_forces(topology, theta)?.generalized_force())
}

/// `τ(θ) = 𝒥ᵀ(θ) ℱ(θ)`, equal to `−∇𝒢(θ)`.
pub fn dihedral_torques<T: Scalar>(topology: &ChainTopology<T>, theta: &[T]) -> Result<TorqueVector<T>> {
    Ok(evaluate_forces(topology, theta)?.torques())
}
