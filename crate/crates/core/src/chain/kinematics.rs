use crate::chain::ChainTopology;
use crate::energy::{GeneralizedForce, Wrench};
use crate::error::{KcmError, Result};
use crate::linalg::{DMat, Mat3, Vec3};
use crate::Scalar;

fn unit_tolerance<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0))
}

/// Rotation by `angle` about the unit vector `axis` (Rodrigues form).
pub fn rotation_about_axis<T: Scalar>(axis: &Vec3<T>, angle: T) -> Result<Mat3<T>> {
    let n = axis.norm();
    if !n.is_finite() || (n - T::one()).abs() > unit_tolerance() {
        return Err(KcmError::param(format!(
            "rotation axis must be a unit vector, got norm {n}"
        )));
    }
    if !angle.is_finite() {
        return Err(KcmError::param("rotation angle must be finite"));
    }
    Ok(rodrigues(axis, angle))
}

pub(crate) fn rodrigues<T: Scalar>(u: &Vec3<T>, angle: T) -> Mat3<T> {
    let (s, c) = angle.sin_cos();
    let t = T::one() - c;
    let (x, y, z) = (u.x, u.y, u.z);
    Mat3::from_rows([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])
}

pub(crate) fn check_conformation<T: Scalar>(topology: &ChainTopology<T>, theta: &[T]) -> Result<()> {
    if theta.len() != topology.dof() {
        return Err(KcmError::DimensionMismatch {
            expected: topology.dof(),
            got: theta.len(),
        });
    }
    if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
        return Err(KcmError::NonFiniteAngle(i));
    }
    Ok(())
}

/// `Ξ(θ, u_j^0) = R(θ_1, u_1^0) · R(θ_2, u_2^0) ⋯ R(θ_j, u_j^0)` for `1 ≤ j ≤ 2N`.
pub fn compose_transform<T: Scalar>(
    topology: &ChainTopology<T>,
    theta: &[T],
    j: usize,
) -> Result<Mat3<T>> {
    check_conformation(topology, theta)?;
    if j == 0 || j > topology.dof() {
        return Err(KcmError::IndexOutOfRange {
            index: j,
            max: topology.dof(),
        });
    }
    Ok(topology.zero_unit_axes()[..j]
        .iter()
        .zip(theta)
        .fold(Mat3::identity(), |acc, (u, t)| acc.mul_mat(&rodrigues(u, *t))))
}

/// Forward kinematics of the chain at one conformation. Vectors are indexed
/// from 0, so `unit_axes[j - 1]` is `u_j(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicState<T> {
    /// Cumulative rotations `Ξ(θ, u_j^0)`.
    pub transforms: Vec<Mat3<T>>,
    pub unit_axes: Vec<Vec3<T>>,
    pub body_vectors: Vec<Vec3<T>>,
    /// Joint anchors `r_j(θ)`: the N atom for odd `j`, Cα for even `j`.
    pub joint_positions: Vec<Vec3<T>>,
    /// N-terminus nitrogen (origin) to C-terminus carbon.
    pub end_to_end: Vec3<T>,
}

pub fn kinematic_state<T: Scalar>(
    topology: &ChainTopology<T>,
    theta: &[T],
) -> Result<KinematicState<T>> {
    check_conformation(topology, theta)?;
    let dof = topology.dof();
    let mut transforms = Vec::with_capacity(dof);
    let mut unit_axes = Vec::with_capacity(dof);
    let mut body_vectors = Vec::with_capacity(dof);
    let mut joint_positions = Vec::with_capacity(dof);
    let mut xi = Mat3::identity();
    let mut r = Vec3::zero();
    for ((u0, b0), t) in topology
        .zero_unit_axes()
        .iter()
        .zip(topology.zero_body_vectors())
        .zip(theta)
    {
        xi = xi.mul_mat(&rodrigues(u0, *t));
        let b = xi.mul_vec(b0);
        transforms.push(xi);
        unit_axes.push(xi.mul_vec(u0));
        body_vectors.push(b);
        joint_positions.push(r);
        r += b;
    }
    Ok(KinematicState {
        transforms,
        unit_axes,
        body_vectors,
        joint_positions,
        end_to_end: r,
    })
}

impl<T: Scalar> KinematicState<T> {
    /// Cartesian positions of every topology atom, in flat atom order.
    pub fn atom_positions(&self, topology: &ChainTopology<T>) -> Vec<Vec3<T>> {
        topology
            .flat_atoms()
            .iter()
            .map(|a| {
                if a.link == 0 {
                    a.offset
                } else {
                    self.joint_positions[a.link - 1] + self.transforms[a.link - 1].mul_vec(&a.offset)
                }
            })
            .collect()
    }

    /// Columns `∂r_NC/∂θ_j = u_j(θ) × (r_NC(θ) − r_j(θ))`.
    pub fn end_to_end_jacobian(&self) -> Vec<Vec3<T>> {
        self.unit_axes
            .iter()
            .zip(&self.joint_positions)
            .map(|(u, r)| u.cross(&(self.end_to_end - *r)))
            .collect()
    }

    /// Velocity of a point carried by `link` under a unit rate of joint `j`.
    pub fn point_derivative(&self, point: &Vec3<T>, link: usize, j: usize) -> Vec3<T> {
        if j == 0 || j > link {
            Vec3::zero()
        } else {
            self.unit_axes[j - 1].cross(&(*point - self.joint_positions[j - 1]))
        }
    }

    pub fn chain_jacobian(&self) -> ChainJacobian<T> {
        let blocks = self
            .unit_axes
            .iter()
            .zip(&self.joint_positions)
            .map(|(u, r)| JointTwist {
                axis: *u,
                moment: -u.cross(r),
            })
            .collect();
        ChainJacobian { blocks }
    }
}

/// 3 × 2N Jacobian of the end-to-end vector, returned column by column.
pub fn end_to_end_jacobian<T: Scalar>(
    topology: &ChainTopology<T>,
    theta: &[T],
) -> Result<Vec<Vec3<T>>> {
    Ok(kinematic_state(topology, theta)?.end_to_end_jacobian())
}

/// `J_k = [u_k; −u_k × r_k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTwist<T> {
    pub axis: Vec3<T>,
    pub moment: Vec3<T>,
}

impl<T: Scalar> JointTwist<T> {
    pub fn to_array(&self) -> [T; 6] {
        let (a, m) = (self.axis, self.moment);
        [a.x, a.y, a.z, m.x, m.y, m.z]
    }

    /// `J_kᵀ w`.
    pub fn apply(&self, w: &Wrench<T>) -> T {
        self.axis.dot(&w.torque) + self.moment.dot(&w.force)
    }
}

/// Block upper-triangular chain Jacobian: row `k` of `𝒥ᵀ` holds `J_kᵀ` in
/// every wrench slot `s ≥ k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainJacobian<T> {
    pub blocks: Vec<JointTwist<T>>,
}

impl<T: Scalar> ChainJacobian<T> {
    pub fn dof(&self) -> usize {
        self.blocks.len()
    }

    /// `𝒥ᵀ ℱ` using suffix sums over the wrench slots.
    pub fn transpose_apply(&self, f: &GeneralizedForce<T>) -> Vec<T> {
        assert_eq!(f.slots.len(), self.blocks.len(), "wrench slot count");
        let mut tail = Wrench::zero();
        let mut tau = vec![T::zero(); self.blocks.len()];
        for k in (0..self.blocks.len()).rev() {
            tail = tail + f.slots[k];
            tau[k] = self.blocks[k].apply(&tail);
        }
        tau
    }

    /// Dense `𝒥ᵀ` of shape 2N × 12N.
    pub fn dense_transpose(&self) -> DMat<T> {
        let n = self.blocks.len();
        let mut m = DMat::zeros(n, 6 * n);
        for (k, b) in self.blocks.iter().enumerate() {
            let j = b.to_array();
            for slot in k..n {
                for (c, v) in j.iter().enumerate() {
                    m[(k, 6 * slot + c)] = *v;
                }
            }
        }
        m
    }
}

pub fn chain_jacobian<T: Scalar>(topology: &ChainTopology<T>, theta: &[T]) -> Result<ChainJacobian<T>> {
    Ok(kinematic_state(topology, theta)?.chain_jacobian())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo() -> ChainTopology<f64> {
        ChainTopology::default()
    }

    fn pseudo_random_theta(n: usize, seed: u64) -> Vec<f64> {
        // small LCG keeps these unit tests free of an RNG dependency
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 * std::f64::consts::PI
                    - std::f64::consts::PI
            })
            .collect()
    }

    #[test]
    fn zero_angle_is_identity() {
        let axis = Vec3::new(0.6, 0.0, 0.8);
        let r = rotation_about_axis(&axis, 0.0).unwrap();
        assert_eq!(r.max_abs_diff(&Mat3::identity()), 0.0);
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = rotation_about_axis(&Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2).unwrap();
        let v = r.mul_vec(&Vec3::new(1.0, 0.0, 0.0));
        assert!((v - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_is_orthonormal() {
        let s = 1.0 / 3f64.sqrt();
        let r = rotation_about_axis(&Vec3::new(s, s, s), 0.7).unwrap();
        // explicit R Rᵀ by index loops
        for i in 0..3 {
            for j in 0..3 {
                let e: f64 = (0..3).map(|k| r.m[i][k] * r.m[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e - want).abs() < 1e-12);
            }
        }
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_unit_axis_rejected() {
        assert!(matches!(
            rotation_about_axis(&Vec3::new(1.0, 1.0, 0.0), 0.3),
            Err(KcmError::Parameter(_))
        ));
    }

    #[test]
    fn compose_checks_index() {
        let t = topo();
        let th = vec![0.0; t.dof()];
        assert!(matches!(
            compose_transform(&t, &th, 0),
            Err(KcmError::IndexOutOfRange { .. })
        ));
        assert!(compose_transform(&t, &th, t.dof() + 1).is_err());
        for j in 1..=t.dof() {
            assert_eq!(compose_transform(&t, &th, j).unwrap(), Mat3::identity());
        }
    }

    #[test]
    fn compose_single_and_double_factor() {
        let t = topo();
        let th = pseudo_random_theta(t.dof(), 3);
        let u = t.zero_unit_axes();
        let r1 = rotation_about_axis(&u[0], th[0]).unwrap();
        assert!(compose_transform(&t, &th, 1).unwrap().max_abs_diff(&r1) < 1e-15);
        let r2 = rotation_about_axis(&u[1], th[1]).unwrap();
        let mut prod = Mat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    prod.m[i][j] += r1.m[i][k] * r2.m[k][j];
                }
            }
        }
        assert!(compose_transform(&t, &th, 2).unwrap().max_abs_diff(&prod) < 1e-14);
    }

    #[test]
    fn zero_conformation_reproduces_stored_geometry() {
        let t = topo();
        let s = kinematic_state(&t, &vec![0.0; t.dof()]).unwrap();
        assert_eq!(s.body_vectors, t.zero_body_vectors());
        assert_eq!(s.joint_positions, t.zero_joint_positions());
        assert_eq!(s.atom_positions(&t), t.zero_atom_positions());
    }

    #[test]
    fn first_joint_rotates_whole_chain_rigidly() {
        let t = topo();
        let mut th = vec![0.0; t.dof()];
        th[0] = 0.9;
        let s = kinematic_state(&t, &th).unwrap();
        let r = rotation_about_axis(&t.zero_unit_axes()[0], 0.9).unwrap();
        for (b, b0) in s.body_vectors.iter().zip(t.zero_body_vectors()) {
            assert!((*b - r.mul_vec(b0)).norm() < 1e-13);
        }
        for (u, u0) in s.unit_axes.iter().zip(t.zero_unit_axes()) {
            assert!((*u - r.mul_vec(u0)).norm() < 1e-13);
        }
    }

    #[test]
    fn body_vector_lengths_are_preserved() {
        let t = topo();
        for seed in 0..20 {
            let s = kinematic_state(&t, &pseudo_random_theta(t.dof(), seed)).unwrap();
            for (b, b0) in s.body_vectors.iter().zip(t.zero_body_vectors()) {
                assert!((b.norm() - b0.norm()).abs() < 1e-10);
            }
            for u in &s.unit_axes {
                assert!((u.norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let t = topo();
        assert!(matches!(
            kinematic_state(&t, &[0.0; 3]),
            Err(KcmError::DimensionMismatch { expected: 22, got: 3 })
        ));
        let mut th = vec![0.0; t.dof()];
        th[5] = f64::NAN;
        assert!(matches!(kinematic_state(&t, &th), Err(KcmError::NonFiniteAngle(5))));
    }

    #[test]
    fn first_block_at_zero_is_pure_axis() {
        // one-joint stand-in: the default's first anchor is the origin
        let t = topo();
        let j = chain_jacobian(&t, &vec![0.0; t.dof()]).unwrap();
        let b = j.blocks[0].to_array();
        let u = t.zero_unit_axes()[0];
        assert_eq!(&b[..3], &[u.x, u.y, u.z]);
        assert!(b[3..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dense_transpose_is_block_upper_triangular() {
        let t = topo();
        let j = chain_jacobian(&t, &pseudo_random_theta(t.dof(), 9)).unwrap();
        let d = j.dense_transpose();
        for k in 0..t.dof() {
            for slot in 0..k {
                for c in 0..6 {
                    assert_eq!(d[(k, 6 * slot + c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn single_slot_wrench_only_reaches_proximal_joints() {
        let t = topo();
        let j = chain_jacobian(&t, &pseudo_random_theta(t.dof(), 4)).unwrap();
        let p = 7;
        let mut f = GeneralizedForce::zeros(t.dof());
        f.slots[p] = Wrench {
            torque: Vec3::new(0.3, -1.2, 0.5),
            force: Vec3::new(-0.7, 0.1, 2.0),
        };
        let tau = j.transpose_apply(&f);
        let dense = j.dense_transpose().mul_vec(&f.stacked());
        for k in 0..t.dof() {
            assert!((tau[k] - dense[k]).abs() < 1e-12);
            if k > p {
                assert_eq!(tau[k], 0.0);
            }
        }
        assert!(tau[..=p].iter().any(|v| v.abs() > 1e-6));
    }
}
