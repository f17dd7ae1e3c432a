//! The cone-shaped candidate Chetaev function
//!
//! `C_twz(θ) = |Δr|² |r*|² cos²α_C − (Δrᵀ r*)²`, with `Δr = r_NC(θ) − r_NC(θ*)`,
//!
//! together with its flow derivative `P = ∇C · f` and the Hessian test used to
//! certify that `θ*` is unstable for a given unfolding field. `C_twz > 0`
//! exactly when `Δr` lies outside the double cone of half-angle `α_C` around
//! `r*`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chain::{kinematic_state, ChainTopology, KinematicState};
use crate::engine::VectorField;
use crate::error::{KcmError, Result};
use crate::linalg::{dot, DMat, Mat3, Vec3};
use crate::Scalar;

/// `|Δr|² |r*|² cos²α − (Δrᵀ r*)²`.
pub fn c_twz_core<T: Scalar>(delta_r: &Vec3<T>, r_star: &Vec3<T>, alpha_c: T) -> Result<T> {
    if r_star.norm_squared() == T::zero() {
        return Err(KcmError::param("reference end-to-end vector is zero"));
    }
    let c = alpha_c.cos();
    let proj = delta_r.dot(r_star);
    Ok(delta_r.norm_squared() * r_star.norm_squared() * c * c - proj * proj)
}

/// `M = |r*|² cos²α I − r* r*ᵀ`, so that `C_twz = Δrᵀ M Δr`.
pub fn cone_matrix<T: Scalar>(r_star: &Vec3<T>, alpha_c: T) -> Mat3<T> {
    let c = alpha_c.cos();
    Mat3::identity().scaled(r_star.norm_squared() * c * c) - Mat3::outer(r_star, r_star)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChetaevParams<T> {
    theta_star: Vec<T>,
    alpha_c: T,
    r_star: Vec3<T>,
    m: Mat3<T>,
}

impl<T: Scalar> ChetaevParams<T> {
    pub fn new(topology: &ChainTopology<T>, theta_star: Vec<T>, alpha_c: T) -> Result<Self> {
        let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
        if !(alpha_c > T::zero() && alpha_c < half_pi) {
            return Err(KcmError::param(format!(
                "cone half-angle must lie in (0, pi/2), got {alpha_c}"
            )));
        }
        let r_star = kinematic_state(topology, &theta_star)?.end_to_end;
        if r_star.norm_squared() == T::zero() {
            return Err(KcmError::param("reference end-to-end vector is zero"));
        }
        Ok(Self {
            m: cone_matrix(&r_star, alpha_c),
            theta_star,
            alpha_c,
            r_star,
        })
    }

    pub fn theta_star(&self) -> &[T] {
        &self.theta_star
    }

    pub fn alpha_c(&self) -> T {
        self.alpha_c
    }

    pub fn r_star(&self) -> Vec3<T> {
        self.r_star
    }

    pub fn m(&self) -> &Mat3<T> {
        &self.m
    }

    /// Direct 3×3 determinant of `M`; analytically `−sin²α cos⁴α |r*|⁶`.
    pub fn m_determinant(&self) -> T {
        self.m.determinant()
    }

    pub fn delta_r(&self, topology: &ChainTopology<T>, theta: &[T]) -> Result<Vec3<T>> {
        Ok(kinematic_state(topology, theta)?.end_to_end - self.r_star)
    }

    pub fn c_twz(&self, topology: &ChainTopology<T>, theta: &[T]) -> Result<T> {
        c_twz_core(&self.delta_r(topology, theta)?, &self.r_star, self.alpha_c)
    }

    pub fn c_twz_at(&self, state: &KinematicState<T>) -> T {
        let dr = state.end_to_end - self.r_star;
        dr.dot(&self.m.mul_vec(&dr))
    }

    /// Angle between `Δr` and `r*`, in `[0, π]`.
    pub fn cone_angle(&self, topology: &ChainTopology<T>, theta: &[T]) -> Result<T> {
        let dr = self.delta_r(topology, theta)?;
        let denom = dr.norm() * self.r_star.norm();
        if denom == T::zero() {
            return Err(KcmError::UndefinedAngle);
        }
        let c = (dr.dot(&self.r_star) / denom).max(-T::one()).min(T::one());
        Ok(c.acos())
    }

    /// `C_twz(θ) > 0`; false at `θ*` itself.
    pub fn in_positive_set(&self, topology: &ChainTopology<T>, theta: &[T]) -> Result<bool> {
        Ok(self.c_twz(topology, theta)? > T::zero())
    }

    /// `∂C/∂θ = 2 Δrᵀ M ∂r_NC/∂θ`.
    pub fn grad_c_twz(&self, topology: &ChainTopology<T>, theta: &[T]) -> Result<Vec<T>> {
        Ok(self.grad_at(&kinematic_state(topology, theta)?))
    }

    pub fn grad_at(&self, state: &KinematicState<T>) -> Vec<T> {
        let w = self.m.mul_vec(&(state.end_to_end - self.r_star)) * T::lit(2.0);
        state
            .end_to_end_jacobian()
            .iter()
            .map(|col| w.dot(col))
            .collect()
    }

    /// `P(θ) = ∇C_twz(θ) · f(θ)`.
    pub fn instability_rate<F: VectorField<T> + ?Sized>(
        &self,
        field: &F,
        topology: &ChainTopology<T>,
        theta: &[T],
    ) -> Result<T> {
        Ok(dot(&self.grad_c_twz(topology, theta)?, &field.eval(theta)?))
    }

    /// Forward-difference Hessian of `P` at `θ*`, symmetrized.
    pub fn hessian_p_fd<F: VectorField<T> + ?Sized>(
        &self,
        field: &F,
        topology: &ChainTopology<T>,
        eps: &[T],
    ) -> Result<DMat<T>> {
        hessian_forward(
            |th: &[T]| self.instability_rate(field, topology, th),
            &self.theta_star,
            eps,
        )
    }

    /// `H = 2(G D + Dᵀ G)` with `G = J_rᵀ M J_r` and `D = ∂f/∂θ`, both at `θ*`.
    /// `D` comes from central differences of the field with step `field_eps`.
    /// Exact when `f(θ*) = 0`.
    pub fn hessian_p_analytic<F: VectorField<T> + ?Sized>(
        &self,
        field: &F,
        topology: &ChainTopology<T>,
        field_eps: T,
    ) -> Result<DMat<T>> {
        if !(field_eps > T::zero()) {
            return Err(KcmError::param("field difference step must be positive"));
        }
        let state = kinematic_state(topology, &self.theta_star)?;
        let jr = state.end_to_end_jacobian();
        let n = jr.len();
        let mj: Vec<Vec3<T>> = jr.iter().map(|c| self.m.mul_vec(c)).collect();
        let g = DMat::from_fn(n, n, |i, j| jr[i].dot(&mj[j]));
        let d = field_jacobian(field, &self.theta_star, field_eps)?;
        let gd = g.matmul(&d);
        let two = T::lit(2.0);
        Ok(DMat::from_fn(n, n, |j, k| two * (gd[(j, k)] + gd[(k, j)])))
    }
}

/// Forward-difference Hessian
/// `H_ij = [P(x+ε_i e_i+ε_j e_j) − P(x+ε_i e_i) − P(x+ε_j e_j) + P(x)] / (ε_i ε_j)`,
/// returned as `(H + Hᵀ)/2`.
pub fn hessian_forward<T: Scalar>(
    p: impl Fn(&[T]) -> Result<T>,
    center: &[T],
    eps: &[T],
) -> Result<DMat<T>> {
    let n = center.len();
    if eps.len() != n {
        return Err(KcmError::DimensionMismatch {
            expected: n,
            got: eps.len(),
        });
    }
    if eps.iter().any(|e| !(*e > T::zero())) {
        return Err(KcmError::param("finite-difference steps must be positive"));
    }
    let shifted = |i: usize, j: Option<usize>| {
        let mut x = center.to_vec();
        x[i] += eps[i];
        if let Some(j) = j {
            x[j] += eps[j];
        }
        x
    };
    let p0 = p(center)?;
    let single: Vec<T> = (0..n).map(|i| p(&shifted(i, None))).collect::<Result<_>>()?;
    let mut h = DMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let pij = p(&shifted(i, Some(j)))?;
            let v = (pij - single[i] - single[j] + p0) / (eps[i] * eps[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h.symmetrized())
}

/// Central-difference Jacobian `D_ik = ∂f_i/∂θ_k`.
pub fn field_jacobian<T: Scalar, F: VectorField<T> + ?Sized>(
    field: &F,
    center: &[T],
    eps: T,
) -> Result<DMat<T>> {
    let n = center.len();
    let mut d = DMat::zeros(n, n);
    let half = T::lit(0.5) / eps;
    for k in 0..n {
        let mut plus = center.to_vec();
        let mut minus = center.to_vec();
        plus[k] += eps;
        minus[k] -= eps;
        let (fp, fm) = (field.eval(&plus)?, field.eval(&minus)?);
        if fp.len() != n || fm.len() != n {
            return Err(KcmError::DimensionMismatch {
                expected: n,
                got: fp.len(),
            });
        }
        for i in 0..n {
            d[(i, k)] = (fp[i] - fm[i]) * half;
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifySettings {
    pub n_samples: usize,
    /// Radius (rad) of the sampled perturbations around `θ*`.
    pub radius: f64,
    pub seed: u64,
    /// Give up after this many rejected draws per accepted sample.
    pub max_rejections_per_sample: usize,
}

impl Default for CertifySettings {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            radius: 0.05,
            seed: 0,
            max_rejections_per_sample: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub n_samples: usize,
    pub n_drawn: usize,
    pub radius: f64,
    pub min_quadratic_form: f64,
    pub fraction_positive: f64,
    /// All sampled `δθᵀ H δθ` were positive.
    pub condition_holds: bool,
}

impl CertificationReport {
    pub fn verdict(&self) -> &'static str {
        if self.condition_holds {
            "condition holds on sample"
        } else {
            "condition violated on sample"
        }
    }
}

/// Draws `δθ` uniformly on the sphere of the given radius, keeps those with
/// `θ* + δθ` in the positive set, and evaluates `δθᵀ H δθ`.
pub fn certify_instability<T: Scalar>(
    params: &ChetaevParams<T>,
    topology: &ChainTopology<T>,
    hessian: &DMat<T>,
    settings: &CertifySettings,
) -> Result<CertificationReport> {
    let n = params.theta_star.len();
    if settings.n_samples == 0 {
        return Err(KcmError::param("n_samples must be at least 1"));
    }
    if !(settings.radius > 0.0) {
        return Err(KcmError::param("sampling radius must be positive"));
    }
    if hessian.nrows() != n || hessian.ncols() != n {
        return Err(KcmError::DimensionMismatch {
            expected: n,
            got: hessian.nrows(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let budget = settings
        .n_samples
        .saturating_mul(settings.max_rejections_per_sample.max(1));
    let (mut accepted, mut drawn, mut positive) = (0usize, 0usize, 0usize);
    let mut min_q = f64::INFINITY;
    while accepted < settings.n_samples {
        if drawn >= budget {
            return Err(KcmError::param(format!(
                "positive set too thin: {accepted} of {} samples after {drawn} draws",
                settings.n_samples
            )));
        }
        drawn += 1;
        let delta = sphere_sample(&mut rng, n, settings.radius);
        let delta: Vec<T> = delta.into_iter().map(T::lit).collect();
        let theta: Vec<T> = params.theta_star.iter().zip(&delta).map(|(a, b)| *a + *b).collect();
        if !params.in_positive_set(topology, &theta)? {
            continue;
        }
        accepted += 1;
        let q = hessian.quadratic_form(&delta).to_f64_lossy();
        min_q = min_q.min(q);
        if q > 0.0 {
            positive += 1;
        }
    }
    Ok(CertificationReport {
        n_samples: accepted,
        n_drawn: drawn,
        radius: settings.radius,
        min_quadratic_form: min_q,
        fraction_positive: positive as f64 / accepted as f64,
        condition_holds: positive == accepted,
    })
}

/// Uniform point on the sphere of radius `r` in `R^n`.
pub fn sphere_sample(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return g.into_iter().map(|x| x * r / norm).collect();
        }
    }
}
