//! KCM folding iteration and forward-Euler integration of the control-affine
//! conformation dynamics `θ̇ = 𝒥ᵀ(θ)ℱ(θ) + u(θ)`.

use crate::chain::{check_conformation, ChainTopology};
use crate::energy::{evaluate_forces, EnergyBreakdown};
use crate::error::{KcmError, Result};
use crate::linalg::max_abs;
use crate::Scalar;

/// A conformation-dependent vector field on the dihedral space.
pub trait VectorField<T: Scalar> {
    fn eval(&self, theta: &[T]) -> Result<Vec<T>>;
}

impl<T: Scalar, F> VectorField<T> for F
where
    F: Fn(&[T]) -> Result<Vec<T>>,
{
    fn eval(&self, theta: &[T]) -> Result<Vec<T>> {
        self(theta)
    }
}

/// Open-loop folding field `θ ↦ τ(θ) = 𝒥ᵀ(θ)ℱ(θ)`.
#[derive(Debug, Clone, Copy)]
pub struct FoldingField<'a, T> {
    pub topology: &'a ChainTopology<T>,
}

impl<'a, T: Scalar> FoldingField<'a, T> {
    pub fn new(topology: &'a ChainTopology<T>) -> Self {
        Self { topology }
    }
}

impl<T: Scalar> VectorField<T> for FoldingField<'_, T> {
    fn eval(&self, theta: &[T]) -> Result<Vec<T>> {
        Ok(evaluate_forces(self.topology, theta)?.torques())
    }
}

/// Map applied to the torque before each KCM step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// `Δθ = h τ`.
    Identity,
    /// `Δθ = h τ / max(1, max_j |τ_j|)`: no dihedral turns by more than `h`.
    #[default]
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldSettings<T> {
    pub step: T,
    pub max_iters: usize,
    pub torque_tolerance: T,
    pub rule: StepRule,
}

impl<T: Scalar> FoldSettings<T> {
    pub fn new(step: T, max_iters: usize, torque_tolerance: T, rule: StepRule) -> Result<Self> {
        if !(step > T::zero()) || !step.is_finite() {
            return Err(KcmError::param("fold step h must be positive"));
        }
        if max_iters == 0 {
            return Err(KcmError::param("max_iters must be at least 1"));
        }
        if !(torque_tolerance > T::zero()) {
            return Err(KcmError::param("torque tolerance must be positive"));
        }
        Ok(Self {
            step,
            max_iters,
            torque_tolerance,
            rule,
        })
    }
}

/// `h = 4e-4` keeps `h λ_max < 2` at the folded reference of the default
/// chain, where the stiffest Hessian mode is about 4.2e3.
impl<T: Scalar> Default for FoldSettings<T> {
    fn default() -> Self {
        Self {
            step: T::lit(4.0e-4),
            max_iters: 20_000,
            torque_tolerance: T::one(),
            rule: StepRule::Capped,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    /// Torque tolerance met after this many iterations.
    Converged { iterations: usize },
    MaxIterations,
    /// Fixed-horizon integration ran to the end.
    Completed,
    /// A field or energy evaluation failed; the trajectory holds the states before it.
    Aborted { step: usize, reason: String },
}

impl RunStatus {
    pub fn label(&self) -> String {
        match self {
            Self::Converged { iterations } => format!("converged after {iterations} iterations"),
            Self::MaxIterations => "max iterations reached without convergence".into(),
            Self::Completed => "completed".into(),
            Self::Aborted { step, reason } => format!("aborted at step {step}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    /// Integration time, or iteration index for KCM folding.
    pub times: Vec<T>,
    pub conformations: Vec<Vec<T>>,
    pub energies: Vec<EnergyBreakdown<T>>,
    /// `max_j |τ_j|` of the open-loop torque at each recorded state.
    pub torque_norms: Vec<T>,
    pub status: RunStatus,
}

impl<T: Scalar> Trajectory<T> {
    fn empty() -> Self {
        Self {
            times: Vec::new(),
            conformations: Vec::new(),
            energies: Vec::new(),
            torque_norms: Vec::new(),
            status: RunStatus::Completed,
        }
    }

    pub fn len(&self) -> usize {
        self.conformations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conformations.is_empty()
    }

    pub fn last(&self) -> Option<&[T]> {
        self.conformations.last().map(Vec::as_slice)
    }

    fn push(&mut self, time: T, theta: Vec<T>, energy: EnergyBreakdown<T>, torque_norm: T) {
        self.times.push(time);
        self.conformations.push(theta);
        self.energies.push(energy);
        self.torque_norms.push(torque_norm);
    }
}

fn euler_update<T: Scalar>(theta: &[T], scale: T, direction: &[T]) -> Vec<T> {
    theta
        .iter()
        .zip(direction)
        .map(|(t, d)| *t + scale * *d)
        .collect()
}

fn step_scale<T: Scalar>(settings: &FoldSettings<T>, tau: &[T]) -> T {
    match settings.rule {
        StepRule::Identity => settings.step,
        StepRule::Capped => settings.step / T::one().max(max_abs(tau)),
    }
}

/// One KCM iteration `θ' = θ + h f_KCM(τ(θ))`.
pub fn kcm_fold_step<T: Scalar>(
    topology: &ChainTopology<T>,
    theta: &[T],
    settings: &FoldSettings<T>,
) -> Result<Vec<T>> {
    let tau = evaluate_forces(topology, theta)?.torques();
    Ok(euler_update(theta, step_scale(settings, &tau), &tau))
}

/// Iterates KCM steps until `max_j |τ_j| ≤ torque_tolerance` or the
/// iteration budget runs out.
pub fn fold_to_convergence<T: Scalar>(
    topology: &ChainTopology<T>,
    theta0: &[T],
    settings: &FoldSettings<T>,
) -> Result<Trajectory<T>> {
    fold_impl(topology, theta0, settings, true)
}

/// Like [`fold_to_convergence`] but keeps only the final state, for long
/// folds whose path is not needed.
pub fn fold_endpoint<T: Scalar>(
    topology: &ChainTopology<T>,
    theta0: &[T],
    settings: &FoldSettings<T>,
) -> Result<Trajectory<T>> {
    fold_impl(topology, theta0, settings, false)
}

fn fold_impl<T: Scalar>(
    topology: &ChainTopology<T>,
    theta0: &[T],
    settings: &FoldSettings<T>,
    record: bool,
) -> Result<Trajectory<T>> {
    check_conformation(topology, theta0)?;
    let mut traj = Trajectory::empty();
    let mut theta = theta0.to_vec();
    for iter in 0..=settings.max_iters {
        let ev = match evaluate_forces(topology, &theta) {
            Ok(ev) => ev,
            Err(e) if iter > 0 => {
                traj.status = RunStatus::Aborted {
                    step: iter,
                    reason: e.to_string(),
                };
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        let tau = ev.torques();
        let tau_max = max_abs(&tau);
        let done = tau_max <= settings.torque_tolerance;
        if record || done || iter == settings.max_iters {
            traj.push(T::from_usize(iter).unwrap(), theta.clone(), ev.energy, tau_max);
        }
        if done {
            traj.status = RunStatus::Converged { iterations: iter };
            return Ok(traj);
        }
        if iter == settings.max_iters {
            break;
        }
        theta = euler_update(&theta, step_scale(settings, &tau), &tau);
    }
    traj.status = RunStatus::MaxIterations;
    Ok(traj)
}

/// Forward-Euler integration `θ_{i+1} = θ_i + dt · field(θ_i)`, recording the
/// state, energy and open-loop torque norm at every step.
pub fn simulate_ode<T: Scalar, F: VectorField<T> + ?Sized>(
    field: &F,
    topology: &ChainTopology<T>,
    theta0: &[T],
    dt: T,
    steps: usize,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(KcmError::param("dt must be positive"));
    }
    if steps == 0 {
        return Err(KcmError::param("steps must be at least 1"));
    }
    check_conformation(topology, theta0)?;
    let mut traj = Trajectory::empty();
    let mut theta = theta0.to_vec();
    for i in 0..=steps {
        let ev = evaluate_forces(topology, &theta).and_then(|ev| {
            let v = if i < steps { Some(field.eval(&theta)?) } else { None };
            Ok((ev, v))
        });
        let (ev, velocity) = match ev {
            Ok(x) => x,
            Err(e) => {
                traj.status = RunStatus::Aborted {
                    step: i,
                    reason: e.to_string(),
                };
                return Ok(traj);
            }
        };
        let t = dt * T::from_usize(i).unwrap();
        traj.push(t, theta.clone(), ev.energy, max_abs(&ev.torques()));
        if let Some(v) = velocity {
            if v.len() != theta.len() {
                traj.status = RunStatus::Aborted {
                    step: i,
                    reason: format!("field returned {} components, expected {}", v.len(), theta.len()),
                };
                return Ok(traj);
            }
            theta = euler_update(&theta, dt, &v);
        }
    }
    traj.status = RunStatus::Completed;
    Ok(traj)
}

/// Input `u = −2𝒥ᵀℱ(θ)`, turning the closed loop into `θ̇ = −τ(θ)`.
pub fn trivial_unfold_input<T: Scalar>(topology: &ChainTopology<T>, theta: &[T]) -> Result<Vec<T>> {
    let two = T::lit(2.0);
    Ok(evaluate_forces(topology, theta)?
        .torques()
        .into_iter()
        .map(|t| -two * t)
        .collect())
}

/// Closed loop under the trivial unfolding input: `θ ↦ τ(θ) + u(θ)`.
#[derive(Debug, Clone, Copy)]
pub struct TrivialUnfoldField<'a, T> {
    pub topology: &'a ChainTopology<T>,
}

impl<T: Scalar> VectorField<T> for TrivialUnfoldField<'_, T> {
    fn eval(&self, theta: &[T]) -> Result<Vec<T>> {
        let tau = evaluate_forces(self.topology, theta)?.torques();
        let two = T::lit(2.0);
        Ok(tau.iter().map(|t| *t + (-two * *t)).collect())
    }
}
