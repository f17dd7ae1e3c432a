//! Experiment drivers behind the CLI subcommands.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Mode, ReferenceSource, SimConfig, StartKind, REFERENCE_THETA};
use super::output::{
    energy_rows, export_xyz, write_energy_csv, write_sphere_csv, EnergyRow, SphereRow,
};
use crate::ccf::{Ccf, SontagField};
use crate::chain::{kinematic_state, ChainTopology};
use crate::chetaev::{certify_instability, sphere_sample, CertifySettings, ChetaevParams};
use crate::energy::dihedral_torques;
use crate::engine::{fold_endpoint, fold_to_convergence, simulate_ode, RunStatus, Trajectory};
use crate::error::{KcmError, Result};
use crate::linalg::{max_abs, Vec3};
use crate::tweezer::{Tweezer, TweezerConfig};

pub fn load_topology(cfg: &SimConfig) -> Result<ChainTopology<f64>> {
    match &cfg.topology.path {
        Some(p) => ChainTopology::load(p),
        None => Ok(ChainTopology::default()),
    }
}

/// The folded reference `θ*` and the status of each fold stage.
pub fn reference_conformation(
    topology: &ChainTopology<f64>,
    cfg: &SimConfig,
) -> Result<(Vec<f64>, Vec<RunStatus>)> {
    let theta = cfg
        .reference
        .theta
        .clone()
        .unwrap_or_else(|| REFERENCE_THETA.to_vec());
    if cfg.reference.source == ReferenceSource::Verbatim {
        return Ok((theta, Vec::new()));
    }
    let mut theta = theta;
    let mut statuses = Vec::new();
    for stage in &cfg.reference.stages {
        let traj = fold_endpoint(topology, &theta, &stage.settings()?)?;
        if let RunStatus::Aborted { .. } = traj.status {
            return Err(KcmError::param(format!(
                "reference fold failed: {}",
                traj.status.label()
            )));
        }
        theta = traj.last().expect("fold records its final state").to_vec();
        statuses.push(traj.status);
    }
    Ok((theta, statuses))
}

/// Unit direction in joint space that lengthens `|r_NC|` fastest.
pub fn stretch_direction(topology: &ChainTopology<f64>, theta: &[f64]) -> Result<Vec<f64>> {
    let state = kinematic_state(topology, theta)?;
    let rhat = state
        .end_to_end
        .normalized()
        .ok_or_else(|| KcmError::param("end-to-end vector is zero"))?;
    let g: Vec<f64> = state
        .end_to_end_jacobian()
        .iter()
        .map(|c| c.dot(&rhat))
        .collect();
    let n = crate::linalg::norm(&g);
    if n == 0.0 {
        return Err(KcmError::param("end-to-end length is stationary in every joint"));
    }
    Ok(g.into_iter().map(|x| x / n).collect())
}

pub fn start_conformation(
    cfg: &SimConfig,
    topology: &ChainTopology<f64>,
    params: &ChetaevParams<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let star = params.theta_star();
    let mag = cfg.start.magnitude;
    let shift = |d: &[f64]| -> Vec<f64> { star.iter().zip(d).map(|(a, b)| a + b).collect() };
    match cfg.start_kind() {
        StartKind::None => Ok(star.to_vec()),
        StartKind::Stretch => {
            let d: Vec<f64> = stretch_direction(topology, star)?.iter().map(|x| x * mag).collect();
            Ok(shift(&d))
        }
        StartKind::Random => Ok(shift(&sphere_sample(rng, star.len(), mag))),
        StartKind::PositiveSet => {
            for _ in 0..100_000 {
                let th = shift(&sphere_sample(rng, star.len(), mag));
                if params.in_positive_set(topology, &th)? {
                    return Ok(th);
                }
            }
            Err(KcmError::param("no positive-set start found"))
        }
    }
}

/// `n` points of a Fibonacci lattice on the sphere of radius `r` in `R³`.
pub fn fibonacci_sphere(n: usize, r: f64) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            let v = Vec3::new(rho * phi.cos(), rho * phi.sin(), z);
            let v = v * (r / v.norm());
            v.to_array()
        })
        .collect()
}

/// `C_twz` at `θ* + [δ1, δ2, δ3, 0, …]` over the Fibonacci sphere.
pub fn sphere_scan(
    params: &ChetaevParams<f64>,
    topology: &ChainTopology<f64>,
    points: usize,
    radius: f64,
) -> Result<Vec<SphereRow>> {
    if topology.dof() < 3 {
        return Err(KcmError::param("sphere scan needs at least three joints"));
    }
    fibonacci_sphere(points, radius)
        .into_iter()
        .map(|delta| {
            let mut th = params.theta_star().to_vec();
            for (t, d) in th.iter_mut().zip(delta) {
                *t += d;
            }
            Ok(SphereRow {
                delta,
                c_twz: params.c_twz(topology, &th)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub mode: Mode,
    /// Status of the simulated trajectory, if the mode runs one.
    pub status: Option<RunStatus>,
    pub report: String,
    pub artifacts: Vec<PathBuf>,
    pub rows: Vec<EnergyRow>,
}

struct Report(String);

impl Report {
    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }
}

fn e(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs the configured mode and writes its artifacts under `output.dir`.
pub fn run_experiment(cfg: &SimConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let resolved = cfg.resolved();
    let topology = load_topology(cfg)?;
    let (star, stages) = reference_conformation(&topology, cfg)?;
    let params = ChetaevParams::new(&topology, star.clone(), cfg.chetaev.alpha_c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let out = &cfg.output;
    let path = |name: &str| out.dir.join(name);

    let mut rep = Report(String::new());
    let _ = writeln!(rep.0, "# kcm run report");
    rep.kv("mode", format!("{:?}", cfg.mode.name()));
    for (i, s) in stages.iter().enumerate() {
        rep.kv(&format!("reference_stage_{}", i + 1), format!("{:?}", s.label()));
    }
    let tau_star = dihedral_torques(&topology, &star)?;
    rep.kv("reference_max_torque", e(max_abs(&tau_star)));
    rep.kv("reference_end_to_end", e(params.r_star().norm()));
    rep.kv("reference_theta", format!("{star:?}"));

    let mut artifacts = Vec::new();
    let mut status = None;
    let mut rows = Vec::new();

    let tweezer_cfg = || -> Result<TweezerConfig<f64>> {
        let t = &cfg.tweezer;
        let c = match t.direction {
            Some(d) => {
                let dir = Vec3::from(d)
                    .normalized()
                    .ok_or_else(|| KcmError::Config("tweezer.direction is zero".into()))?;
                TweezerConfig::new(dir * t.x0_nm, t.kappa0, t.m, star.clone())?
            }
            None => TweezerConfig::along_end_to_end(&topology, star.clone(), t.x0_nm, t.kappa0, t.m)?,
        };
        Ok(c.with_torque_sum(t.torque_sum))
    };

    match cfg.mode {
        Mode::Fold | Mode::UnfoldTweezer | Mode::UnfoldCcf => {
            let start = start_conformation(cfg, &topology, &params, &mut rng)?;
            let traj: Trajectory<f64> = match cfg.mode {
                Mode::Fold => {
                    rep.kv("fold_step", e(cfg.fold.step));
                    fold_to_convergence(&topology, &start, &cfg.fold.settings()?)?
                }
                Mode::UnfoldTweezer => {
                    let tw = Tweezer::new(&topology, tweezer_cfg()?)?;
                    let d = tw.config().displacement_nm;
                    rep.kv("tweezer_displacement_nm", format!("[{}, {}, {}]", e(d.x), e(d.y), e(d.z)));
                    simulate_ode(&tw.unfold_field(), &topology, &start, cfg.integration.dt, cfg.integration.steps)?
                }
                _ => {
                    let ccf = Ccf::new(&params, cfg.sontag.ccf.choice());
                    let field = SontagField::new(ccf, cfg.sontag.settings()?, &topology, &start)?;
                    let traj = simulate_ode(&field, &topology, &start, cfg.integration.dt, cfg.integration.steps)?;
                    rep.kv("clamp_limit", field.limit().map_or("none".into(), e));
                    rep.kv("clamp_events", field.clamp_events());
                    let (p, q) = (cfg.sontag.p, cfg.sontag.q);
                    let mut worst = 0.0f64;
                    for th in &traj.conformations {
                        let t = field.terms(th)?;
                        let m = t.margin(p, q);
                        if m > 0.0 {
                            worst = worst.max((t.rate() - m).abs() / m);
                        }
                    }
                    rep.kv("rate_identity_max_relative_error", e(worst));
                    traj
                }
            };
            if cfg.mode != Mode::Fold {
                rep.kv("dt", e(cfg.integration.dt));
                rep.kv("steps", cfg.integration.steps);
                rep.kv("horizon", e(cfg.integration.dt * cfg.integration.steps as f64));
            }
            rep.kv("status", format!("{:?}", traj.status.label()));
            rep.kv("states_recorded", traj.len());
            rows = energy_rows(&traj, &topology, &params)?;
            if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
                rep.kv("G_total_start", e(first.g_total));
                rep.kv("G_total_end", e(last.g_total));
                rep.kv("r_NC_start", e(first.r_nc));
                rep.kv("r_NC_end", e(last.r_nc));
                rep.kv("C_twz_start", e(first.c_twz));
                rep.kv("C_twz_end", e(last.c_twz));
            }
            if let Some(t) = traj.torque_norms.last() {
                rep.kv("final_max_torque", e(*t));
            }
            let rises = |f: fn(&EnergyRow) -> f64| rows.windows(2).filter(|w| f(&w[1]) > f(&w[0])).count();
            rep.kv("r_NC_increasing_steps", rises(|r| r.r_nc));
            rep.kv("G_total_increasing_steps", rises(|r| r.g_total));
            rep.kv("C_twz_increasing_steps", rises(|r| r.c_twz));
            write_energy_csv(path(&out.energy_csv), &rows)?;
            artifacts.push(path(&out.energy_csv));
            if !traj.is_empty() {
                export_xyz(&traj, &topology, path(&out.trajectory_xyz), out.xyz_stride)?;
                artifacts.push(path(&out.trajectory_xyz));
            }
            status = Some(traj.status);
        }
        Mode::Certify => {
            let tw = Tweezer::new(&topology, tweezer_cfg()?)?;
            let field = tw.unfold_field();
            let c = &cfg.chetaev;
            let eps = vec![c.hessian_eps; topology.dof()];
            let h_fd = params.hessian_p_fd(&field, &topology, &eps)?;
            let h_an = params.hessian_p_analytic(&field, &topology, c.field_eps)?;
            let rel = h_fd.sub(&h_an).frobenius_norm() / h_an.frobenius_norm();
            rep.kv("hessian_eps", e(c.hessian_eps));
            rep.kv("field_eps", e(c.field_eps));
            rep.kv("hessian_fd_vs_analytic_relative_frobenius", e(rel));
            let cert = certify_instability(
                &params,
                &topology,
                &h_fd,
                &CertifySettings {
                    n_samples: c.samples,
                    radius: c.radius,
                    seed: cfg.seed,
                    ..CertifySettings::default()
                },
            )?;
            rep.kv("n_samples", cert.n_samples);
            rep.kv("n_drawn", cert.n_drawn);
            rep.kv("radius", e(cert.radius));
            rep.kv("min_quadratic_form", e(cert.min_quadratic_form));
            rep.kv("fraction_positive", e(cert.fraction_positive));
            rep.kv("verdict", format!("{:?}", cert.verdict()));
        }
        Mode::SphereScan => {
            let sr = sphere_scan(&params, &topology, cfg.sphere.points, cfg.sphere.radius)?;
            let positive = sr.iter().filter(|r| r.c_twz > 0.0).count();
            rep.kv("sphere_points", sr.len());
            rep.kv("sphere_radius", e(cfg.sphere.radius));
            rep.kv("sphere_positive_points", positive);
            write_sphere_csv(path(&out.sphere_csv), &sr)?;
            artifacts.push(path(&out.sphere_csv));
        }
    }

    let _ = writeln!(rep.0, "\n# resolved config\n{}", resolved.to_toml_string());
    let report_path = path(&out.report);
    std::fs::create_dir_all(&out.dir).map_err(|err| KcmError::io(&out.dir, err))?;
    std::fs::write(&report_path, &rep.0).map_err(|err| KcmError::io(&report_path, err))?;
    artifacts.push(report_path);
    Ok(RunOutcome {
        mode: cfg.mode,
        status,
        report: rep.0,
        artifacts,
        rows,
    })
}
