//! File formats: energy-profile CSV, multi-frame XYZ, sphere-scan CSV.
//!
//! CSV files use a header row, comma separators, `.` decimals and 17
//! significant digits (`{:.16e}`) for every float.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::chain::{kinematic_state, ChainTopology};
use crate::chetaev::ChetaevParams;
use crate::engine::Trajectory;
use crate::error::{KcmError, Result};

pub const ENERGY_HEADER: &str = "step,time,G_elec,G_vdw,G_total,|r_NC|,C_twz";
pub const SPHERE_HEADER: &str = "dtheta1,dtheta2,dtheta3,C_twz";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub step: usize,
    pub time: f64,
    pub g_elec: f64,
    pub g_vdw: f64,
    pub g_total: f64,
    pub r_nc: f64,
    pub c_twz: f64,
}

pub fn energy_rows(
    trajectory: &Trajectory<f64>,
    topology: &ChainTopology<f64>,
    params: &ChetaevParams<f64>,
) -> Result<Vec<EnergyRow>> {
    trajectory
        .conformations
        .iter()
        .enumerate()
        .map(|(step, theta)| {
            let state = kinematic_state(topology, theta)?;
            let e = trajectory.energies[step];
            Ok(EnergyRow {
                step,
                time: trajectory.times[step],
                g_elec: e.elec,
                g_vdw: e.vdw,
                g_total: e.total,
                r_nc: state.end_to_end.norm(),
                c_twz: params.c_twz_at(&state),
            })
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| KcmError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| KcmError::io(path, e))?))
}

pub fn write_energy_csv_to<W: Write>(mut w: W, rows: &[EnergyRow]) -> std::io::Result<()> {
    writeln!(w, "{ENERGY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.step, r.time, r.g_elec, r.g_vdw, r.g_total, r.r_nc, r.c_twz
        )?;
    }
    w.flush()
}

pub fn write_energy_csv(path: impl AsRef<Path>, rows: &[EnergyRow]) -> Result<()> {
    let path = path.as_ref();
    write_energy_csv_to(create(path)?, rows).map_err(|e| KcmError::io(path, e))
}

/// Every `stride`-th state as one XYZ frame: atom count, a comment line with
/// the step index and `G_total`, then `element x y z` per atom (Å).
pub fn write_xyz_to<W: Write>(
    mut w: W,
    trajectory: &Trajectory<f64>,
    topology: &ChainTopology<f64>,
    stride: usize,
) -> Result<()> {
    if trajectory.is_empty() {
        return Err(KcmError::param("cannot export an empty trajectory"));
    }
    let stride = stride.max(1);
    let io = |e| KcmError::io("<xyz>", e);
    for (step, theta) in trajectory.conformations.iter().enumerate().step_by(stride) {
        let positions = kinematic_state(topology, theta)?.atom_positions(topology);
        writeln!(w, "{}", positions.len()).map_err(io)?;
        writeln!(w, "step={} G_total={:.16e}", step, trajectory.energies[step].total).map_err(io)?;
        // `+ 0.0` turns −0 into 0 so mirror-symmetric frames print identically
        for (i, p) in positions.iter().enumerate() {
            writeln!(
                w,
                "{} {:.10} {:.10} {:.10}",
                topology.atom_element(i),
                p.x + 0.0,
                p.y + 0.0,
                p.z + 0.0
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn export_xyz(
    trajectory: &Trajectory<f64>,
    topology: &ChainTopology<f64>,
    path: impl AsRef<Path>,
    stride: usize,
) -> Result<()> {
    let path = path.as_ref();
    write_xyz_to(create(path)?, trajectory, topology, stride).map_err(|e| match e {
        KcmError::Io { source, .. } => KcmError::io(path, source),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereRow {
    pub delta: [f64; 3],
    pub c_twz: f64,
}

pub fn write_sphere_csv(path: impl AsRef<Path>, rows: &[SphereRow]) -> Result<()> {
    let path = path.as_ref();
    let write = || -> std::io::Result<()> {
        let mut w = create(path).map_err(|e| std::io::Error::other(e.to_string()))?;
        writeln!(w, "{SPHERE_HEADER}")?;
        for r in rows {
            let [a, b, c] = r.delta;
            writeln!(w, "{a:.16e},{b:.16e},{c:.16e},{:.16e}", r.c_twz)?;
        }
        w.flush()
    };
    write().map_err(|e| KcmError::io(path, e))
}

/// Concatenates CSVs with identical headers into one long table whose first
/// column names the source run.
pub fn merge_csv(inputs: &[(String, &Path)], out: impl AsRef<Path>) -> Result<()> {
    let out = out.as_ref();
    let mut w = create(out)?;
    let mut header: Option<String> = None;
    for (label, path) in inputs {
        if label.contains(',') {
            return Err(KcmError::param(format!("run label {label:?} contains a comma")));
        }
        let f = File::open(path).map_err(|e| KcmError::io(*path, e))?;
        let mut lines = BufReader::new(f).lines();
        let first = match lines.next() {
            Some(l) => l.map_err(|e| KcmError::io(*path, e))?,
            None => return Err(KcmError::param(format!("{} is empty", path.display()))),
        };
        match &header {
            None => {
                writeln!(w, "run,{first}").map_err(|e| KcmError::io(out, e))?;
                header = Some(first);
            }
            Some(h) if *h != first => {
                return Err(KcmError::param(format!(
                    "header of {} does not match the first input",
                    path.display()
                )))
            }
            Some(_) => {}
        }
        for line in lines {
            let line = line.map_err(|e| KcmError::io(*path, e))?;
            if !line.is_empty() {
                writeln!(w, "{label},{line}").map_err(|e| KcmError::io(out, e))?;
            }
        }
    }
    w.flush().map_err(|e| KcmError::io(out, e))
}
