mod common;

use std::path::Path;

use common::{folded, topology};
use kcm_core::chain::{kinematic_state, Atom, AtomGroup, ChainTopology};
use kcm_core::chetaev::ChetaevParams;
use kcm_core::energy::EnergyBreakdown;
use kcm_core::engine::{RunStatus, Trajectory};
use kcm_core::harness::{
    fibonacci_sphere, merge_csv, run_experiment, sphere_scan, write_xyz_to, Mode, ReferenceSource, SimConfig,
    ENERGY_HEADER,
};
use kcm_core::linalg::Vec3;

fn atom(element: &str) -> Atom<f64> {
    Atom {
        name: element.into(),
        element: element.into(),
        offset: Vec3::zero(),
        charge: 0.0,
        lj_epsilon: 0.0,
        lj_radius: 1.0,
    }
}

fn two_atom_stub() -> ChainTopology<f64> {
    let z = Vec3::new(0.0, 0.0, 1.0);
    let x = Vec3::new(1.0, 0.0, 0.0);
    let groups = vec![
        AtomGroup {
            link: 0,
            label: "start".into(),
            atoms: vec![atom("N")],
        },
        AtomGroup {
            link: 4,
            label: "end".into(),
            atoms: vec![atom("C")],
        },
    ];
    ChainTopology::new(1, vec![z, x, z, z], vec![x, x, x, x * 2.0], groups, 2).unwrap()
}

fn trajectory(thetas: Vec<Vec<f64>>) -> Trajectory<f64> {
    let n = thetas.len();
    Trajectory {
        times: (0..n).map(|i| i as f64).collect(),
        conformations: thetas,
        energies: vec![EnergyBreakdown::new(0.0, 0.0); n],
        torque_norms: vec![0.0; n],
        status: RunStatus::Completed,
    }
}

#[test]
fn xyz_bytes_for_a_two_atom_stub() {
    let t = two_atom_stub();
    let mut buf = Vec::new();
    write_xyz_to(&mut buf, &trajectory(vec![vec![0.0; 4]]), &t, 1).unwrap();
    let expect = "2\n\
                  step=0 G_total=0.0000000000000000e0\n\
                  N 0.0000000000 0.0000000000 0.0000000000\n\
                  C 3.0000000000 0.0000000000 0.0000000000\n";
    assert_eq!(String::from_utf8(buf).unwrap(), expect);
}

#[test]
fn xyz_frames_follow_the_trajectory() {
    let t = topology();
    let thetas: Vec<Vec<f64>> = (0..4).map(|i| folded().iter().map(|x| x + 0.01 * i as f64).collect()).collect();
    let mut buf = Vec::new();
    write_xyz_to(&mut buf, &trajectory(thetas.clone()), t, 1).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let per_frame = t.n_atoms() + 2;
    assert_eq!(lines.len(), thetas.len() * per_frame);
    for (f, th) in thetas.iter().enumerate() {
        let pos = kinematic_state(t, th).unwrap().atom_positions(t);
        let frame = &lines[f * per_frame..(f + 1) * per_frame];
        assert_eq!(frame[0], t.n_atoms().to_string());
        assert!(frame[1].starts_with(&format!("step={f} ")));
        for (a, line) in frame[2..].iter().enumerate() {
            let cols: Vec<&str> = line.split(' ').collect();
            assert_eq!(cols[0], t.atom_element(a));
            for (k, c) in cols[1..].iter().enumerate() {
                let v: f64 = c.parse().unwrap();
                assert!((v - pos[a].to_array()[k]).abs() <= 5e-11);
            }
        }
    }
    let mut strided = Vec::new();
    write_xyz_to(&mut strided, &trajectory(thetas), t, 3).unwrap();
    assert_eq!(String::from_utf8(strided).unwrap().lines().count(), 2 * per_frame);
}

#[test]
fn empty_trajectory_is_an_error() {
    let mut buf = Vec::new();
    assert!(write_xyz_to(&mut buf, &trajectory(Vec::new()), &two_atom_stub(), 1).is_err());
}

#[test]
fn sphere_rows_sit_on_the_sphere_and_match_direct_calls() {
    let t = topology();
    let p = ChetaevParams::new(t, folded().to_vec(), std::f64::consts::FRAC_PI_4).unwrap();
    let rows = sphere_scan(&p, t, 300, 0.1).unwrap();
    assert_eq!(rows.len(), 300);
    for r in &rows {
        let r2: f64 = r.delta.iter().map(|x| x * x).sum();
        assert!((r2 - 0.01).abs() < 1e-12);
        let mut th = folded().to_vec();
        for (x, d) in th.iter_mut().zip(r.delta) {
            *x += d;
        }
        assert_eq!(r.c_twz, p.c_twz(t, &th).unwrap());
        let angle = p.cone_angle(t, &th).unwrap();
        let alpha = p.alpha_c();
        assert_eq!(r.c_twz > 0.0, angle > alpha && angle < std::f64::consts::PI - alpha);
    }
    assert_eq!(fibonacci_sphere(7, 1.0), fibonacci_sphere(7, 1.0));
}

fn config(mode: Mode, dir: &Path) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.mode = mode;
    cfg.output.dir = dir.to_path_buf();
    // skip the long reference fold; the cached result is the same conformation
    cfg.reference.source = ReferenceSource::Verbatim;
    cfg.reference.theta = Some(folded().to_vec());
    cfg.integration.steps = 50;
    cfg
}

#[test]
fn fold_from_the_reference_converges_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(Mode::Fold, dir.path())).unwrap();
    assert_eq!(out.status, Some(RunStatus::Converged { iterations: 0 }));
    let csv = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines, vec![ENERGY_HEADER, lines[1]]);
    assert!(lines[1].starts_with("0,"));
}

#[test]
fn runs_are_byte_identical() {
    for mode in [Mode::UnfoldTweezer, Mode::UnfoldCcf, Mode::Certify, Mode::SphereScan] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut ca = config(mode, a.path());
        ca.chetaev.samples = 50;
        ca.sphere.points = 100;
        let mut cb = ca.clone();
        cb.output.dir = b.path().to_path_buf();
        let (ra, rb) = (run_experiment(&ca).unwrap(), run_experiment(&cb).unwrap());
        assert_eq!(ra.artifacts.len(), rb.artifacts.len());
        for (pa, pb) in ra.artifacts.iter().zip(&rb.artifacts) {
            let (ba, bb) = (std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
            if pa.ends_with("report.txt") {
                // the report names its own output directory
                let strip = |s: Vec<u8>, d: &Path| String::from_utf8(s).unwrap().replace(&d.display().to_string(), "<dir>");
                assert_eq!(strip(ba, a.path()), strip(bb, b.path()), "{mode:?}");
            } else {
                assert_eq!(ba, bb, "{mode:?} {}", pa.display());
            }
        }
    }
}

#[test]
fn report_embeds_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Mode::UnfoldTweezer, dir.path());
    let out = run_experiment(&cfg).unwrap();
    let (_, toml) = out.report.split_once("# resolved config\n").unwrap();
    let back = SimConfig::from_toml_str(toml).unwrap();
    assert_eq!(back.to_toml_string(), cfg.resolved().to_toml_string());
    assert!(toml.contains("kappa0"));
    assert!(toml.contains("dt"));
}

#[test]
fn merge_builds_a_long_table() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "x,y\n1,2\n3,4\n").unwrap();
    std::fs::write(&b, "x,y\n5,6\n").unwrap();
    let out = dir.path().join("m.csv");
    merge_csv(&[("a".into(), a.as_path()), ("b".into(), b.as_path())], &out).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "run,x,y\na,1,2\na,3,4\nb,5,6\n");
    std::fs::write(&b, "x,z\n5,6\n").unwrap();
    assert!(merge_csv(&[("a".into(), a.as_path()), ("b".into(), b.as_path())], &out).is_err());
}

#[test]
fn config_round_trips_and_rejects_bad_values() {
    let cfg = SimConfig::default();
    let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back.to_toml_string(), cfg.to_toml_string());
    assert!(SimConfig::from_toml_str("mode = \"fold\"\nbogus = 1\n").is_err());
    let mut bad = SimConfig::default();
    bad.integration.dt = 0.0;
    assert!(bad.validate().is_err());
    let mut bad = SimConfig::default();
    bad.integration.steps = 0;
    assert!(bad.validate().is_err());
}
