mod common;

use std::f64::consts::PI;

use common::{footnote, near, topology};
use kcm_core::chain::{kinematic_state, Atom, AtomGroup, ChainTopology};
use kcm_core::energy::dihedral_torques;
use kcm_core::engine::VectorField;
use kcm_core::linalg::Vec3;
use kcm_core::tweezer::{TorqueSum, Tweezer, TweezerConfig};
use kcm_core::units::PN_TO_KCAL_MOL_A;

fn paper_tweezer(t: &ChainTopology<f64>, theta_star: Vec<f64>) -> Tweezer<'_, f64> {
    Tweezer::new(t, TweezerConfig::along_end_to_end(t, theta_star, 51.0, 0.16, 2).unwrap()).unwrap()
}

/// One plane lying on the x axis: joint 1 (about z at the origin) swings the
/// 5 Å chain around, so θ₁ = π moves the C-terminus by exactly 1 nm.
fn straight_plane() -> ChainTopology<f64> {
    let z = Vec3::new(0.0, 0.0, 1.0);
    let x = Vec3::new(1.0, 0.0, 0.0);
    let atom = Atom {
        name: "C".into(),
        element: "C".into(),
        offset: Vec3::zero(),
        charge: 0.0,
        lj_epsilon: 0.0,
        lj_radius: 1.0,
    };
    let groups = vec![AtomGroup {
        link: 4,
        label: "end".into(),
        atoms: vec![atom],
    }];
    ChainTopology::new(1, vec![z, x, x, x], vec![x, x, x, x * 2.0], groups, 2).unwrap()
}

#[test]
fn stiffness_and_force_at_one_nanometre() {
    let t = straight_plane();
    let cfg = TweezerConfig::new(Vec3::new(51.0, 0.0, 0.0), 0.16, 2, vec![0.0; 4]).unwrap();
    let tw = Tweezer::new(&t, cfg).unwrap();
    let th = [PI, 0.0, 0.0, 0.0];
    assert!((tw.trap_stiffness(&th).unwrap() - 0.16).abs() < 1e-14);
    let f = tw.force(&th).unwrap();
    assert!((f.x - 8.16).abs() < 1e-12 && f.y == 0.0 && f.z == 0.0);
    // halving the angle gives |Δr| = √2 · 5 Å, so κ scales by (√2/2)^m
    let half = [PI / 2.0, 0.0, 0.0, 0.0];
    for m in 1..=4u32 {
        let cfg = TweezerConfig::new(Vec3::new(51.0, 0.0, 0.0), 0.16, m, vec![0.0; 4]).unwrap();
        let k = Tweezer::new(&t, cfg).unwrap().trap_stiffness(&half).unwrap();
        assert!((k - 0.16 * 0.5f64.sqrt().powi(m as i32)).abs() < 1e-14);
    }
}

#[test]
fn displacement_points_along_the_reference_end_to_end() {
    let t = topology();
    let tw = paper_tweezer(t, footnote());
    let r = kinematic_state(t, &footnote()).unwrap().end_to_end;
    let d = tw.config().displacement_nm;
    assert!((d.norm() - 51.0).abs() < 1e-12);
    assert!((d.dot(&r) / (d.norm() * r.norm()) - 1.0).abs() < 1e-14);
}

#[test]
fn c_terminus_input_is_jacobian_transpose_of_force() {
    let t = topology();
    let tw = paper_tweezer(t, footnote());
    let only = Tweezer::new(t, tw.config().clone().with_torque_sum(TorqueSum::CTerminus)).unwrap();
    for th in near(&footnote(), 5, 0.3, 2) {
        let state = kinematic_state(t, &th).unwrap();
        let f = only.force(&th).unwrap() * PN_TO_KCAL_MOL_A;
        let expect: Vec<f64> = state.end_to_end_jacobian().iter().map(|c| c.dot(&f)).collect();
        let got = only.unfold_input(&th).unwrap();
        assert!(common::rel_err(&got, &expect) < 1e-12);
    }
}

#[test]
fn last_link_input_matches_brute_force_wrench() {
    // T = Σ r_i × F over last-link atoms while the force itself counts once,
    // so joint j sees u_j · (T − r_j × F)
    let t = topology();
    let tw = paper_tweezer(t, footnote());
    let last = t.dof();
    for th in near(&footnote(), 5, 0.3, 4) {
        let state = kinematic_state(t, &th).unwrap();
        let pos = state.atom_positions(t);
        let f = tw.force(&th).unwrap() * PN_TO_KCAL_MOL_A;
        let mut torque = Vec3::zero();
        for (a, p) in pos.iter().enumerate() {
            if t.atom_link(a) == last {
                torque += p.cross(&f);
            }
        }
        let expect: Vec<f64> = (0..last)
            .map(|j| state.unit_axes[j].dot(&(torque - state.joint_positions[j].cross(&f))))
            .collect();
        assert!(common::rel_err(&tw.unfold_input(&th).unwrap(), &expect) < 1e-12);
    }
}

#[test]
fn input_matches_dense_jacobian_product() {
    let t = topology();
    let tw = paper_tweezer(t, footnote());
    let mut th = footnote();
    th[7] += 0.25;
    let state = kinematic_state(t, &th).unwrap();
    let gf = tw.generalized_force(&th).unwrap();
    assert!(gf.slots[..t.dof() - 1].iter().all(|w| w.to_array() == [0.0; 6]));
    let dense = state.chain_jacobian().dense_transpose().mul_vec(&gf.stacked());
    for (a, b) in tw.unfold_input(&th).unwrap().iter().zip(&dense) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-6));
    }
}

#[test]
fn unfold_field_is_torque_plus_input() {
    let t = topology();
    let tw = paper_tweezer(t, footnote());
    for th in near(&footnote(), 5, 0.2, 6) {
        let tau = dihedral_torques(t, &th).unwrap();
        let u = tw.unfold_input(&th).unwrap();
        let v = tw.unfold_field().eval(&th).unwrap();
        let expect: Vec<f64> = tau.iter().zip(&u).map(|(a, b)| a + b).collect();
        assert!(common::rel_err(&v, &expect) < 1e-12, "{}", common::rel_err(&v, &expect));
    }
}

#[test]
fn tweezer_is_silent_at_the_reference() {
    let t = topology();
    let tw = paper_tweezer(t, footnote());
    let v = tw.unfold_field().eval(&footnote()).unwrap();
    assert_eq!(v, dihedral_torques(t, &footnote()).unwrap());
}
