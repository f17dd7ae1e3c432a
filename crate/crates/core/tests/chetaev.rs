mod common;

use std::f64::consts::{FRAC_PI_4, PI};

use common::{central_diff, folded, footnote, near, rel_err, topology};
use kcm_core::chain::kinematic_state;
use kcm_core::chetaev::{
    c_twz_core, certify_instability, hessian_forward, CertifySettings, ChetaevParams,
};
use kcm_core::linalg::{DMat, Vec3};
use kcm_core::tweezer::{Tweezer, TweezerConfig};
use nalgebra::{Matrix3, SymmetricEigen};
use proptest::prelude::*;

fn params() -> ChetaevParams<f64> {
    ChetaevParams::new(topology(), footnote(), FRAC_PI_4).unwrap()
}

fn frobenius_rel(a: &DMat<f64>, b: &DMat<f64>) -> f64 {
    let n = a.nrows();
    let (mut d, mut s) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            d += (a[(i, j)] - b[(i, j)]).powi(2);
            s += b[(i, j)].powi(2);
        }
    }
    (d / s).sqrt()
}

#[test]
fn vanishes_at_the_reference() {
    assert_eq!(params().c_twz(topology(), &footnote()).unwrap(), 0.0);
    assert!(params().cone_angle(topology(), &footnote()).is_err());
    assert!(!params().in_positive_set(topology(), &footnote()).unwrap());
}

#[test]
fn hand_examples() {
    let r = Vec3::new(1.0, 0.0, 0.0);
    // perpendicular: |Δr|²|r|²/2
    assert!((c_twz_core(&Vec3::new(0.0, 2.0, 0.0), &r, FRAC_PI_4).unwrap() - 2.0).abs() < 1e-15);
    // parallel: (cos²α − 1)|Δr|²|r|²
    assert!((c_twz_core(&Vec3::new(3.0, 0.0, 0.0), &r, FRAC_PI_4).unwrap() + 4.5).abs() < 1e-14);
    assert!(c_twz_core(&Vec3::new(1.0, 1.0, 0.0), &Vec3::zero(), FRAC_PI_4).is_err());
}

#[test]
fn cone_angle_bounds_are_validated() {
    assert!(ChetaevParams::new(topology(), footnote(), 0.0).is_err());
    assert!(ChetaevParams::new(topology(), footnote(), PI / 2.0).is_err());
    assert!(ChetaevParams::new(topology(), footnote(), 0.3).is_ok());
}

fn ball_strategy() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, 22), 0.0f64..1.0).prop_filter_map("nonzero", |(v, s)| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (n > 1e-6).then(|| v.iter().map(|x| 0.1 * s * x / n).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn positive_set_is_outside_the_double_cone(delta in ball_strategy(), alpha in 0.1f64..1.4) {
        let t = topology();
        let p = ChetaevParams::new(t, footnote(), alpha).unwrap();
        let th: Vec<f64> = footnote().iter().zip(&delta).map(|(a, b)| a + b).collect();
        let angle = p.cone_angle(t, &th).unwrap();
        prop_assert_eq!(p.in_positive_set(t, &th).unwrap(), angle > alpha && angle < PI - alpha);
    }

    #[test]
    fn gradient_matches_finite_differences(delta in prop::collection::vec(-0.5f64..0.5, 22)) {
        let t = topology();
        let p = params();
        let th: Vec<f64> = footnote().iter().zip(&delta).map(|(a, b)| a + b).collect();
        let g = p.grad_c_twz(t, &th).unwrap();
        let fd: Vec<f64> = (0..22).map(|j| central_diff(|x| p.c_twz(t, x).unwrap(), &th, j, 1e-6)).collect();
        prop_assert!(rel_err(&g, &fd) < 1e-5);
    }
}

#[test]
fn m_spectrum_matches_closed_form() {
    for alpha in [0.2, FRAC_PI_4, 1.2] {
        let p = ChetaevParams::new(topology(), footnote(), alpha).unwrap();
        let m = p.m();
        let na = Matrix3::from_fn(|i, j| m.m[i][j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(na).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let r2 = p.r_star().norm_squared();
        let (s, c) = (alpha.sin(), alpha.cos());
        let expect = [-r2 * s * s, r2 * c * c, r2 * c * c];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let det = -s * s * c.powi(4) * r2.powi(3);
        assert!((p.m_determinant() - det).abs() < 1e-10 * det.abs());
    }
}

#[test]
fn rate_is_directional_derivative_along_the_field() {
    let t = topology();
    let p = params();
    let tw = Tweezer::new(t, TweezerConfig::along_end_to_end(t, footnote(), 51.0, 0.16, 2).unwrap()).unwrap();
    let field = tw.unfold_field();
    for th in near(&footnote(), 5, 0.05, 8) {
        let f = kcm_core::engine::VectorField::eval(&field, &th).unwrap();
        let along = |s: f64| {
            let x: Vec<f64> = th.iter().zip(&f).map(|(a, b)| a + s * b).collect();
            p.c_twz(t, &x).unwrap()
        };
        let h = 1e-7;
        let fd = (along(h) - along(-h)) / (2.0 * h);
        let rate = p.instability_rate(&field, t, &th).unwrap();
        assert!((rate - fd).abs() <= 1e-5 * fd.abs().max(1e-8), "{rate} vs {fd}");
    }
}

#[test]
fn hessian_of_an_exact_quadratic() {
    let n = 6;
    let a = DMat::from_fn(n, n, |i, j| 1.0 + (i * j) as f64 * 0.3 - (i + j) as f64 * 0.1);
    let a = DMat::from_fn(n, n, |i, j| a[(i, j)] + a[(j, i)]);
    let center = vec![0.2; n];
    let q = |x: &[f64]| -> kcm_core::Result<f64> { Ok(0.5 * a.quadratic_form(x) + x[0] - 2.0 * x[3]) };
    let h = hessian_forward(q, &center, &vec![1e-2; n]).unwrap();
    assert!(frobenius_rel(&h, &a) < 1e-8);
}

#[test]
fn analytic_hessian_for_a_linear_field() {
    // f(θ) = D(θ − θ*) makes the analytic formula exact: H = 2(GD + DᵀG), G = J_rᵀ M J_r
    let t = topology();
    let p = params();
    let n = 22;
    let d = DMat::from_fn(n, n, |i, j| ((i * 3 + j * 5) % 7) as f64 * 0.1 - 0.3);
    let star = footnote();
    let field = |th: &[f64]| -> kcm_core::Result<Vec<f64>> {
        let dx: Vec<f64> = th.iter().zip(&star).map(|(a, b)| a - b).collect();
        Ok(d.mul_vec(&dx))
    };
    let state = kinematic_state(t, &star).unwrap();
    let jr = state.end_to_end_jacobian();
    let jr_na = nalgebra::DMatrix::from_fn(3, n, |r, c| jr[c].to_array()[r]);
    let m_na = nalgebra::DMatrix::from_fn(3, 3, |i, j| p.m().m[i][j]);
    let d_na = nalgebra::DMatrix::from_fn(n, n, |i, j| d[(i, j)]);
    let g = jr_na.transpose() * m_na * &jr_na;
    let expect = (&g * &d_na + d_na.transpose() * &g) * 2.0;
    let expect = DMat::from_fn(n, n, |i, j| expect[(i, j)]);
    let h = p.hessian_p_analytic(&field, t, 1e-6).unwrap();
    assert!(frobenius_rel(&h, &expect) < 1e-8);
    for i in 0..n {
        for j in 0..n {
            assert_eq!(h[(i, j)], h[(j, i)]);
        }
    }
    let fd = p.hessian_p_fd(&field, t, &vec![1e-5; n]).unwrap();
    assert!(frobenius_rel(&fd, &expect) < 1e-3);
}

#[test]
fn zero_field_gives_zero_hessians() {
    let t = topology();
    let p = params();
    let zero = |_: &[f64]| -> kcm_core::Result<Vec<f64>> { Ok(vec![0.0; 22]) };
    let a = p.hessian_p_analytic(&zero, t, 1e-6).unwrap();
    let f = p.hessian_p_fd(&zero, t, &[1e-5; 22]).unwrap();
    for i in 0..22 {
        for j in 0..22 {
            assert_eq!(a[(i, j)], 0.0);
            assert_eq!(f[(i, j)], 0.0);
        }
    }
}

#[test]
fn certification_on_definite_stubs() {
    let t = topology();
    let p = ChetaevParams::new(t, folded().to_vec(), FRAC_PI_4).unwrap();
    let s = CertifySettings {
        n_samples: 200,
        ..CertifySettings::default()
    };
    let pos = DMat::from_fn(22, 22, |i, j| if i == j { 1.0 } else { 0.0 });
    let r = certify_instability(&p, t, &pos, &s).unwrap();
    assert!(r.condition_holds);
    assert_eq!(r.n_samples, 200);
    assert!(r.n_drawn >= 200);
    assert!((r.min_quadratic_form - 0.05f64.powi(2)).abs() < 1e-12);
    let neg = DMat::from_fn(22, 22, |i, j| if i == j { -1.0 } else { 0.0 });
    let r = certify_instability(&p, t, &neg, &s).unwrap();
    assert!(!r.condition_holds);
    assert_eq!(r.fraction_positive, 0.0);
    // same seed, same draws
    assert_eq!(r, certify_instability(&p, t, &neg, &s).unwrap());
}
