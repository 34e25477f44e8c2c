use kahler_core::continuity::{
    my_family_construct, trace_estimate_check, wu_yau_continuation, wu_yau_solve, NewtonConfig,
};
use kahler_core::error::KahlerError;
use kahler_core::flow::AnsatzReduction;
use kahler_core::metric::{FourierMode, RadialProfile};

fn sphere(cells: usize) -> AnsatzReduction {
    AnsatzReduction::radial(&RadialProfile::fubini_study(1.0), cells).unwrap()
}

fn flat_torus() -> AnsatzReduction {
    AnsatzReduction::torus(
        vec![[1.0, 1.0], [1.0, 1.0]],
        vec![8, 1, 8, 1],
        vec![1.0, 1.0],
        &[],
    )
    .unwrap()
}

#[test]
fn sphere_solutions_are_shifted_multiples() {
    // an Einstein ansatz s ω_FS solves 2 = −s + t
    let cfg = NewtonConfig::default();
    let sols = wu_yau_continuation(&sphere(256), &[2.5, 3.0, 5.0], &cfg).unwrap();
    for s in &sols {
        let c = s.t - 2.0;
        assert!(
            s.ratio.iter().all(|v| (v - c).abs() < 1e-8 * c),
            "t = {}",
            s.t
        );
        assert!((s.min_eig_ratio - c).abs() < 1e-6 * c && (s.max_eig_ratio - c).abs() < 1e-6 * c);
        assert!(s.equation_residual < 1e-6);
        assert!(((s.volume - s.class_volume) / s.class_volume).abs() < 1e-8);
    }
}

#[test]
fn sphere_trace_estimate_with_equality_pattern() {
    let cfg = NewtonConfig::default();
    for eps in [0.1, 0.01] {
        let s = wu_yau_solve(&sphere(256), 2.0 + 2.0 * eps, &cfg).unwrap();
        let r = trace_estimate_check(&s, 2.0, eps).unwrap();
        assert!(r.pass);
        // tr = 1/(t − 2) = 1/(2ε) ≤ 1/ε
        assert!(
            (r.trace_max - 1.0 / (2.0 * eps)).abs() < 1e-6 / eps,
            "{r:?}"
        );
        assert!((r.trace_bound - 1.0 / eps).abs() < 1e-12 / eps);
    }
}

#[test]
fn torus_solutions_are_linear_in_t() {
    let cfg = NewtonConfig::default();
    for t in [0.3, 1.0, 2.5] {
        let s = wu_yau_solve(&flat_torus(), t, &cfg).unwrap();
        assert!((s.min_eig_ratio - t).abs() < 1e-10 && (s.max_eig_ratio - t).abs() < 1e-10);
        assert!((s.trace_max - 2.0 / t).abs() < 1e-9);
    }
}

#[test]
fn torus_family_energy_vanishes_like_eps_squared() {
    let cfg = NewtonConfig::default();
    let energies: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|eps| {
            let (_, cert) = my_family_construct(&flat_torus(), 0.0, *eps, &cfg).unwrap();
            assert!(cert.class_ok && cert.bound_pass == Some(true) && !cert.flagged);
            cert.ric_plus_omega_sq_int
        })
        .collect();
    for w in energies.windows(2) {
        // ω̃ = 4ε ω_ref, so ∫|ω̃|² ω̃² = 2 (4ε)² ∫ω_ref²
        assert!((w[0] / w[1] - 4.0).abs() < 1e-8, "{energies:?}");
    }
}

#[test]
fn sphere_family_is_inapplicable_for_small_mu() {
    let r = my_family_construct(&sphere(64), 0.0, 0.1, &NewtonConfig::default());
    assert!(matches!(r, Err(KahlerError::Rejected(_))));
}

#[test]
fn perturbed_torus_newton_is_quadratic() {
    let modes = [FourierMode {
        amplitude: 0.015,
        wave: vec![1, 0],
        phase: 0.2,
    }];
    let ans = AnsatzReduction::torus(vec![[1.0, 1.0]], vec![32, 1], vec![1.0], &modes).unwrap();
    for t in [0.5, 1.5, 4.0] {
        let s = wu_yau_solve(&ans, t, &NewtonConfig::default()).unwrap();
        assert!(s.equation_residual < 1e-6);
        assert!(((s.volume - s.class_volume) / s.class_volume).abs() < 1e-10);
        let order = s.observed_order.expect("enough iterates for a rate");
        assert!(order > 1.5, "{:?}", s.residual_history);
    }
}
