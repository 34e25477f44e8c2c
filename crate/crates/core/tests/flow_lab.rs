use kahler_core::flow::{
    blowup_rate_check, existence_bound_check, flow_functional_monitor, run_krf, run_normalized_krf,
    trace_bound_monitor, trace_evolution_check, AnsatzReduction, FlowConfig, FlowTrajectory,
};
use kahler_core::metric::{FourierMode, RadialProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere(s: f64, coeffs: Vec<f64>, cells: usize) -> AnsatzReduction {
    AnsatzReduction::radial(&RadialProfile { s, coeffs }, cells).unwrap()
}

fn krf(ans: &AnsatzReduction, horizon: f64, max_dt: f64) -> FlowTrajectory {
    let cfg = FlowConfig {
        horizon,
        snapshot_dt: horizon / 100.0,
        max_dt,
        ..FlowConfig::default()
    };
    run_krf(ans, &cfg).unwrap()
}

fn perturbed_circle_torus(amplitude: f64, nodes: usize) -> AnsatzReduction {
    let modes = [FourierMode {
        amplitude,
        wave: vec![1, 0],
        phase: 0.3,
    }];
    AnsatzReduction::torus(vec![[1.0, 1.0]], vec![nodes, 1], vec![1.0], &modes).unwrap()
}

#[test]
fn round_sphere_shrinks_homothetically() {
    let tr = krf(&sphere(1.0, vec![], 256), 0.6, 1e-2);
    assert!(tr.singular);
    assert!((tr.t_num - 0.5).abs() < 5e-3, "{}", tr.t_num);
    // ω(t) = (1 − 2t) ω_FS pointwise
    for s in tr.snapshots.iter().filter(|s| s.t < 0.45) {
        for v in &s.state {
            assert!((v - (1.0 - 2.0 * s.t)).abs() < 1e-4);
        }
        assert!((s.m_t - 1.0 / (1.0 - 2.0 * s.t)).abs() < 1e-4 * s.m_t);
    }
    assert!(tr.class_max_rel_error < 1e-4);
}

#[test]
fn singular_time_is_stable_under_step_refinement() {
    let ans = sphere(1.0, vec![], 128);
    let a = krf(&ans, 0.6, 1e-2).t_num;
    let b = krf(&ans, 0.6, 5e-3).t_num;
    assert!((a - b).abs() < 5e-3 * a, "{a} {b}");
}

#[test]
fn perturbed_spheres_respect_existence_and_blowup_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..4 {
        let coeffs = vec![rng.gen_range(-0.15..0.15), rng.gen_range(-0.1..0.1)];
        let ans = sphere(1.0, coeffs.clone(), 128);
        let tr = krf(&ans, 0.7, 1e-2);
        let a = tr.snapshots[0].sup_h;
        assert!(tr.singular, "{coeffs:?}");
        assert!(tr.class_max_rel_error < 1e-4);
        let e = existence_bound_check(&tr, a).unwrap();
        assert!(e.pass, "{coeffs:?} {e:?}");
        let b = blowup_rate_check(&tr).unwrap();
        assert!(b.min_product >= 0.98, "{coeffs:?} {b:?}");
        assert!(trace_bound_monitor(&tr, a, 1e-3).pass);
    }
}

#[test]
fn perturbed_torus_flow_is_global_and_decays() {
    let ans = perturbed_circle_torus(0.02, 64);
    let tr = krf(&ans, 0.5, 1e-2);
    assert!(!tr.singular);
    let a = tr.snapshots[0].sup_h;
    assert!(tr.snapshots.last().unwrap().sup_h < a);
    assert!(existence_bound_check(&tr, a).unwrap().pass);
    assert!(trace_bound_monitor(&tr, a, 1e-3).pass);
    assert!(trace_evolution_check(&ans, &tr, a, 1e-2).unwrap().pass);
}

#[test]
fn normalized_torus_volume_decays_exponentially() {
    let ans = perturbed_circle_torus(0.02, 64);
    let cfg = FlowConfig {
        horizon: 1.0,
        snapshot_dt: 0.05,
        ..FlowConfig::default()
    };
    let tr = run_normalized_krf(&ans, &cfg).unwrap();
    let v0 = tr.snapshots[0].vol;
    for s in &tr.snapshots {
        assert!(
            (s.vol - v0 * (-s.t).exp()).abs() < 1e-4 * s.vol,
            "{} {}",
            s.t,
            s.vol
        );
    }
}

#[test]
fn flat_torus_normalized_flow_is_pure_decay() {
    let ans = AnsatzReduction::torus(
        vec![[1.0, 1.0], [1.0, 1.0]],
        vec![8, 1, 8, 1],
        vec![1.0, 1.0],
        &[],
    )
    .unwrap();
    let cfg = FlowConfig {
        horizon: 1.0,
        snapshot_dt: 0.1,
        ..FlowConfig::default()
    };
    let tr = run_normalized_krf(&ans, &cfg).unwrap();
    for s in &tr.snapshots {
        assert!(
            (s.min_eig - (-s.t).exp()).abs() < 1e-6,
            "{} {}",
            s.t,
            s.min_eig
        );
    }
}

#[test]
fn functional_identity_along_normalized_torus_flow() {
    let ans = perturbed_circle_torus(0.02, 256);
    let cfg = FlowConfig {
        horizon: 0.5,
        snapshot_dt: 0.01,
        ..FlowConfig::default()
    };
    let tr = run_normalized_krf(&ans, &cfg).unwrap();
    let f = flow_functional_monitor(&tr, Some(0)).unwrap();
    assert!(
        f.identity_pass && f.max_relative_error < 1e-2,
        "{}",
        f.max_relative_error
    );
    let d = f.decay.unwrap();
    assert!(d.identically_zero);
    assert!(d.l_values.iter().all(|(_, l)| l.abs() < 1e-10));
}
