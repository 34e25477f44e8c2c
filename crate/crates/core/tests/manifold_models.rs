use std::f64::consts::PI;

use approx::assert_relative_eq;
use kahler_core::chern::class_of;
use kahler_core::classes::{KahlerClassVector, ManifoldSpec};
use kahler_core::metric::{FourierMode, MetricField};
use kahler_core::quadrature::{QuadratureAtlas, Resolution};
use proptest::prelude::*;

/// `∫ω^n` by quadrature of `det g`.
fn quadrature_volume(metric: &MetricField, atlas: &QuadratureAtlas) -> f64 {
    let det = |x: &[f64]| metric.jets(x).unwrap().g.determinant().re;
    atlas.top_form_factor() * atlas.integrate(det)
}

#[test]
fn flat_torus_volume_matches_quadrature() {
    // ω = i dz∧dz̄ = 2 dx∧dy per direction, so ω² = 8 dvol on the unit square torus
    let spec = ManifoldSpec::torus_square(2, 1.0);
    let metric = MetricField::flat(2);
    let alpha = class_of(&metric, &spec).unwrap();
    assert_eq!(spec.volume(&alpha).unwrap(), 8.0);
    let atlas = QuadratureAtlas::torus(&[[1.0, 1.0], [1.0, 1.0]], &[4, 4, 4, 4]).unwrap();
    assert_relative_eq!(
        quadrature_volume(&metric, &atlas),
        8.0,
        max_relative = 1e-12
    );
}

#[test]
fn pairings_match_quadrature_on_builtin_metrics() {
    let res = Resolution {
        torus_axes: vec![16],
        radial: 48,
        angular: 8,
    };
    let torus = MetricField::TorusFourier {
        periods: vec![[1.0, 1.0], [1.0, 2.0]],
        diag: vec![1.0, 0.7],
        modes: vec![FourierMode {
            amplitude: 0.01,
            wave: vec![1, 0, 0, 1],
            phase: 0.4,
        }],
    };
    let cases = [
        (ManifoldSpec::projective(1), MetricField::fubini_study(1)),
        (ManifoldSpec::projective(2), MetricField::fubini_study(2)),
        (ManifoldSpec::torus(&[[1.0, 1.0], [1.0, 2.0]]), torus),
        (
            ManifoldSpec::product(&[
                ManifoldSpec::projective(1),
                ManifoldSpec::torus_square(1, 1.0),
            ]),
            MetricField::Product(vec![
                MetricField::fubini_study(1).scaled(1.5),
                MetricField::flat(1),
            ]),
        ),
    ];
    for (spec, metric) in cases {
        let atlas = QuadratureAtlas::for_spec(&spec, &res).unwrap();
        let alpha = class_of(&metric, &spec).unwrap();
        let v = spec.volume(&alpha).unwrap();
        assert_relative_eq!(quadrature_volume(&metric, &atlas), v, max_relative = 1e-6);
    }
}

#[test]
fn first_chern_class_of_the_line() {
    let p1 = ManifoldSpec::projective(1);
    assert_eq!(p1.pairing(&[&p1.c1()]).unwrap(), 2.0);
}

#[test]
fn class_laws_on_the_line() {
    let p1 = ManifoldSpec::projective(1);
    let fs = KahlerClassVector::new(vec![2.0 * PI]);
    assert_relative_eq!(p1.nef_threshold(&fs).unwrap(), 0.5, max_relative = 1e-15);
    assert_relative_eq!(
        p1.volume(&p1.flow_class(&fs, 0.25)).unwrap(),
        PI,
        max_relative = 1e-14
    );
    let prod = ManifoldSpec::product(&[p1, ManifoldSpec::torus_square(1, 1.0)]);
    assert_relative_eq!(
        prod.nef_threshold(&KahlerClassVector::new(vec![2.0 * PI, 1.0]))
            .unwrap(),
        0.5,
        max_relative = 1e-15
    );
}

#[test]
fn kodaira_dimensions_of_curve_products() {
    let ct = ManifoldSpec::product(&[ManifoldSpec::curve(2), ManifoldSpec::torus_square(1, 1.0)]);
    assert_eq!(ct.numerical_kodaira_dimension().unwrap(), 1);
    let cc = ManifoldSpec::product(&[ManifoldSpec::curve(2), ManifoldSpec::curve(2)]);
    assert_eq!(cc.numerical_kodaira_dimension().unwrap(), 2);
}

#[test]
fn property_a_sequences() {
    let p1 = ManifoldSpec::projective(1);
    let fs = KahlerClassVector::new(vec![2.0 * PI]);
    assert!(
        !p1.property_a_limit_check(&vec![(fs, 2.0); 6], 1e-6)
            .unwrap()
            .pass
    );
    let ct = ManifoldSpec::product(&[ManifoldSpec::curve(2), ManifoldSpec::torus_square(1, 1.0)]);
    let seq: Vec<_> = (1..=10)
        .map(|i| {
            (
                KahlerClassVector::new(vec![1.0, 0.5f64.powi(i)]),
                0.1f64.powi(i),
            )
        })
        .collect();
    assert!(ct.property_a_limit_check(&seq, 1e-8).unwrap().pass);
}

fn product_spec(a: usize, b: usize, with_torus: bool) -> ManifoldSpec {
    let mut parts = vec![ManifoldSpec::projective(a), ManifoldSpec::projective(b)];
    if with_torus {
        parts.push(ManifoldSpec::torus_square(1, 1.0));
    }
    ManifoldSpec::product(&parts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flow_class_is_kahler_exactly_below_threshold(
        a in 1usize..3, b in 1usize..3, torus in any::<bool>(),
        coeffs in prop::collection::vec(0.5f64..20.0, 3),
        frac in 0.01f64..0.99,
    ) {
        let spec = product_spec(a, b, torus);
        let alpha = KahlerClassVector::new(coeffs[..spec.basis_len()].to_vec());
        let lam = spec.nef_threshold(&alpha).unwrap();
        prop_assert!(lam.is_finite() && lam > 0.0);
        prop_assert!(spec.is_kahler(&spec.flow_class(&alpha, frac * lam)));
        prop_assert!(!spec.is_kahler(&spec.flow_class(&alpha, lam * (1.0 + frac))));
    }

    #[test]
    fn normalized_class_relaxes_exponentially(
        coeffs in prop::collection::vec(0.5f64..20.0, 3),
        t1 in 0.0f64..3.0, dt in 0.1f64..3.0,
    ) {
        let spec = product_spec(1, 2, true);
        let alpha = KahlerClassVector::new(coeffs);
        let k = spec.c1_canonical().scale(2.0 * PI);
        let d1 = spec.normalized_flow_class(&alpha, t1).sub(&k);
        let d2 = spec.normalized_flow_class(&alpha, t1 + dt).sub(&k);
        for (x, y) in d1.coeffs.iter().zip(&d2.coeffs) {
            if x.abs() > 1e-9 {
                prop_assert!((y / x - (-dt).exp()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pairing_is_symmetric_and_multilinear(
        u in prop::collection::vec(-3.0f64..3.0, 3),
        v in prop::collection::vec(-3.0f64..3.0, 3),
        w in prop::collection::vec(-3.0f64..3.0, 3),
        s in -2.0f64..2.0,
    ) {
        let spec = product_spec(1, 1, true);
        let (u, v, w) = (KahlerClassVector::new(u), KahlerClassVector::new(v), KahlerClassVector::new(w));
        let p = |a: &KahlerClassVector, b: &KahlerClassVector, c: &KahlerClassVector| spec.pairing(&[a, b, c]).unwrap();
        let base = p(&u, &v, &w);
        prop_assert!((base - p(&w, &u, &v)).abs() < 1e-10);
        prop_assert!((base - p(&v, &w, &u)).abs() < 1e-10);
        let lhs = p(&u.add(&v.scale(s)), &v, &w);
        prop_assert!((lhs - base - s * p(&v, &v, &w)).abs() < 1e-9);
    }

    #[test]
    fn volume_is_homogeneous(coeffs in prop::collection::vec(0.1f64..5.0, 3), c in 0.1f64..4.0) {
        let spec = product_spec(1, 1, true);
        let a = KahlerClassVector::new(coeffs);
        let v = spec.volume(&a).unwrap();
        prop_assert!((spec.volume(&a.scale(c)).unwrap() - c.powi(3) * v).abs() < 1e-10 * v.max(1.0) * c.powi(3));
    }
}
