//! Property tests over random (d, p, t, x).

use pbrownian::numerics::ks::{ks_two_sample, EmpiricalCdf};
use pbrownian::{BarenblattParams, CoefficientField, Params, ParamsF32};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = (usize, f64)> {
    (1usize..=5, 2.05f64..6.0)
}

fn point(d: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-scale..scale, d)
}

/// Unit mass by composite Simpson after `r = R(1 − (1−v)²)`.
fn mass(params: &Params, t: f64) -> f64 {
    let slice = params.at(t).unwrap();
    let n = 4000;
    let f = |v: f64| {
        let r = slice.radius * (1.0 - (1.0 - v) * (1.0 - v));
        slice.density(r) * r.powi(params.d as i32 - 1) * 2.0 * slice.radius * (1.0 - v)
    };
    let h = 1.0 / n as f64;
    let inner: f64 = (1..n).map(|i| f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    params.sphere_area() * (f(0.0) + f(1.0) + inner) * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn mass_is_one_at_all_times((d, p) in model(), t in 0.05f64..5.0) {
        let params = Params::derive(d, p).unwrap();
        prop_assert!((mass(&params, t) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn self_similar_scaling((d, p) in model(), t in 0.05f64..5.0, u in 0.0f64..1.2) {
        let params = Params::derive(d, p).unwrap();
        let k = params.k;
        let ratio = params.support_radius(t).unwrap() / params.support_radius(1.0).unwrap();
        prop_assert!((ratio - t.powf(k / d as f64)).abs() < 1e-12 * ratio);
        let r1 = u * params.support_radius(1.0).unwrap();
        let scaled = params.at(t).unwrap().density(r1 * t.powf(k / d as f64));
        let unit = t.powf(-k) * params.at(1.0).unwrap().density(r1);
        prop_assert!((scaled - unit).abs() <= 1e-12 * unit.abs().max(1e-300));
    }

    #[test]
    fn compact_support_and_sign(((d, p), x) in model().prop_flat_map(|(d, p)| (Just((d, p)), point(d, 3.0))), t in 0.05f64..3.0) {
        let params = Params::derive(d, p).unwrap();
        let y = vec![0.0; d];
        let w = params.density(&y, t, &x).unwrap();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let big_r = params.support_radius(t).unwrap();
        prop_assert!(w >= 0.0);
        if r >= big_r {
            prop_assert_eq!(w, 0.0);
            prop_assert_eq!(params.diffusion_a(&y, 0.0, t, &x).unwrap(), 0.0);
        } else {
            prop_assert!(w > 0.0);
        }
    }

    #[test]
    fn fields_translate_with_the_center(
        ((d, p), x, y) in model().prop_flat_map(|(d, p)| (Just((d, p)), point(d, 1.0), point(d, 2.0))),
        t in 0.1f64..2.0,
    ) {
        let params = Params::derive(d, p).unwrap();
        let shifted: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let at_y = CoefficientField::new(params.clone(), y.clone(), 0.0).unwrap();
        let at_0 = CoefficientField::new(params, vec![0.0; d], 0.0).unwrap();
        let (w1, w0) = (at_y.density(t, &shifted).unwrap(), at_0.density(t, &x).unwrap());
        let (a1, a0) = (at_y.diffusion_a(t, &shifted).unwrap(), at_0.diffusion_a(t, &x).unwrap());
        prop_assert!((w1 - w0).abs() <= 1e-12 * w0.max(1e-300));
        prop_assert!((a1 - a0).abs() <= 1e-12 * a0.max(1e-300));
    }

    #[test]
    fn f32_constants_track_f64((d, p) in (1usize..=4, 2.5f64..6.0)) {
        let hi = Params::derive(d, p).unwrap();
        let lo = ParamsF32::derive(d, p as f32).unwrap();
        prop_assert!(((lo.c1 as f64) - hi.c1).abs() < 1e-4 * hi.c1);
        prop_assert!(((lo.k as f64) - hi.k).abs() < 1e-6);
    }

    #[test]
    fn two_sample_ks_is_a_symmetric_distance(
        a in proptest::collection::vec(-5.0f64..5.0, 1..200),
        b in proptest::collection::vec(-5.0f64..5.0, 1..200),
    ) {
        let ab = ks_two_sample(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, ks_two_sample(&b, &a));
        prop_assert_eq!(ks_two_sample(&a, &a), 0.0);
        prop_assert_eq!(ab, EmpiricalCdf::new(a.clone()).ks_two_sample(&EmpiricalCdf::new(b.clone())));
    }
}

#[test]
fn derive_rejects_p_at_most_two() {
    assert!(BarenblattParams::<f64>::derive(2, 2.0).is_err());
    assert!(BarenblattParams::<f64>::derive(0, 4.0).is_err());
}
