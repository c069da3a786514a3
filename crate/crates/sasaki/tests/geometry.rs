use proptest::prelude::*;
use sasaki::geometry::{build_model, check_tanaka_webster, heis_mul, Model, ModelParams, NegativityClass};

fn p3() -> impl Strategy<Value = [f64; 3]> {
    proptest::array::uniform3(-2.0f64..2.0)
}

#[test]
fn build_model_defaults() {
    let m = build_model("space-form-chart", &ModelParams { lambda: Some(-1.0), scale: None }).unwrap();
    assert_eq!(m.name(), "space-form-chart(lambda=-1)");
    let s = build_model("round-sphere-3", &ModelParams::default()).unwrap();
    assert_eq!(s.scale, 1.0);
    assert_eq!(build_model("heisenberg-nilmanifold", &ModelParams::default()).unwrap(), Model::heisenberg());
}

#[test]
fn audit_passes_on_every_model() {
    for m in [Model::heisenberg(), Model::sphere(2.0).unwrap(), Model::space_form(0.5).unwrap()] {
        let r = check_tanaka_webster(&m, 20, 1e-3, 4);
        assert!(!r.catastrophic_cancellation);
        let c = sasaki::geometry::tanaka_webster_convergence(&m, 20, 1e-3, 4);
        assert!(c.coarse.max() <= 1e-5, "{}: {:?}", m.name(), c.coarse);
    }
}

#[test]
fn negativity_tracks_sign_of_lambda() {
    let p = [0.05, -0.1, 0.3];
    for (lam, class) in [(-2.0, NegativityClass::StronglyNegative), (-0.1, NegativityClass::StronglyNegative), (0.0, NegativityClass::StronglySeminegative)] {
        assert_eq!(Model::space_form(lam).unwrap().negativity_class(&p).unwrap(), class, "λ = {lam}");
    }
    assert_eq!(Model::space_form(1.0).unwrap().negativity_class(&p).unwrap(), NegativityClass::Indefinite);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_law(p in p3(), q in p3(), r in p3()) {
        let a = heis_mul(&heis_mul(&p, &q), &r);
        let b = heis_mul(&p, &heis_mul(&q, &r));
        for i in 0..3 {
            prop_assert!((a[i] - b[i]).abs() < 1e-12);
        }
        let inv = [-p[0], -p[1], -p[2]];
        let e = heis_mul(&p, &inv);
        prop_assert!(e.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn space_form_sectional_is_constant(lam in -3.0f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0, p in proptest::array::uniform3(-0.3f64..0.3)) {
        prop_assume!(x.abs() + y.abs() > 1e-3);
        let m = Model::space_form(lam).unwrap();
        let k = m.hol_sectional(&p, &[0.0, x, y]).unwrap();
        prop_assert!((k - lam).abs() < 1e-9, "{} vs {}", k, lam);
    }

    #[test]
    fn sphere_hol_sectional(scale in 0.5f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0, eta in 0.1f64..1.4, a in 0.0f64..6.0, b in 0.0f64..6.0) {
        prop_assume!(x.abs() + y.abs() > 1e-3);
        let m = Model::sphere(scale).unwrap();
        let k = m.hol_sectional(&[eta, a, b], &[0.0, x, y]).unwrap();
        prop_assert!((k - 4.0 / (scale * scale)).abs() < 1e-8);
    }

    #[test]
    fn nilmanifold_is_flat_and_frame_invariant(p in p3(), g in proptest::array::uniform3(-3i32..3)) {
        let m = Model::heisenberg();
        let k = m.sectional(&p, &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        prop_assert!(k.abs() < 1e-12);
        let q = Model::lattice_translate(&p, &g.map(f64::from));
        prop_assert_eq!(m.frame_at(&p).unwrap().gamma, m.frame_at(&q).unwrap().gamma);
    }
}
