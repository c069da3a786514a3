use sasaki::error::Error;
use sasaki::fields::Grid;
use sasaki::flow::*;
use sasaki::geometry::Model;
use sasaki::maps::{energies, AnalyticMap, MapField};

fn field(spec: &str, n: usize) -> MapField {
    let map: AnalyticMap = spec.parse().unwrap();
    MapField::from_analytic(&Grid::nilmanifold(n).unwrap(), &map).unwrap()
}

fn sphere_target() -> ExtrinsicTarget {
    ExtrinsicTarget::sphere(&Model::sphere(SPHERE_RADIUS).unwrap()).unwrap()
}

#[test]
fn identity_is_a_fixed_point() {
    let f = field("identity", 12);
    let dt = f.grid.cfl_dt() / 2.0;
    let g = step_intrinsic(&f, dt).unwrap();
    let diff = f.values.iter().zip(&g.values).flat_map(|(a, b)| (0..3).map(move |i| (a[i] - b[i]).abs())).fold(0.0, f64::max);
    assert!(diff <= 1e-14, "{diff}");
}

#[test]
fn one_step_decreases_horizontal_energy() {
    let f = field("perturbed:3:0.05", 12);
    let dt = f.grid.cfl_dt() / 2.0;
    let g = step_intrinsic(&f, dt).unwrap();
    let (e0, e1) = (energies(&f).e_hh, energies(&g).e_hh);
    assert!(e1 < e0, "{e1} !< {e0}");
}

#[test]
fn unstable_step_is_rejected_or_blows_up() {
    let mut cfg = FlowConfig::intrinsic("perturbed:3:0.05", 12, 100);
    let bound = cfg.grid().unwrap().cfl_dt();
    cfg.dt = Some(16.0 * bound);
    assert!(matches!(run_flow(&cfg), Err(Error::Config(_))));
    cfg.allow_unstable = true;
    match run_flow(&cfg) {
        Err(Error::BlowUp { step, .. }) => assert!((1..=100).contains(&step), "{step}"),
        other => panic!("expected blow-up, got {:?}", other.map(|o| o.summary)),
    }
}

#[test]
fn identity_flow_converges_immediately() {
    let out = run_flow(&FlowConfig::intrinsic("identity", 12, 50)).unwrap();
    assert_eq!(out.trace.rows.len(), 1);
    assert!(out.summary.converged);
    assert_eq!(out.summary.steps, 0);
    assert_eq!(out.summary.classification, Classification::SpecialHarmonic);
    assert_eq!(energy_identity_residual(&out.trace).unwrap(), 0.0);
}

#[test]
fn empty_trace_is_an_error() {
    assert!(matches!(energy_identity_residual(&FlowTrace::default()), Err(Error::Empty(_))));
}

#[test]
fn perturbed_flow_monotone_and_foliated() {
    let mut cfg = FlowConfig::intrinsic("perturbed:11:0.05", 12, 400);
    cfg.tau_tol = 0.0;
    let out = run_flow(&cfg).unwrap();
    let rows = &out.trace.rows;
    assert_eq!(rows.len(), 401);
    let e0 = rows[0].e_hh;
    let h = out.final_map.grid().spacing();
    assert!(out.trace.max_increase(|r| r.e_hh) <= 1e-9 * e0);
    assert!(out.trace.max_increase(|r| r.e_lh) <= 1e-9 * e0);
    assert!(out.trace.max_increase(|r| r.e_ll) <= 1e-9 * e0);
    assert!(rows.iter().all(|r| r.foliated_defect <= 10.0 * h * h));
    let k0 = rows[0].k;
    assert!(rows.iter().all(|r| (r.k - k0).abs() <= 1e-3 * k0.abs()));
    assert!(rows.last().unwrap().tau_h_sup * 10.0 <= rows[0].tau_h_sup);
    let res = energy_identity_residual(&out.trace).unwrap();
    assert!(res <= 1e-2, "{res}");
    assert!((res - rows.last().unwrap().energy_identity_residual).abs() < 1e-12);
}

#[test]
fn energy_identity_residual_shrinks_with_dt() {
    let run = |dt_frac: f64, steps: usize| {
        let mut cfg = FlowConfig::intrinsic("perturbed:5:0.05", 12, steps);
        cfg.tau_tol = 0.0;
        cfg.dt = Some(cfg.grid().unwrap().cfl_dt() * dt_frac);
        energy_identity_residual(&run_flow(&cfg).unwrap().trace).unwrap()
    };
    let (coarse, fine) = (run(0.5, 100), run(0.25, 200));
    assert!(fine < 0.7 * coarse, "{coarse} -> {fine}");
}

#[test]
fn symmetric_pair_has_equal_residuals() {
    let run = |spec: &str| {
        let mut cfg = FlowConfig::intrinsic(spec, 12, 200);
        cfg.tau_tol = 0.0;
        energy_identity_residual(&run_flow(&cfg).unwrap().trace).unwrap()
    };
    let (a, b) = (run("perturbed:9:0.05"), run("perturbed:9:-0.05"));
    assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
}

#[test]
fn csv_layout() {
    let mut cfg = FlowConfig::intrinsic("perturbed:1:0.02", 8, 10);
    cfg.every = 5;
    let out = run_flow(&cfg).unwrap();
    let csv = out.trace.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "step,time,E_HH,E_LH,E_HL,E_LL,K,tau_HH_sup,tau_HL_sup,energy_identity_residual,rho_sq,foliated_defect");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["0", "5", "10"]);
    assert!(rows.iter().all(|r| r.len() == 12 && r[10].is_empty()));
    let json = serde_json::to_value(&out.summary).unwrap();
    assert_eq!(json["steps"], 10);
    assert!(json["final"]["E_HH"].is_f64());
    assert!(json["classification"].is_string());
}

/// Sup over nodes away from the coordinate poles, and the volume-weighted L² norm.
fn norms(g: &Grid, v: &[V4]) -> (f64, f64) {
    use std::f64::consts::FRAC_PI_8;
    let mut sup = 0.0f64;
    let mut sq = Vec::with_capacity(v.len());
    for (i, x) in v.iter().enumerate() {
        let eta = g.coords(i)[0];
        let m = x.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if (FRAC_PI_8..=3.0 * FRAC_PI_8).contains(&eta) {
            sup = sup.max(m);
        }
        sq.push(x.iter().map(|c| c * c).sum::<f64>());
    }
    (sup, (g.integrate_slice(&sq) / g.integrate_slice(&vec![1.0; v.len()])).sqrt())
}

#[test]
fn embedded_identity_tension_is_second_order() {
    let t = sphere_target();
    let run = |n: usize| {
        let g = FlowConfig::extrinsic("identity", n, 0).grid().unwrap();
        let u = EmbeddedMap::identity(&g, &t);
        let (sup, l2) = norms(&g, &extrinsic_rhs(&u, &t, PiTerm::Composition));
        (sup, l2, g.spacing())
    };
    let ((s1, l1, h1), (s2, l2, h2)) = (run(6), run(12));
    assert!(s1 <= 0.5 * h1 * h1 && s2 <= 0.5 * h2 * h2, "{s1} {s2}");
    assert!(s1 / s2 >= 3.0, "{}", s1 / s2);
    assert!(l1 / l2 >= 3.0, "{}", l1 / l2);
}

#[test]
fn constant_map_is_exact_fixed_point() {
    let t = sphere_target();
    let g = FlowConfig::extrinsic("identity", 6, 0).grid().unwrap();
    let u = extrinsic_initial(&g, &t, "constant:0.3,1.0,2.0", 0).unwrap();
    let v = step_extrinsic(&u, &t, 1e-3).unwrap();
    assert_eq!(u.values, v.values);
}

#[test]
fn leaving_the_tube_aborts() {
    let t = sphere_target();
    let g = FlowConfig::extrinsic("identity", 6, 0).grid().unwrap();
    let mut u = EmbeddedMap::identity(&g, &t);
    u.values.iter_mut().for_each(|y| *y = y.map(|c| 1.6 * c));
    assert!(matches!(step_extrinsic(&u, &t, 1e-4), Err(Error::TubeEscape { step: 0, .. })));
}

#[test]
fn pi_term_forms_agree_to_second_order() {
    let t = sphere_target();
    let gap = |n: usize| {
        let g = FlowConfig::extrinsic("identity", n, 0).grid().unwrap();
        let u = EmbeddedMap::tangent_perturbed(&g, &t, 0.2, 4);
        let (a, b) = (extrinsic_rhs(&u, &t, PiTerm::Composition), extrinsic_rhs(&u, &t, PiTerm::Pointwise));
        let d: Vec<V4> = a.iter().zip(&b).map(|(x, y)| std::array::from_fn(|i| x[i] - y[i])).collect();
        norms(&g, &d)
    };
    let ((s1, l1), (s2, l2)) = (gap(6), gap(12));
    assert!(s1 / s2 >= 3.0, "{s1} -> {s2}");
    assert!(l1 / l2 >= 3.0, "{l1} -> {l2}");
}

#[test]
fn extrinsic_distance_to_target_nonincreasing() {
    let mut cfg = FlowConfig::extrinsic("tangent-perturbed:0.1", 6, 200);
    cfg.seed = 2;
    cfg.tau_tol = 0.0;
    let out = run_flow(&cfg).unwrap();
    let rows = &out.trace.rows;
    assert_eq!(rows.len(), 201);
    assert!(rows[0].rho_sq.unwrap() > 0.0);
    assert!(out.trace.max_increase(|r| r.rho_sq.unwrap()) <= 1e-9);
}

#[test]
fn extrinsic_backend_rejects_other_scales() {
    let mut cfg = FlowConfig::extrinsic("identity", 6, 1);
    cfg.target = Model::sphere(1.0).unwrap();
    cfg.source = cfg.target.clone();
    assert!(matches!(run_flow(&cfg), Err(Error::Unsupported(_))));
}
