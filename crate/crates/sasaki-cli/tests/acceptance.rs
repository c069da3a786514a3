//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the lines always reach the terminal; exits non-zero if any criterion fails.

use std::f64::consts::FRAC_PI_8;
use std::process::Command;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sasaki::fields::{codifferential_2form, scalar_commutation_residual, theta_mode, Grid, ScalarField, TwoForm};
use sasaki::flow::{self, EmbeddedMap, ExtrinsicTarget, FlowConfig, PiTerm};
use sasaki::geometry::{check_tanaka_webster, NegativityClass};
use sasaki::maps::{self, AnalyticMap, MapField};
use sasaki::Model;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn points(m: &Model, n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| m.sample_point(&mut rng)).collect()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1: connection axioms, 100 points, h = 1e-3, residual ≤ 1e-5, h/2 ratio in [3, 5.5]
fn connection_axioms() -> Outcome {
    const FLOOR: f64 = 1e-8;
    let mut notes = Vec::new();
    let mut ok = true;
    for m in [Model::heisenberg(), Model::sphere(1.0).map_err(err)?, Model::space_form(-1.0).map_err(err)?] {
        let coarse = check_tanaka_webster(&m, 100, 1e-3, 1);
        let fine = check_tanaka_webster(&m, 100, 5e-4, 1);
        ok &= coarse.max() <= 1e-5;
        let mut ratios = Vec::new();
        for (c, f) in coarse.residuals().iter().zip(fine.residuals().iter()) {
            if c.1 > FLOOR {
                let r = c.1 / f.1;
                ok &= (3.0..=5.5).contains(&r);
                ratios.push(r);
            }
        }
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        notes.push(if ratios.is_empty() {
            format!("{} max {:.1e} (at rounding level, no ratio)", m.name(), coarse.max())
        } else {
            format!("{} max {:.1e} ratios [{lo:.2}, {hi:.2}]", m.name(), coarse.max())
        });
    }
    ensure(ok, notes.join("; "))
}

// 2: K_hol = λ within 1e-6 at 50 points; nilmanifold curvature 0 within 1e-9
fn space_form_curvature() -> Outcome {
    let mut worst: f64 = 0.0;
    for lam in [-1.0, 0.0, 1.0] {
        let m = Model::space_form(lam).map_err(err)?;
        for p in points(&m, 50, 2) {
            worst = worst.max((m.hol_sectional(&p, &[0.0, 1.0, 0.0]).map_err(err)? - lam).abs());
        }
    }
    let nil = Model::heisenberg();
    let flat = points(&nil, 50, 3)
        .iter()
        .map(|p| nil.curvature_tensor(p).iter().flatten().flatten().flatten().fold(0.0f64, |a, v| a.max(v.abs())))
        .fold(0.0, f64::max);
    ensure(worst <= 1e-6 && flat <= 1e-9, format!("|K_hol − λ| ≤ {worst:.1e}, nilmanifold |R| ≤ {flat:.1e}"))
}

// 3: classifier labels, and no order-2 counterexample in 10⁴ trials on M(−1)
fn negativity() -> Outcome {
    let neg = Model::space_form(-1.0).map_err(err)?;
    let cases = [
        (neg.clone(), NegativityClass::StronglyNegative),
        (Model::heisenberg(), NegativityClass::StronglySeminegative),
        (Model::sphere(1.0).map_err(err)?, NegativityClass::Indefinite),
    ];
    let mut ok = true;
    for (m, want) in &cases {
        for p in points(m, 10, 4) {
            ok &= m.negativity_class(&p).map_err(err)? == *want;
        }
    }
    let r = neg.order_k_negativity_sample(&[0.1, 0.1, 0.0], 2, 10_000, 5).map_err(err)?;
    ok &= r.counterexample.is_none() && r.trials == 10_000;
    ensure(ok, format!("classes as expected: {ok}; order 2, {} trials: {}", r.trials, r.outcome))
}

// 4: δdθ(ξ) = m = 1 on the 32- and 64-grids
fn reeb_codifferential() -> Outcome {
    let val = |n: usize| -> Result<(f64, f64), String> {
        let g = Grid::nilmanifold(n).map_err(err)?;
        let d = codifferential_2form(&TwoForm::dtheta(&g));
        let lo = d.comps[0].iter().copied().fold(f64::INFINITY, f64::min);
        let hi = d.comps[0].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    };
    let (a, b) = (val(32)?, val(64)?);
    let ok = a.0 >= 0.995 && a.1 <= 1.005 && b.0 >= 0.99875 && b.1 <= 1.00125;
    ensure(ok, format!("n=32: [{:.6}, {:.6}]; n=64: [{:.6}, {:.6}]", a.0, a.1, b.0, b.1))
}

// 5: scalar commutation residual, order 2 across n ∈ {32, 64}
fn scalar_commutation() -> Outcome {
    let res = |n: usize| -> Result<f64, String> {
        let g = Grid::nilmanifold(n).map_err(err)?;
        let u = ScalarField::from_fn(&g, |p| theta_mode(&p, &[0.13, -0.37, 0.21], 0.4) + 0.5 * theta_mode(&p, &[-0.2, 0.4, 0.3], 1.3));
        Ok(scalar_commutation_residual(&u).max_abs())
    };
    let (a, b) = (res(32)?, res(64)?);
    let r = a / b;
    ensure((3.0..=5.5).contains(&r), format!("residual {a:.2e} → {b:.2e}, ratio {r:.3}"))
}

// 6: map commutation suite ≤ 1e-9 over a corpus of at least 6 maps
fn map_commutation() -> Outcome {
    let corpus = AnalyticMap::corpus();
    let mut worst: f64 = 0.0;
    for m in &corpus {
        worst = worst.max(maps::commutation_residuals_analytic(m, &points(&m.source, 20, 6)).map_err(err)?.max());
    }
    ensure(corpus.len() >= 6 && worst <= 1e-9, format!("{} maps, max residual {worst:.1e}", corpus.len()))
}

// 7: energy algebra 1e-12; E_HH(identity) = 1 ± 1e-10; pullback identity ≤ 1e-10
fn energy_algebra() -> Outcome {
    let mut alg: f64 = 0.0;
    for m in AnalyticMap::corpus() {
        for p in points(&m.source, 20, 7) {
            let e = maps::energy_density(&maps::analytic_jet(&m, &p).map_err(err)?);
            alg = alg.max((e.e_hh - e.d_sq - e.d_bar_sq).abs()).max((e.k - e.d_sq + e.d_bar_sq).abs());
        }
    }
    let g = Grid::nilmanifold(32).map_err(err)?;
    let id = AnalyticMap::identity();
    let e = maps::energies_analytic(&id, &g).map_err(err)?.e_hh;
    let mut pb = maps::pullback_residual(&MapField::from_analytic(&g, &id).map_err(err)?);
    for p in points(&id.source, 20, 8) {
        pb = pb.max(maps::pullback_residual_analytic(&id, &p).map_err(err)?);
    }
    let ok = alg <= 1e-12 && (e - 1.0).abs() <= 1e-10 && pb <= 1e-10;
    ensure(ok, format!("algebra {alg:.1e}, |E_HH(id) − 1| = {:.1e}, pullback residual {pb:.1e}", (e - 1.0).abs()))
}

// 8: Bochner residual ≤ 1e-7 at 20 points for 3 maps, one non-foliated
fn bochner() -> Outcome {
    let ms = [AnalyticMap::trig(0.1), AnalyticMap::reeb_tilt(0.1), AnalyticMap::perturbed(11, 0.05, false)];
    let nonfoliated = ms.iter().any(|m| !m.is_foliated());
    let mut worst: f64 = 0.0;
    for m in &ms {
        for p in points(&m.source, 20, 9) {
            worst = worst.max(maps::bochner_residual(m, &p).map_err(err)?.abs());
        }
    }
    ensure(nonfoliated && worst <= 1e-7, format!("max residual {worst:.1e} over 3 maps × 20 points"))
}

// 9: nilmanifold flow, n = 24, dt = h²/8, 2000 steps
fn flow_monotonicity() -> Outcome {
    let mut cfg = FlowConfig::intrinsic("perturbed:7:0.05", 24, 2000);
    cfg.tau_tol = 0.0;
    let h = cfg.grid().map_err(err)?.spacing();
    cfg.dt = Some(h * h / 8.0);
    let out = flow::run_flow(&cfg).map_err(err)?;
    let rows = &out.trace.rows;
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let slack = 1e-9 * first.e_hh;
    let (dh, dlh, dll) = (out.trace.max_increase(|r| r.e_hh), out.trace.max_increase(|r| r.e_lh), out.trace.max_increase(|r| r.e_ll));
    let resid = flow::energy_identity_residual(&out.trace).map_err(err)?;
    let drop = first.tau_h_sup / last.tau_h_sup;
    let k_drift = rows.iter().map(|r| (r.k - first.k).abs()).fold(0.0, f64::max) / first.k.abs();
    let ok = rows.len() == 2001
        && dh <= slack
        && dlh <= slack
        && dll <= slack
        && resid <= 1e-2
        && drop >= 10.0
        && last.foliated_defect <= 1e-3
        && k_drift <= 1e-3;
    ensure(
        ok,
        format!(
            "max ΔE_HH {dh:.1e}, ΔE_LH {dlh:.1e}, ΔE_LL {dll:.1e} (slack {slack:.1e}); identity residual {resid:.2e}; \
             sup|τ_H| ÷{drop:.0}; foliated {:.1e}; K drift {k_drift:.1e}",
            last.foliated_defect
        ),
    )
}

// 10: sphere flow, 500 steps, ∫|ρ|² nonincreasing within 1e-9/step; identity tension O(h²)
fn extrinsic_flow() -> Outcome {
    let mut cfg = FlowConfig::extrinsic("tangent-perturbed:0.1", 8, 500);
    cfg.seed = 7;
    cfg.tau_tol = 0.0;
    let out = flow::run_flow(&cfg).map_err(err)?;
    let inc = out.trace.max_increase(|r| r.rho_sq.unwrap_or(f64::NAN));
    let (r0, r1) = (out.trace.rows[0].rho_sq.unwrap_or(0.0), out.trace.rows[out.trace.rows.len() - 1].rho_sq.unwrap_or(0.0));
    let target = ExtrinsicTarget::sphere(&Model::sphere(flow::SPHERE_RADIUS).map_err(err)?).map_err(err)?;
    let fixed = |n: usize| -> Result<(f64, f64), String> {
        let g = FlowConfig::extrinsic("identity", n, 0).grid().map_err(err)?;
        let rhs = flow::extrinsic_rhs(&EmbeddedMap::identity(&g, &target), &target, PiTerm::Composition);
        let s = rhs
            .iter()
            .enumerate()
            .filter(|(i, _)| (FRAC_PI_8..=3.0 * FRAC_PI_8).contains(&g.coords(*i)[0]))
            .flat_map(|(_, v)| v.iter().map(|x| x.abs()))
            .fold(0.0, f64::max);
        Ok((s, g.spacing()))
    };
    let ((s1, h1), (s2, h2)) = (fixed(8)?, fixed(16)?);
    let c = (s1 / (h1 * h1)).max(s2 / (h2 * h2));
    let ok = out.trace.rows.len() == 501 && inc <= 1e-9 && c <= 0.5 && s1 / s2 >= 3.0;
    ensure(
        ok,
        format!("∫|ρ|² {r0:.3e} → {r1:.3e}, max step increase {inc:.1e}; identity sup|u_t| ≤ {c:.3}·h², ratio {:.2}", s1 / s2),
    )
}

// 11: E(identity) ≤ E(f) + 1e-9 for 20 seeded foliated perturbations
fn minimality() -> Outcome {
    let g = Grid::nilmanifold(16).map_err(err)?;
    let e_id = maps::energies_analytic(&AnalyticMap::identity(), &g).map_err(err)?.e_hh;
    let mut gap = f64::INFINITY;
    for seed in 0..20 {
        let m = AnalyticMap::perturbed(seed, 0.05, true);
        gap = gap.min(maps::energies_analytic(&m, &g).map_err(err)?.e_hh - e_id);
    }
    ensure(gap >= -1e-9, format!("min E(f) − E(id) = {gap:.3e}"))
}

// 12: `verify --all` twice, same seed and thread count → identical bytes
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_sasaki"))
            .args(["verify", "--all", "--seed", "7", "--threads", "2", "--out"])
            .arg(&out)
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .map_err(err)?;
        if status.status.code() != Some(0) {
            return Err(format!("verify exited with {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
        }
        std::fs::read(&out).map_err(err)
    };
    let (a, b) = (run("a.json")?, run("b.json")?);
    ensure(!a.is_empty() && a == b, format!("two reports, {} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 12] = [
        ("connection axioms", 10.0, connection_axioms),
        ("space-form curvature", 5.0, space_form_curvature),
        ("negativity classifier", 30.0, negativity),
        ("Reeb codifferential of dθ", 20.0, reeb_codifferential),
        ("scalar commutation order", 20.0, scalar_commutation),
        ("map commutation suite", 5.0, map_commutation),
        ("energy algebra", 5.0, energy_algebra),
        ("Bochner residual", 5.0, bochner),
        ("flow monotonicity", 300.0, flow_monotonicity),
        ("extrinsic backend", 120.0, extrinsic_flow),
        ("minimality spot check", 30.0, minimality),
        ("determinism", f64::INFINITY, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = f();
        let secs = t.elapsed().as_secs_f64();
        let in_time = secs <= *limit;
        let (ok, msg) = match res {
            Ok(m) => (in_time, m),
            Err(m) => (false, m),
        };
        let time = if limit.is_finite() { format!("{secs:.1}s / {limit:.0}s") } else { format!("{secs:.1}s") };
        println!("criterion {:>2} {:<28} {}  [{time}]  {msg}", i + 1, name, if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
