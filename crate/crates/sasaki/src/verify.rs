//! Named identity checks with machine-readable pass/fail results.
//!
//! Each check runs one library operation against a stated tolerance. Checks
//! run sequentially (each parallelises internally), so reports are
//! reproducible at any thread count. Wall-clock runtimes go to the table
//! only; the JSON report carries no timing so reruns compare byte for byte.

use std::cell::OnceCell;
use std::f64::consts::FRAC_PI_8;
use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{codifferential_2form, scalar_commutation_residual, theta_mode, Grid, ScalarField, TwoForm};
use crate::flow::{self, EmbeddedMap, ExtrinsicTarget, FlowConfig, FlowOutcome, PiTerm, V4};
use crate::geometry::{tanaka_webster_convergence, Model, NegativityClass};
use crate::maps::{self, AnalyticMap, MapField};
use crate::small::V3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub scenario: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip)]
    pub runtime_s: f64,
}

/// Parameters shared by the suite; defaults are the desk-scale settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub tw_samples: usize,
    pub tw_h: f64,
    pub curvature_points: usize,
    pub order2_trials: usize,
    pub grid_coarse: usize,
    pub grid_fine: usize,
    pub map_points: usize,
    pub minimality_seeds: usize,
    pub minimality_n: usize,
    pub flow_n: usize,
    pub flow_steps: usize,
    pub flow_eps: f64,
    pub sphere_n: usize,
    pub sphere_steps: usize,
    pub sphere_eps: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 7,
            tw_samples: 100,
            tw_h: 1e-3,
            curvature_points: 50,
            order2_trials: 10_000,
            grid_coarse: 32,
            grid_fine: 64,
            map_points: 20,
            minimality_seeds: 20,
            minimality_n: 16,
            flow_n: 24,
            flow_steps: 2000,
            flow_eps: 0.05,
            sphere_n: 8,
            sphere_steps: 500,
            sphere_eps: 0.1,
        }
    }
}

struct Outcome {
    scenario: String,
    residual: f64,
    tolerance: f64,
    pass: bool,
}

impl Outcome {
    fn le(scenario: impl Into<String>, residual: f64, tolerance: f64) -> Outcome {
        Outcome { scenario: scenario.into(), residual, tolerance, pass: residual <= tolerance }
    }

    /// `ratio ∈ [lo, hi]`, reported as the distance from the band centre.
    fn band(scenario: impl Into<String>, ratio: f64, lo: f64, hi: f64) -> Outcome {
        let (c, w) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let residual = (ratio - c).abs();
        Outcome { scenario: format!("{} (ratio {ratio:.4})", scenario.into()), residual, tolerance: w, pass: residual <= w }
    }
}

struct Ctx<'a> {
    cfg: &'a SuiteConfig,
    nil_flow: OnceCell<std::result::Result<FlowOutcome, String>>,
    sphere_flow: OnceCell<std::result::Result<FlowOutcome, String>>,
}

impl Ctx<'_> {
    fn nil_flow(&self) -> Result<&FlowOutcome> {
        let c = self.cfg;
        self.nil_flow
            .get_or_init(|| {
                let mut fc = FlowConfig::intrinsic(&format!("perturbed:{}:{}", c.seed, c.flow_eps), c.flow_n, c.flow_steps);
                fc.seed = c.seed;
                fc.tau_tol = 0.0;
                let h = fc.grid().map_err(|e| e.to_string())?.spacing();
                fc.dt = Some(h * h / 8.0);
                flow::run_flow(&fc).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Config(e.clone()))
    }

    fn sphere_flow(&self) -> Result<&FlowOutcome> {
        let c = self.cfg;
        self.sphere_flow
            .get_or_init(|| {
                let mut fc = FlowConfig::extrinsic(&format!("tangent-perturbed:{}", c.sphere_eps), c.sphere_n, c.sphere_steps);
                fc.seed = c.seed;
                fc.tau_tol = 0.0;
                flow::run_flow(&fc).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Config(e.clone()))
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }
}

type CheckFn = fn(&Ctx) -> Result<Outcome>;

struct Check {
    id: &'static str,
    run: CheckFn,
}

fn compact_models() -> [Model; 3] {
    [Model::heisenberg(), Model::sphere(1.0).expect("scale"), Model::space_form(-1.0).expect("λ")]
}

fn tw_axioms(ctx: &Ctx, which: usize) -> Result<Outcome> {
    let m = &compact_models()[which];
    let c = tanaka_webster_convergence(m, ctx.cfg.tw_samples, ctx.cfg.tw_h, ctx.cfg.seed);
    Ok(Outcome::le(format!("{}: {} points, h={}", m.name(), ctx.cfg.tw_samples, ctx.cfg.tw_h), c.coarse.max(), 1e-5))
}

fn tw_order(ctx: &Ctx, which: usize) -> Result<Outcome> {
    let m = &compact_models()[which];
    let c = tanaka_webster_convergence(m, ctx.cfg.tw_samples, ctx.cfg.tw_h, ctx.cfg.seed);
    let resolved: Vec<f64> = c.ratios.iter().filter_map(|r| r.1).collect();
    if resolved.is_empty() {
        return Ok(Outcome::le(format!("{}: every residual below the rounding floor", m.name()), 0.0, 1.25));
    }
    let worst = resolved.iter().copied().fold(4.25, |w, r| if (r - 4.25).abs() > (w - 4.25f64).abs() { r } else { w });
    Ok(Outcome::band(format!("{}: h vs h/2, worst resolved residual", m.name()), worst, 3.0, 5.5))
}

fn sample_points(m: &Model, n: usize, rng: &mut ChaCha8Rng) -> Vec<V3> {
    (0..n).map(|_| m.sample_point(rng)).collect()
}

fn space_form_curvature(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(2);
    let mut worst: f64 = 0.0;
    for lam in [-1.0, 0.0, 1.0] {
        let m = Model::space_form(lam)?;
        for p in sample_points(&m, ctx.cfg.curvature_points, &mut rng) {
            let k = m.hol_sectional(&p, &[0.0, 1.0, 0.0])?;
            worst = worst.max((k - lam).abs());
        }
    }
    Ok(Outcome::le(format!("λ ∈ {{-1, 0, 1}}, {} points each", ctx.cfg.curvature_points), worst, 1e-6))
}

fn nilmanifold_flat(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(3);
    let m = Model::heisenberg();
    let worst = sample_points(&m, ctx.cfg.curvature_points, &mut rng)
        .iter()
        .map(|p| m.curvature_tensor(p).iter().flatten().flatten().flatten().fold(0.0f64, |a, v| a.max(v.abs())))
        .fold(0.0, f64::max);
    Ok(Outcome::le("heisenberg-nilmanifold: max |R|", worst, 1e-9))
}

fn connection_offset(ctx: &Ctx) -> Result<Outcome> {
    // ∇^θ_{e_a} e_b = ∇_{e_a} e_b + S(e_b, e_a), against the Koszul formula
    let mut rng = ctx.rng(4);
    let mut worst: f64 = 0.0;
    for m in compact_models() {
        for p in sample_points(&m, 20, &mut rng) {
            let c = m.structure_constants(&p);
            let g = m.gamma(&p);
            let s = m.connection_offset(&p)?.s;
            for a in 0..3 {
                for b in 0..3 {
                    for d in 0..3 {
                        let koszul = 0.5 * (c[a][b][d] - c[b][d][a] + c[d][a][b]);
                        worst = worst.max((koszul - g[a][b][d] - s[b][a][d]).abs());
                    }
                }
            }
        }
    }
    Ok(Outcome::le("three models, 20 points: Levi-Civita = Tanaka-Webster + offset", worst, 1e-10))
}

fn negativity_classes(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(5);
    let expect = [
        (Model::space_form(-1.0)?, NegativityClass::StronglyNegative),
        (Model::heisenberg(), NegativityClass::StronglySeminegative),
        (Model::sphere(1.0)?, NegativityClass::Indefinite),
    ];
    let mut wrong = 0usize;
    for (m, want) in &expect {
        for p in sample_points(m, 10, &mut rng) {
            wrong += usize::from(m.negativity_class(&p)? != *want);
        }
    }
    Ok(Outcome::le("space-form(-1), nilmanifold, sphere: misclassified points", wrong as f64, 0.0))
}

fn order_two_negativity(ctx: &Ctx) -> Result<Outcome> {
    let m = Model::space_form(-1.0)?;
    let r = m.order_k_negativity_sample(&[0.1, 0.1, 0.0], 2, ctx.cfg.order2_trials, ctx.cfg.seed)?;
    let found = f64::from(u8::from(r.counterexample.is_some()));
    Ok(Outcome::le(format!("space-form(-1), order 2, {} trials: {}", r.trials, r.outcome), found, 0.0))
}

fn reeb_codifferential(n: usize, tol: f64) -> Result<Outcome> {
    let g = Grid::nilmanifold(n)?;
    let d = codifferential_2form(&TwoForm::dtheta(&g));
    let worst = d.comps[0].iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    Ok(Outcome::le(format!("nilmanifold n={n}: max |δdθ(ξ) − 1|"), worst, tol))
}

fn scalar_commutation(ctx: &Ctx) -> Result<Outcome> {
    let res = |n: usize| -> Result<f64> {
        let g = Grid::nilmanifold(n)?;
        let u = ScalarField::from_fn(&g, |p| {
            theta_mode(&p, &[0.13, -0.37, 0.21], 0.4) + 0.5 * theta_mode(&p, &[-0.2, 0.4, 0.3], 1.3)
        });
        Ok(scalar_commutation_residual(&u).max_abs())
    };
    let (a, b) = (res(ctx.cfg.grid_coarse)?, res(ctx.cfg.grid_fine)?);
    Ok(Outcome::band(format!("nilmanifold n={} vs n={}", ctx.cfg.grid_coarse, ctx.cfg.grid_fine), a / b, 3.0, 5.5))
}

fn corpus_points(ctx: &Ctx, m: &AnalyticMap, salt: u64) -> Vec<V3> {
    sample_points(&m.source, ctx.cfg.map_points, &mut ctx.rng(salt))
}

fn map_commutation(ctx: &Ctx) -> Result<Outcome> {
    let corpus = AnalyticMap::corpus();
    let mut worst: f64 = 0.0;
    for m in &corpus {
        worst = worst.max(maps::commutation_residuals_analytic(m, &corpus_points(ctx, m, 6))?.max());
    }
    Ok(Outcome::le(format!("{} corpus maps, {} points each", corpus.len(), ctx.cfg.map_points), worst, 1e-9))
}

fn energy_algebra(ctx: &Ctx) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for m in AnalyticMap::corpus() {
        for p in corpus_points(ctx, &m, 7) {
            let e = maps::energy_density(&maps::analytic_jet(&m, &p)?);
            worst = worst.max((e.e_hh - e.d_sq - e.d_bar_sq).abs()).max((e.k - e.d_sq + e.d_bar_sq).abs());
        }
    }
    Ok(Outcome::le("corpus: e_HH = |∂f|² + |∂̄f|², k = |∂f|² − |∂̄f|²", worst, 1e-12))
}

fn identity_energy(ctx: &Ctx) -> Result<Outcome> {
    let g = Grid::nilmanifold(ctx.cfg.minimality_n)?;
    let e = maps::energies_analytic(&AnalyticMap::identity(), &g)?;
    Ok(Outcome::le(format!("identity, exact jets, n={}: |E_HH − 1|", ctx.cfg.minimality_n), (e.e_hh - 1.0).abs(), 1e-10))
}

fn pullback_dtheta(ctx: &Ctx) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for m in AnalyticMap::corpus() {
        for p in corpus_points(ctx, &m, 8) {
            worst = worst.max(maps::pullback_residual_analytic(&m, &p)?);
        }
    }
    Ok(Outcome::le("corpus: pulled-back dθ̃(e_1, e_2) vs k-identity", worst, 1e-10))
}

fn bochner(ctx: &Ctx) -> Result<Outcome> {
    let ms = [AnalyticMap::trig(0.1), AnalyticMap::reeb_tilt(0.1), AnalyticMap::perturbed(ctx.cfg.seed, 0.05, false)];
    let mut worst: f64 = 0.0;
    for m in &ms {
        for p in corpus_points(ctx, m, 9) {
            let t = maps::bochner_terms(m, &p)?;
            worst = worst.max(t.residual.abs() / (1.0 + t.lhs.abs()));
        }
    }
    Ok(Outcome::le(format!("trig, reeb-tilt, non-foliated perturbation; {} points each", ctx.cfg.map_points), worst, 1e-7))
}

fn defect_classifiers(_: &Ctx) -> Result<Outcome> {
    let p = [0.31, 0.62, 0.17];
    let d = |m: &AnalyticMap| -> Result<maps::Defects> { Ok(maps::jet_defects(&maps::analytic_jet(m, &p)?)) };
    let (id, conj, vs, tilt) = (
        d(&AnalyticMap::identity())?,
        d(&AnalyticMap::conjugation())?,
        d(&AnalyticMap::vertical_shift(0.3))?,
        d(&AnalyticMap::reeb_tilt(0.1))?,
    );
    // quantities that must vanish, and ones that must not
    let zero = [id.holo, id.foliated, id.pluriharmonic, conj.antiholo, vs.foliated, vs.holo].into_iter().fold(0.0, f64::max);
    let nonzero = [conj.holo, tilt.foliated, id.horizontally_constant].into_iter().fold(f64::INFINITY, f64::min);
    let residual = if nonzero > 1e-3 { zero } else { f64::MAX };
    Ok(Outcome::le("identity, conjugation, vertical shift, reeb tilt", residual, 1e-12))
}

fn homotopy_invariance(ctx: &Ctx) -> Result<Outcome> {
    let g = Grid::nilmanifold(ctx.cfg.flow_n)?;
    let fam = [0.0, 0.25, 0.5, 0.75]
        .iter()
        .map(|s| MapField::from_analytic(&g, &AnalyticMap::fiber_rotation(*s)))
        .collect::<Result<Vec<_>>>()?;
    let r = maps::homotopy_invariance_check(&fam, true, 1e-8)?;
    Ok(Outcome::le("fiber-rotation family: relative drift of K, E′, E″", r.k_drift.max(r.e_prime_drift).max(r.e_dprime_drift), 1e-3))
}

fn minimality(ctx: &Ctx) -> Result<Outcome> {
    let g = Grid::nilmanifold(ctx.cfg.minimality_n)?;
    let e_id = maps::energies_analytic(&AnalyticMap::identity(), &g)?.e_hh;
    let mut worst = f64::NEG_INFINITY;
    for s in 0..ctx.cfg.minimality_seeds as u64 {
        let e = maps::energies_analytic(&AnalyticMap::perturbed(ctx.cfg.seed.wrapping_add(s), 0.05, true), &g)?.e_hh;
        worst = worst.max(e_id - e);
    }
    Ok(Outcome::le(format!("{} foliated perturbations: max E(id) − E(f)", ctx.cfg.minimality_seeds), worst.max(0.0), 1e-9))
}

fn flow_rows(o: &FlowOutcome) -> &[flow::TraceRow] {
    &o.trace.rows
}

fn flow_energy_monotone(ctx: &Ctx) -> Result<Outcome> {
    let o = ctx.nil_flow()?;
    let e0 = flow_rows(o)[0].e_hh;
    Ok(Outcome::le(format!("{} steps: max step increase of E_HH / E_HH(0)", o.summary.steps), o.trace.max_increase(|r| r.e_hh).max(0.0) / e0, 1e-9))
}

fn flow_energy_identity(ctx: &Ctx) -> Result<Outcome> {
    let o = ctx.nil_flow()?;
    Ok(Outcome::le("relative residual of the dissipation identity", flow::energy_identity_residual(&o.trace)?, 1e-2))
}

fn flow_lh_decay(ctx: &Ctx) -> Result<Outcome> {
    let o = ctx.nil_flow()?;
    let e0 = flow_rows(o)[0].e_hh;
    Ok(Outcome::le("max step increase of E_LH / E_HH(0)", o.trace.max_increase(|r| r.e_lh).max(0.0) / e0, 1e-9))
}

fn flow_ll_decay(ctx: &Ctx) -> Result<Outcome> {
    let o = ctx.nil_flow()?;
    let e0 = flow_rows(o)[0].e_hh;
    Ok(Outcome::le("max step increase of E_LL / E_HH(0)", o.trace.max_increase(|r| r.e_ll).max(0.0) / e0, 1e-9))
}

fn flow_tension_drop(ctx: &Ctx) -> Result<Outcome> {
    let rows = flow_rows(ctx.nil_flow()?);
    let (a, b) = (rows[0].tau_h_sup, rows[rows.len() - 1].tau_h_sup);
    Ok(Outcome::le(format!("sup|τ_H|: {a:.3e} → {b:.3e}, final / initial"), b / a, 0.1))
}

fn flow_foliated(ctx: &Ctx) -> Result<Outcome> {
    let rows = flow_rows(ctx.nil_flow()?);
    Ok(Outcome::le("final foliated defect", rows[rows.len() - 1].foliated_defect, 1e-3))
}

fn flow_k_invariance(ctx: &Ctx) -> Result<Outcome> {
    let rows = flow_rows(ctx.nil_flow()?);
    let k0 = rows[0].k;
    let drift = rows.iter().map(|r| (r.k - k0).abs()).fold(0.0, f64::max) / k0.abs();
    Ok(Outcome::le("max relative drift of K", drift, 1e-3))
}

fn extrinsic_distance(ctx: &Ctx) -> Result<Outcome> {
    let o = ctx.sphere_flow()?;
    let inc = o.trace.max_increase(|r| r.rho_sq.unwrap_or(f64::NAN));
    Ok(Outcome::le(format!("{} steps: max step increase of ∫|ρ(u)|²", o.summary.steps), inc.max(0.0), 1e-9))
}

/// Tension of the embedded identity, away from the coordinate poles where
/// the polar grid itself is only first order.
fn extrinsic_identity(ctx: &Ctx) -> Result<Outcome> {
    let target = ExtrinsicTarget::sphere(&Model::sphere(flow::SPHERE_RADIUS)?)?;
    let sup = |n: usize| -> Result<(f64, f64)> {
        let g = FlowConfig::extrinsic("identity", n, 0).grid()?;
        let u = EmbeddedMap::identity(&g, &target);
        let rhs: Vec<V4> = flow::extrinsic_rhs(&u, &target, PiTerm::Composition);
        let s = rhs
            .iter()
            .enumerate()
            .filter(|(i, _)| (FRAC_PI_8..=3.0 * FRAC_PI_8).contains(&g.coords(*i)[0]))
            .flat_map(|(_, v)| v.iter().map(|x| x.abs()))
            .fold(0.0, f64::max);
        Ok((s, g.spacing()))
    };
    let n = ctx.cfg.sphere_n;
    let ((s1, h1), (s2, h2)) = (sup(n)?, sup(2 * n)?);
    let c = (s1 / (h1 * h1)).max(s2 / (h2 * h2));
    let ratio = s1 / s2;
    let scenario = format!("embedded identity, n={n} and {}: sup/h² (order ratio {ratio:.3})", 2 * n);
    Ok(Outcome { pass: c <= 0.5 && ratio >= 3.0, scenario, residual: c, tolerance: 0.5 })
}

const CHECKS: &[Check] = &[
    Check { id: "geometry.tanaka-webster.nilmanifold", run: |c| tw_axioms(c, 0) },
    Check { id: "geometry.tanaka-webster.sphere", run: |c| tw_axioms(c, 1) },
    Check { id: "geometry.tanaka-webster.space-form", run: |c| tw_axioms(c, 2) },
    Check { id: "geometry.tanaka-webster-order.nilmanifold", run: |c| tw_order(c, 0) },
    Check { id: "geometry.tanaka-webster-order.sphere", run: |c| tw_order(c, 1) },
    Check { id: "geometry.tanaka-webster-order.space-form", run: |c| tw_order(c, 2) },
    Check { id: "geometry.connection-offset", run: connection_offset },
    Check { id: "geometry.space-form-curvature", run: space_form_curvature },
    Check { id: "geometry.nilmanifold-flat", run: nilmanifold_flat },
    Check { id: "geometry.negativity-classes", run: negativity_classes },
    Check { id: "geometry.order-two-negativity", run: order_two_negativity },
    Check { id: "fields.reeb-codifferential", run: |c| reeb_codifferential(c.cfg.grid_coarse, 5e-3) },
    Check { id: "fields.reeb-codifferential-fine", run: |c| reeb_codifferential(c.cfg.grid_fine, 1.25e-3) },
    Check { id: "fields.scalar-commutation-order", run: scalar_commutation },
    Check { id: "maps.commutation", run: map_commutation },
    Check { id: "maps.energy-algebra", run: energy_algebra },
    Check { id: "maps.identity-energy", run: identity_energy },
    Check { id: "maps.pullback-dtheta", run: pullback_dtheta },
    Check { id: "maps.bochner", run: bochner },
    Check { id: "maps.defect-classifiers", run: defect_classifiers },
    Check { id: "maps.homotopy-invariance", run: homotopy_invariance },
    Check { id: "maps.identity-minimality", run: minimality },
    Check { id: "flow.energy-monotonicity", run: flow_energy_monotone },
    Check { id: "flow.energy-identity", run: flow_energy_identity },
    Check { id: "flow.mixed-energy-decay", run: flow_lh_decay },
    Check { id: "flow.vertical-energy-decay", run: flow_ll_decay },
    Check { id: "flow.tension-reduction", run: flow_tension_drop },
    Check { id: "flow.foliated-limit", run: flow_foliated },
    Check { id: "flow.k-invariance", run: flow_k_invariance },
    Check { id: "flow.extrinsic-distance", run: extrinsic_distance },
    Check { id: "flow.extrinsic-identity", run: extrinsic_identity },
];

pub fn check_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.id).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selection {
    All,
    Ids(Vec<String>),
}

pub fn run_suite(selection: &Selection, cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let chosen: Vec<&Check> = match selection {
        Selection::All => CHECKS.iter().collect(),
        Selection::Ids(ids) => {
            for id in ids {
                if !CHECKS.iter().any(|c| c.id == id) {
                    return Err(Error::UnknownCheck(id.clone()));
                }
            }
            // registry order, duplicates collapsed
            CHECKS.iter().filter(|c| ids.iter().any(|i| i == c.id)).collect()
        }
    };
    let ctx = Ctx { cfg, nil_flow: OnceCell::new(), sphere_flow: OnceCell::new() };
    Ok(chosen
        .into_iter()
        .map(|c| {
            let t = Instant::now();
            let o = (c.run)(&ctx).unwrap_or_else(|e| Outcome { scenario: format!("error: {e}"), residual: f64::MAX, tolerance: 0.0, pass: false });
            let residual = if o.residual.is_finite() { o.residual } else { f64::MAX };
            CheckResult {
                id: c.id.to_string(),
                scenario: o.scenario,
                residual,
                tolerance: o.tolerance,
                pass: o.pass && o.residual.is_finite(),
                runtime_s: t.elapsed().as_secs_f64(),
            }
        })
        .collect())
}

pub fn all_pass(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.pass)
}

pub fn report_json(results: &[CheckResult]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(results)?;
    s.push('\n');
    Ok(s)
}

pub fn report_table(results: &[CheckResult]) -> String {
    let w = results.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
    let mut s = format!("{:<w$}  {:<4}  {:>11}  {:>9}  {:>8}  scenario\n", "id", "", "residual", "tolerance", "time");
    for r in results {
        let _ = writeln!(
            s,
            "{:<w$}  {:<4}  {:>11.3e}  {:>9.1e}  {:>7.2}s  {}",
            r.id,
            if r.pass { "ok" } else { "FAIL" },
            r.residual,
            r.tolerance,
            r.runtime_s,
            r.scenario
        );
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    let _ = writeln!(s, "{} checks, {} failed", results.len(), failed);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique() {
        let mut ids = check_ids();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }

    #[test]
    fn empty_and_unknown_selections() {
        let cfg = SuiteConfig::default();
        assert!(run_suite(&Selection::Ids(vec![]), &cfg).unwrap().is_empty());
        assert!(matches!(run_suite(&Selection::Ids(vec!["nope".into()]), &cfg), Err(Error::UnknownCheck(_))));
    }
}
