//! The subelliptic heat flow `∂f/∂t = τ_H(f)`.
//!
//! Two backends: `intrinsic` evolves nilmanifold-valued maps through their
//! frame coefficients; `extrinsic` evolves `R⁴`-valued maps into the round
//! sphere through the embedded system with the closest-point projection.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{sub_laplacian, Grid, ScalarField};
use crate::geometry::{Model, ModelKind};
use crate::maps::{energy_density_d1, integrate_densities, AnalyticMap, EnergyBreakdown, Energies, MapField};
use crate::small::V3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Intrinsic,
    Extrinsic,
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Backend> {
        match s {
            "intrinsic" => Ok(Backend::Intrinsic),
            "extrinsic" => Ok(Backend::Extrinsic),
            _ => Err(Error::Config(format!("unknown backend `{s}` (expected intrinsic | extrinsic)"))),
        }
    }
}

/// How the `Π^a_{bc}⟨∇_H u^b, ∇_H u^c⟩` term of the extrinsic system is discretised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiTerm {
    /// `Δ_H(Π∘u) − dΠ(Δ_H u)`: the chain rule read backwards. Keeps the
    /// discrete `∫|ρ(u)|²` law exact up to time-stepping error.
    Composition,
    /// Closed-form `Π^a_{bc}` contracted with discrete gradients.
    Pointwise,
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub source: Model,
    pub target: Model,
    pub backend: Backend,
    /// Intrinsic: an [`AnalyticMap`] spec. Extrinsic: `identity`,
    /// `tangent-perturbed:eps` or `constant:η,α,β`.
    pub initial: String,
    /// Grid parameter: `(n, n, 2n)` on the nilmanifold, `(n, 4n, 4n)` on the sphere.
    pub n: usize,
    /// Time step; `None` means half the stability bound.
    pub dt: Option<f64>,
    pub steps: usize,
    pub every: usize,
    pub tau_tol: f64,
    pub mono_slack: f64,
    pub seed: u64,
    pub allow_unstable: bool,
    pub reproject: bool,
    pub pi_term: PiTerm,
}

impl FlowConfig {
    pub fn intrinsic(initial: &str, n: usize, steps: usize) -> FlowConfig {
        FlowConfig {
            source: Model::heisenberg(),
            target: Model::heisenberg(),
            backend: Backend::Intrinsic,
            initial: initial.to_string(),
            n,
            dt: None,
            steps,
            every: 1,
            tau_tol: 1e-4,
            mono_slack: 1e-9,
            seed: 0,
            allow_unstable: false,
            reproject: false,
            pi_term: PiTerm::Composition,
        }
    }

    pub fn extrinsic(initial: &str, n: usize, steps: usize) -> FlowConfig {
        let s = Model::sphere(SPHERE_RADIUS).expect("positive scale");
        FlowConfig { source: s.clone(), target: s, backend: Backend::Extrinsic, ..FlowConfig::intrinsic(initial, n, steps) }
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        match self.source.kind {
            ModelKind::HeisenbergNilmanifold => Grid::nilmanifold(self.n),
            ModelKind::RoundSphere3 => Grid::sphere(&self.source, self.n, 4 * self.n, 4 * self.n),
            ModelKind::SpaceFormChart => Err(Error::Unsupported("flows need a compact source model".into())),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub time: f64,
    pub e_hh: f64,
    pub e_lh: f64,
    pub e_hl: f64,
    pub e_ll: f64,
    pub k: f64,
    pub tau_hh_sup: f64,
    pub tau_hl_sup: f64,
    pub energy_identity_residual: f64,
    pub rho_sq: Option<f64>,
    pub foliated_defect: f64,
    /// `∫|τ_{H,H̃}|²` at this step (not part of the CSV layout).
    #[serde(skip)]
    pub tau_hh_sq: f64,
    #[serde(skip)]
    pub tau_h_sup: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
}

pub const CSV_HEADER: &str =
    "step,time,E_HH,E_LH,E_HL,E_LL,K,tau_HH_sup,tau_HL_sup,energy_identity_residual,rho_sq,foliated_defect";

impl FlowTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let rho = r.rho_sq.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
                r.step,
                r.time,
                r.e_hh,
                r.e_lh,
                r.e_hl,
                r.e_ll,
                r.k,
                r.tau_hh_sup,
                r.tau_hl_sup,
                r.energy_identity_residual,
                rho,
                r.foliated_defect
            );
        }
        s
    }

    /// Largest per-step increase of a recorded quantity.
    pub fn max_increase(&self, q: impl Fn(&TraceRow) -> f64) -> f64 {
        self.rows.windows(2).map(|w| q(&w[1]) - q(&w[0])).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `|E(t_end) + Σ Δt·∫|τ_{H,H̃}|² − E(0)| / E(0)`, left rectangle rule over
/// the recorded rows.
pub fn energy_identity_residual(trace: &FlowTrace) -> Result<f64> {
    let rows = &trace.rows;
    let (first, last) = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Empty("flow trace".into())),
    };
    let dissipated: f64 = rows.windows(2).map(|w| (w[1].time - w[0].time) * w[0].tau_hh_sq).sum();
    let scale = if first.e_hh.abs() > 0.0 { first.e_hh.abs() } else { 1.0 };
    Ok((last.e_hh + dissipated - first.e_hh).abs() / scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    SpecialHarmonic,
    HarmonicHorizontalOnly,
    NotConverged,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowSummary {
    pub converged: bool,
    pub steps: usize,
    #[serde(rename = "final")]
    pub final_energies: Energies,
    pub classification: Classification,
}

#[derive(Clone, Debug)]
pub enum FinalMap {
    Intrinsic(MapField),
    Extrinsic(EmbeddedMap),
}

impl FinalMap {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            FinalMap::Intrinsic(f) => &f.grid,
            FinalMap::Extrinsic(u) => &u.grid,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub trace: FlowTrace,
    pub summary: FlowSummary,
    pub final_map: FinalMap,
    pub dt: f64,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// Intrinsic backend

struct Diag {
    dens: Vec<EnergyBreakdown>,
    tau: Vec<V3>,
    foliated: f64,
}

/// `τ_H^a = Σ_{b=1,2} D_b F^a_b` (both frames are parallel on the flat model).
fn intrinsic_state(f: &MapField) -> Diag {
    let g = &f.grid;
    let d1 = f.d1_all();
    let mut tau = vec![[0.0; 3]; g.len()];
    for a in 0..3 {
        for b in 1..3 {
            let comp: Vec<f64> = d1.iter().map(|m| m[a][b]).collect();
            let d = g.frame_diff(&comp, b, false);
            tau.iter_mut().zip(&d).for_each(|(t, v)| t[a] += v);
        }
    }
    let dens = d1.par_iter().map(energy_density_d1).collect();
    let foliated = d1.iter().map(|m| m[1][0].hypot(m[2][0]) * FRAC_1_SQRT_2).fold(0.0, f64::max);
    Diag { dens, tau, foliated }
}

fn intrinsic_update(f: &MapField, tau: &[V3], dt: f64, step: usize) -> Result<MapField> {
    let values: Vec<V3> = f
        .values
        .par_iter()
        .zip(tau)
        .map(|(v, t)| {
            let e = f.target.frame(v);
            std::array::from_fn(|i| v[i] + dt * (t[0] * e[0][i] + t[1] * e[1][i] + t[2] * e[2][i]))
        })
        .collect();
    if let Some(node) = values.iter().position(|v| !v.iter().all(|x| x.is_finite() && x.abs() < BLOWUP)) {
        return Err(Error::BlowUp { step, node });
    }
    Ok(MapField { values, ..f.clone() })
}

const BLOWUP: f64 = 1e12;

/// One forward-Euler step `f ← f + dt·τ_H(f)` in lifted target coordinates.
pub fn step_intrinsic(f: &MapField, dt: f64) -> Result<MapField> {
    let d = intrinsic_state(f);
    intrinsic_update(f, &d.tau, dt, 0)
}

/// `τ_H` at every node as `(τ_{H,L̃}, τ_{H,H̃})` target-frame components.
pub fn intrinsic_tension(f: &MapField) -> Vec<V3> {
    intrinsic_state(f).tau
}

// ---------------------------------------------------------------------------
// Extrinsic backend

pub const SPHERE_RADIUS: f64 = 2.0;

/// Round sphere of radius 2 in `R⁴ = C²`. At this scale the Webster metric is
/// the induced Euclidean one, `ξ̃ = ½ i y` and `J̃` is multiplication by `i`
/// on the horizontal space.
#[derive(Clone, Debug)]
pub struct ExtrinsicTarget {
    pub model: Model,
    pub radius: f64,
    pub tube_radius: f64,
}

pub type V4 = [f64; 4];

fn dot4(a: &V4, b: &V4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn mul_i(v: &V4) -> V4 {
    [-v[1], v[0], -v[3], v[2]]
}

impl ExtrinsicTarget {
    pub fn sphere(model: &Model) -> Result<ExtrinsicTarget> {
        if model.kind != ModelKind::RoundSphere3 || (model.scale - SPHERE_RADIUS).abs() > 1e-12 {
            return Err(Error::Unsupported(format!(
                "the extrinsic backend embeds the sphere of scale {SPHERE_RADIUS} isometrically; got {}",
                model.name()
            )));
        }
        Ok(ExtrinsicTarget { model: model.clone(), radius: SPHERE_RADIUS, tube_radius: 0.5 * SPHERE_RADIUS })
    }

    pub fn dim(&self) -> usize {
        4
    }

    pub fn embed(&self, p: &V3) -> V4 {
        let r = self.radius;
        let (se, ce) = p[0].sin_cos();
        [r * ce * p[1].cos(), r * ce * p[1].sin(), r * se * p[2].cos(), r * se * p[2].sin()]
    }

    pub fn project(&self, y: &V4) -> V4 {
        let s = self.radius / dot4(y, y).sqrt();
        y.map(|v| v * s)
    }

    pub fn rho(&self, y: &V4) -> V4 {
        let p = self.project(y);
        std::array::from_fn(|a| y[a] - p[a])
    }

    /// `dΠ_y(w)`.
    pub fn d_project(&self, y: &V4, w: &V4) -> V4 {
        let r2 = dot4(y, y);
        let r = r2.sqrt();
        let yw = dot4(y, w) / r2;
        std::array::from_fn(|a| self.radius / r * (w[a] - yw * y[a]))
    }

    /// `Π^a_{bc} w^b w^c`.
    pub fn d2_project(&self, y: &V4, w: &V4) -> V4 {
        let r2 = dot4(y, y);
        let r = r2.sqrt();
        let (yw, ww) = (dot4(y, w), dot4(w, w));
        let r3 = r2 * r;
        std::array::from_fn(|a| self.radius * (-2.0 * w[a] * yw / r3 - y[a] * ww / r3 + 3.0 * y[a] * yw * yw / (r3 * r2)))
    }

    /// `Π^a_{bc}` as a full tensor.
    pub fn pi_tensor(&self, y: &V4) -> [[[f64; 4]; 4]; 4] {
        let r2 = dot4(y, y);
        let r = r2.sqrt();
        let r3 = r2 * r;
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                std::array::from_fn(|c| {
                    self.radius * (-(d(a, b) * y[c] + d(a, c) * y[b] + d(b, c) * y[a]) / r3 + 3.0 * y[a] * y[b] * y[c] / (r3 * r2))
                })
            })
        })
    }

    pub fn reeb(&self, q: &V4) -> V4 {
        mul_i(q).map(|v| v / self.radius)
    }

    pub fn theta(&self, q: &V4, w: &V4) -> f64 {
        dot4(w, &self.reeb(q))
    }

    /// `J̃` at `q ∈ N` applied to a tangent vector (ξ̃ ↦ 0).
    pub fn j(&self, q: &V4, w: &V4) -> V4 {
        let th = self.theta(q, w);
        let xi = self.reeb(q);
        mul_i(&std::array::from_fn(|a| w[a] - th * xi[a]))
    }

    /// `S(Z₁, Z₂) = ∇^θ_{Z₂} Z₁ − ∇̃_{Z₂} Z₁` at `q ∈ N`.
    pub fn s_tensor(&self, q: &V4, z1: &V4, z2: &V4) -> V4 {
        let xi = self.reeb(q);
        let (t1, t2) = (self.theta(q, z1), self.theta(q, z2));
        let (j1, j2) = (self.j(q, z1), self.j(q, z2));
        // dθ(X, Y) = ⟨J X_H, Y_H⟩
        let dth21 = dot4(&j2, z1);
        std::array::from_fn(|a| -0.5 * dth21 * xi[a] + 0.5 * (t2 * j1[a] + t1 * j2[a]))
    }

    /// `Ŝ_y(w₁, w₂) = S(dΠ w₁, dΠ w₂)` at `Π(y)`.
    pub fn s_hat(&self, y: &V4, w1: &V4, w2: &V4) -> V4 {
        let q = self.project(y);
        self.s_tensor(&q, &self.d_project(y, w1), &self.d_project(y, w2))
    }
}

/// `R⁴`-valued map on the sphere grid.
#[derive(Clone, Debug)]
pub struct EmbeddedMap {
    pub grid: Arc<Grid>,
    pub values: Vec<V4>,
}

impl EmbeddedMap {
    pub fn comp(&self, a: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[a]).collect()
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(V3) -> V4 + Sync) -> EmbeddedMap {
        EmbeddedMap { grid: grid.clone(), values: (0..grid.len()).into_par_iter().map(|n| f(grid.coords(n))).collect() }
    }

    pub fn identity(grid: &Arc<Grid>, target: &ExtrinsicTarget) -> EmbeddedMap {
        Self::from_fn(grid, |p| target.embed(&p))
    }

    /// Embedded identity moved along a smooth tangent field `P_T(A y)` with a
    /// seeded matrix `A`.
    pub fn tangent_perturbed(grid: &Arc<Grid>, target: &ExtrinsicTarget, eps: f64, seed: u64) -> EmbeddedMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: [[f64; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        Self::from_fn(grid, |p| {
            let y = target.embed(&p);
            let ay: V4 = std::array::from_fn(|i| (0..4).map(|j| a[i][j] * y[j]).sum::<f64>() / target.radius);
            let s = dot4(&ay, &y) / dot4(&y, &y);
            std::array::from_fn(|i| y[i] + eps * (ay[i] - s * y[i]))
        })
    }
}

struct ExtrinsicState {
    rhs: Vec<V4>,
    dens: Vec<EnergyBreakdown>,
    tau_hh: Vec<f64>,
    tau_hl: Vec<f64>,
    foliated: f64,
    rho_sq: f64,
}

fn extrinsic_state(u: &EmbeddedMap, target: &ExtrinsicTarget, pi_term: PiTerm) -> ExtrinsicState {
    let g = &u.grid;
    let comps: Vec<Vec<f64>> = (0..4).map(|a| u.comp(a)).collect();
    let lap: Vec<Vec<f64>> = comps
        .iter()
        .map(|c| sub_laplacian(&ScalarField { grid: g.clone(), values: c.clone() }).values)
        .collect();
    // e_B(u^a) for B = ξ, e_1, e_2
    let grads: Vec<[Vec<f64>; 3]> = comps.iter().map(|c| g.frame_diffs(c, false)).collect();
    let lap_pi: Option<Vec<Vec<f64>>> = match pi_term {
        PiTerm::Composition => {
            let proj: Vec<V4> = u.values.par_iter().map(|y| target.project(y)).collect();
            Some(
                (0..4)
                    .map(|a| {
                        let v = proj.iter().map(|p| p[a]).collect();
                        sub_laplacian(&ScalarField { grid: g.clone(), values: v }).values
                    })
                    .collect(),
            )
        }
        PiTerm::Pointwise => None,
    };
    let per_node: Vec<(V4, EnergyBreakdown, f64, f64, f64)> = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let y = u.values[n];
            let q = target.project(&y);
            let w: [V4; 3] = std::array::from_fn(|b| std::array::from_fn(|a| grads[a][b][n]));
            let lu: V4 = std::array::from_fn(|a| lap[a][n]);
            let mut rhs = lu;
            match &lap_pi {
                Some(lp) => {
                    let dpl = target.d_project(&y, &lu);
                    for a in 0..4 {
                        rhs[a] -= lp[a][n] - dpl[a];
                    }
                }
                None => {
                    for wb in &w[1..] {
                        let d2 = target.d2_project(&y, wb);
                        (0..4).for_each(|a| rhs[a] -= d2[a]);
                    }
                }
            }
            for wb in &w[1..] {
                let s = target.s_hat(&y, wb, wb);
                (0..4).for_each(|a| rhs[a] -= s[a]);
            }
            // frame data of f = Π∘u
            let pw: [V4; 3] = std::array::from_fn(|b| target.d_project(&y, &w[b]));
            let th: [f64; 3] = std::array::from_fn(|b| target.theta(&q, &pw[b]));
            let xi = target.reeb(&q);
            let hor = |v: &V4, t: f64| -> V4 { std::array::from_fn(|a| v[a] - t * xi[a]) };
            let wh: [V4; 3] = std::array::from_fn(|b| hor(&pw[b], th[b]));
            let e_hh = 0.5 * (dot4(&wh[1], &wh[1]) + dot4(&wh[2], &wh[2]));
            let k = dot4(&target.j(&q, &wh[1]), &wh[2]);
            let dens = EnergyBreakdown {
                e_hh,
                e_lh: 0.5 * dot4(&wh[0], &wh[0]),
                e_hl: 0.5 * (th[1] * th[1] + th[2] * th[2]),
                e_ll: 0.5 * th[0] * th[0],
                d_sq: 0.5 * (e_hh + k),
                d_bar_sq: 0.5 * (e_hh - k),
                k,
            };
            let tau = target.d_project(&y, &rhs);
            let t_hl = target.theta(&q, &tau);
            let t_hh = hor(&tau, t_hl);
            let rho = target.rho(&y);
            (rhs, dens, dot4(&t_hh, &t_hh).sqrt(), t_hl, dot4(&rho, &rho))
        })
        .collect();
    let foliated = (0..g.len())
        .map(|n| {
            let y = u.values[n];
            let q = target.project(&y);
            let w0: V4 = std::array::from_fn(|a| grads[a][0][n]);
            let pw = target.d_project(&y, &w0);
            let th = target.theta(&q, &pw);
            let xi = target.reeb(&q);
            let h: V4 = std::array::from_fn(|a| pw[a] - th * xi[a]);
            dot4(&h, &h).sqrt() * FRAC_1_SQRT_2
        })
        .fold(0.0, f64::max);
    let rho_sq = g.integrate_slice(&per_node.iter().map(|x| x.4).collect::<Vec<_>>());
    ExtrinsicState {
        rhs: per_node.iter().map(|x| x.0).collect(),
        dens: per_node.iter().map(|x| x.1).collect(),
        tau_hh: per_node.iter().map(|x| x.2).collect(),
        tau_hl: per_node.iter().map(|x| x.3).collect(),
        foliated,
        rho_sq,
    }
}

/// Right-hand side of the embedded flow at every node.
pub fn extrinsic_rhs(u: &EmbeddedMap, target: &ExtrinsicTarget, pi_term: PiTerm) -> Vec<V4> {
    extrinsic_state(u, target, pi_term).rhs
}

fn extrinsic_update(u: &EmbeddedMap, rhs: &[V4], target: &ExtrinsicTarget, dt: f64, step: usize, reproject: bool) -> Result<EmbeddedMap> {
    let mut values: Vec<V4> = u.values.iter().zip(rhs).map(|(y, r)| std::array::from_fn(|a| y[a] + dt * r[a])).collect();
    for (node, y) in values.iter().enumerate() {
        if !y.iter().all(|x| x.is_finite()) {
            return Err(Error::BlowUp { step, node });
        }
        let r = dot4(y, y).sqrt();
        if (r - target.radius).abs() >= target.tube_radius {
            return Err(Error::TubeEscape { step, node, radius: r });
        }
    }
    if reproject {
        values.iter_mut().for_each(|y| *y = target.project(y));
    }
    Ok(EmbeddedMap { grid: u.grid.clone(), values })
}

/// Forward Euler on the embedded system; no projection back onto the target.
pub fn step_extrinsic(u: &EmbeddedMap, target: &ExtrinsicTarget, dt: f64) -> Result<EmbeddedMap> {
    let rhs = extrinsic_rhs(u, target, PiTerm::Composition);
    extrinsic_update(u, &rhs, target, dt, 0, false)
}

// ---------------------------------------------------------------------------
// Driver

enum State {
    Intrinsic(MapField),
    Extrinsic(EmbeddedMap, ExtrinsicTarget),
}

struct Snapshot {
    row: TraceRow,
    energies: Energies,
    tau_hh_sup: f64,
    tau_hl_sup: f64,
}

impl FlowConfig {
    /// Resolved step size, plus a warning when it exceeds the stability bound
    /// and `allow_unstable` is set.
    pub fn time_step(&self) -> Result<(f64, Option<String>)> {
        let bound = self.grid()?.cfl_dt();
        let dt = self.dt.unwrap_or(0.5 * bound);
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if dt <= bound {
            return Ok((dt, None));
        }
        if !self.allow_unstable {
            return Err(Error::Config(format!("dt = {dt:e} exceeds the stability bound {bound:e}; set allow_unstable to override")));
        }
        Ok((dt, Some(format!("dt = {dt:e} exceeds the stability bound {bound:e}"))))
    }
}

pub fn run_flow(cfg: &FlowConfig) -> Result<FlowOutcome> {
    let grid = cfg.grid()?;
    let mut warnings = Vec::new();
    let mut state = match cfg.backend {
        Backend::Intrinsic => {
            if cfg.target.kind != ModelKind::HeisenbergNilmanifold || !grid.is_nil() {
                return Err(Error::Unsupported("the intrinsic backend runs nilmanifold → nilmanifold".into()));
            }
            let map: AnalyticMap = cfg.initial.parse()?;
            State::Intrinsic(MapField::from_analytic(&grid, &map)?)
        }
        Backend::Extrinsic => {
            if cfg.source.kind != ModelKind::RoundSphere3 {
                return Err(Error::Unsupported("the extrinsic backend runs sphere → sphere".into()));
            }
            let target = ExtrinsicTarget::sphere(&cfg.target)?;
            let u = extrinsic_initial(&grid, &target, &cfg.initial, cfg.seed)?;
            State::Extrinsic(u, target)
        }
    };
    let (dt, unstable) = cfg.time_step()?;
    warnings.extend(unstable);
    let every = cfg.every.max(1);

    let mut rows = Vec::new();
    let mut acc = 0.0;
    let mut e0 = None;
    let mut step = 0;
    let mut converged;
    let mut last;
    loop {
        let (snap, rhs) = match &state {
            State::Intrinsic(f) => {
                let d = intrinsic_state(f);
                (snapshot(&grid, &d.dens, &d.tau, d.foliated, None, step, dt), Rhs::Intrinsic(d.tau))
            }
            State::Extrinsic(u, target) => {
                let s = extrinsic_state(u, target, cfg.pi_term);
                let tau: Vec<V3> = s.tau_hh.iter().zip(&s.tau_hl).map(|(h, l)| [*l, *h, 0.0]).collect();
                (snapshot(&grid, &s.dens, &tau, s.foliated, Some(s.rho_sq), step, dt), Rhs::Extrinsic(s.rhs))
            }
        };
        let e_start = *e0.get_or_insert(snap.row.e_hh);
        let mut row = snap.row;
        let scale = if e_start.abs() > 0.0 { e_start.abs() } else { 1.0 };
        row.energy_identity_residual = (row.e_hh + acc - e_start).abs() / scale;
        converged = row.tau_h_sup < cfg.tau_tol;
        let record = step % every == 0 || converged || step == cfg.steps;
        last = (snap.energies, snap.tau_hh_sup, snap.tau_hl_sup);
        if record {
            rows.push(row.clone());
        }
        if converged || step == cfg.steps {
            break;
        }
        acc += dt * row.tau_hh_sq;
        step += 1;
        state = match (state, rhs) {
            (State::Intrinsic(f), Rhs::Intrinsic(tau)) => State::Intrinsic(intrinsic_update(&f, &tau, dt, step)?),
            (State::Extrinsic(u, target), Rhs::Extrinsic(r)) => {
                let next = extrinsic_update(&u, &r, &target, dt, step, cfg.reproject)?;
                State::Extrinsic(next, target)
            }
            _ => unreachable!("state and right-hand side come from the same backend"),
        };
    }
    let (energies, tau_hh_sup, tau_hl_sup) = last;
    let classification = if converged && tau_hh_sup < cfg.tau_tol && tau_hl_sup < cfg.tau_tol {
        Classification::SpecialHarmonic
    } else if tau_hh_sup < cfg.tau_tol {
        Classification::HarmonicHorizontalOnly
    } else {
        Classification::NotConverged
    };
    let trace = FlowTrace { rows };
    if let Some(first) = trace.rows.first() {
        let inc = trace.max_increase(|r| r.e_hh);
        if inc > cfg.mono_slack * first.e_hh.abs() {
            warnings.push(format!("E_HH increased by {inc:e} between recorded steps (slack {:e})", cfg.mono_slack * first.e_hh.abs()));
        }
    }
    let final_map = match state {
        State::Intrinsic(f) => FinalMap::Intrinsic(f),
        State::Extrinsic(u, _) => FinalMap::Extrinsic(u),
    };
    Ok(FlowOutcome {
        trace,
        summary: FlowSummary { converged, steps: step, final_energies: energies, classification },
        final_map,
        dt,
        warnings,
    })
}

enum Rhs {
    Intrinsic(Vec<V3>),
    Extrinsic(Vec<V4>),
}

fn snapshot(grid: &Grid, dens: &[EnergyBreakdown], tau: &[V3], foliated: f64, rho_sq: Option<f64>, step: usize, dt: f64) -> Snapshot {
    let energies = integrate_densities(grid, dens);
    let hh: Vec<f64> = tau.iter().map(|t| t[1] * t[1] + t[2] * t[2]).collect();
    let tau_hh_sup = hh.iter().fold(0.0f64, |m, v| m.max(v.sqrt()));
    let tau_hl_sup = tau.iter().fold(0.0f64, |m, t| m.max(t[0].abs()));
    let tau_h_sup = tau.iter().fold(0.0f64, |m, t| m.max((t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt()));
    let row = TraceRow {
        step,
        time: step as f64 * dt,
        e_hh: energies.e_hh,
        e_lh: energies.e_lh,
        e_hl: energies.e_hl,
        e_ll: energies.e_ll,
        k: energies.k,
        tau_hh_sup,
        tau_hl_sup,
        energy_identity_residual: 0.0,
        rho_sq,
        foliated_defect: foliated,
        tau_hh_sq: grid.integrate_slice(&hh),
        tau_h_sup,
    };
    Snapshot { row, energies, tau_hh_sup, tau_hl_sup }
}

/// `identity`, `tangent-perturbed:eps` (seeded by the config seed) or `constant:η,α,β`.
pub fn extrinsic_initial(grid: &Arc<Grid>, target: &ExtrinsicTarget, spec: &str, seed: u64) -> Result<EmbeddedMap> {
    let bad = || Error::UnknownMap(spec.to_string());
    let (head, rest) = spec.split_once(':').map(|(h, r)| (h, Some(r))).unwrap_or((spec, None));
    match (head, rest) {
        ("identity", None) => Ok(EmbeddedMap::identity(grid, target)),
        ("tangent-perturbed", Some(r)) => {
            let eps: f64 = r.trim().parse().map_err(|_| bad())?;
            Ok(EmbeddedMap::tangent_perturbed(grid, target, eps, seed))
        }
        ("constant", Some(r)) => {
            let v: Vec<f64> = r.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
            if v.len() != 3 {
                return Err(bad());
            }
            let y = target.embed(&[v[0], v[1], v[2]]);
            Ok(EmbeddedMap::from_fn(grid, |_| y))
        }
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_identities() {
        let t = ExtrinsicTarget::sphere(&Model::sphere(2.0).unwrap()).unwrap();
        let p = [0.4, 1.0, -2.0];
        let y = t.embed(&p);
        let py = t.project(&y);
        for a in 0..4 {
            assert!((py[a] - y[a]).abs() < 1e-15);
        }
        assert!(t.rho(&y).iter().all(|v| v.abs() < 1e-15));
        // ξ̃ is a unit tangent vector
        let xi = t.reeb(&y);
        assert!((dot4(&xi, &xi) - 1.0).abs() < 1e-14 && dot4(&xi, &y).abs() < 1e-14);
        // closed-form second derivative matches the contracted tensor
        let yo = [1.1, -0.3, 0.9, 1.4];
        let w = [0.2, 0.5, -0.7, 0.1];
        let pt = t.pi_tensor(&yo);
        let d2 = t.d2_project(&yo, &w);
        for a in 0..4 {
            let s: f64 = (0..4).flat_map(|b| (0..4).map(move |c| (b, c))).map(|(b, c)| pt[a][b][c] * w[b] * w[c]).sum();
            assert!((s - d2[a]).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_wrong_scale() {
        assert!(ExtrinsicTarget::sphere(&Model::sphere(1.0).unwrap()).is_err());
        assert!(ExtrinsicTarget::sphere(&Model::heisenberg()).is_err());
    }
}
