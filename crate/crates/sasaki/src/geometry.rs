//! Closed-form pseudo-Hermitian structures on the shipped Sasakian models.
//!
//! Everything is written in the frame `{ξ, e_1, e_2 = J e_1}` (index 0, 1, 2).
//! Frame vectors are stored by their coordinate components, coframe rows as
//! covectors. Connection coefficients are `gamma[a][b][d]`, the `e_d`
//! component of `∇_{e_a} e_b`, and are exact; curvature is obtained by
//! differentiating them with [`Jet`]s rather than by finite differences.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, Real};
use crate::small::{inv3, matmul, matvec, transpose, M3, V3};

pub type Gamma<S> = [[[S; 3]; 3]; 3];
pub type Curv = [[[[f64; 3]; 3]; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    HeisenbergNilmanifold,
    RoundSphere3,
    SpaceFormChart,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::HeisenbergNilmanifold => "heisenberg-nilmanifold",
            ModelKind::RoundSphere3 => "round-sphere-3",
            ModelKind::SpaceFormChart => "space-form-chart",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "heisenberg-nilmanifold" | "nilmanifold" | "heisenberg" => Ok(ModelKind::HeisenbergNilmanifold),
            "round-sphere-3" | "sphere" => Ok(ModelKind::RoundSphere3),
            "space-form-chart" | "space-form" => Ok(ModelKind::SpaceFormChart),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identifications {
    /// Quotient by the integer Heisenberg lattice acting on the right.
    HeisenbergLattice,
    /// Angle chart (η, α, β) of S³: α, β are 2π-periodic and the η-faces are
    /// glued by half turns.
    HopfAngles,
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModelParams {
    pub lambda: Option<f64>,
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Model {
    pub kind: ModelKind,
    pub lambda: f64,
    pub scale: f64,
    /// Coordinate box per axis; for the sphere the η range is open.
    pub domain: [[f64; 2]; 3],
    pub identifications: Identifications,
    pub m: usize,
}

pub fn build_model(kind: &str, params: &ModelParams) -> Result<Model> {
    match kind.parse::<ModelKind>()? {
        ModelKind::HeisenbergNilmanifold => Ok(Model::heisenberg()),
        ModelKind::RoundSphere3 => Model::sphere(params.scale.unwrap_or(1.0)),
        ModelKind::SpaceFormChart => Model::space_form(params.lambda.unwrap_or(0.0)),
    }
}

impl Model {
    pub fn heisenberg() -> Model {
        Model {
            kind: ModelKind::HeisenbergNilmanifold,
            lambda: 0.0,
            scale: 1.0,
            domain: [[0.0, 1.0]; 3],
            identifications: Identifications::HeisenbergLattice,
            m: 1,
        }
    }

    pub fn sphere(scale: f64) -> Result<Model> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParam(format!("sphere scale must be positive, got {scale}")));
        }
        Ok(Model {
            kind: ModelKind::RoundSphere3,
            lambda: 0.0,
            scale,
            domain: [[0.0, PI / 2.0], [0.0, 2.0 * PI], [0.0, 2.0 * PI]],
            identifications: Identifications::HopfAngles,
            m: 1,
        })
    }

    pub fn space_form(lambda: f64) -> Result<Model> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParam(format!("λ must be finite, got {lambda}")));
        }
        // keep φ = 1 + λ(x²+y²)/4 well away from zero
        let b = 0.8 * if lambda.abs() > 1.0 { 1.0 / lambda.abs().sqrt() } else { 1.0 };
        Ok(Model {
            kind: ModelKind::SpaceFormChart,
            lambda,
            scale: 1.0,
            domain: [[-b, b], [-b, b], [-1.0, 1.0]],
            identifications: Identifications::None,
            m: 1,
        })
    }

    pub fn name(&self) -> String {
        match self.kind {
            ModelKind::HeisenbergNilmanifold => self.kind.name().to_string(),
            ModelKind::RoundSphere3 => format!("{}(scale={})", self.kind, self.scale),
            ModelKind::SpaceFormChart => format!("{}(lambda={})", self.kind, self.lambda),
        }
    }

    pub fn contains(&self, p: &V3) -> bool {
        if !p.iter().all(|x| x.is_finite()) {
            return false;
        }
        match self.kind {
            ModelKind::HeisenbergNilmanifold => true,
            ModelKind::RoundSphere3 => p[0] > 0.0 && p[0] < PI / 2.0,
            ModelKind::SpaceFormChart => (0..3).all(|i| p[i] >= self.domain[i][0] && p[i] <= self.domain[i][1]),
        }
    }

    fn check(&self, p: &V3) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { model: self.name(), point: *p })
        }
    }

    /// Uniform point in a sampling box that stays clear of chart degeneracies.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> V3 {
        match self.kind {
            ModelKind::HeisenbergNilmanifold => [rng.gen(), rng.gen(), rng.gen()],
            ModelKind::RoundSphere3 => [
                rng.gen_range(0.15..PI / 2.0 - 0.15),
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.0..2.0 * PI),
            ],
            ModelKind::SpaceFormChart => {
                let d = &self.domain;
                [
                    0.95 * rng.gen_range(d[0][0]..d[0][1]),
                    0.95 * rng.gen_range(d[1][0]..d[1][1]),
                    rng.gen_range(d[2][0]..d[2][1]),
                ]
            }
        }
    }

    /// Rows: coordinate components of ξ, e_1, e_2.
    pub fn frame<S: Real>(&self, p: &[S; 3]) -> [[S; 3]; 3] {
        let (z, one) = (S::cst(0.0), S::cst(1.0));
        let [x, y, _] = *p;
        match self.kind {
            ModelKind::HeisenbergNilmanifold => [[z, z, one], [one, z, y.scale(0.5)], [z, one, x.scale(-0.5)]],
            ModelKind::SpaceFormChart => {
                let phi = self.phi(p);
                [[z, z, one], [phi, z, y.scale(0.5)], [z, phi, x.scale(-0.5)]]
            }
            ModelKind::RoundSphere3 => {
                let s = self.scale;
                let xi = S::cst(2.0 / (s * s));
                [[z, xi, xi], [S::cst(1.0 / s), z, z], [z, -x.tan().scale(1.0 / s), x.cot().scale(1.0 / s)]]
            }
        }
    }

    /// Rows: covector components of θ, θ^1, θ^2 (dual to [`Model::frame`]).
    pub fn coframe<S: Real>(&self, p: &[S; 3]) -> [[S; 3]; 3] {
        let (z, one) = (S::cst(0.0), S::cst(1.0));
        let [x, y, _] = *p;
        match self.kind {
            ModelKind::HeisenbergNilmanifold => [[y.scale(-0.5), x.scale(0.5), one], [one, z, z], [z, one, z]],
            ModelKind::SpaceFormChart => {
                let r = one / self.phi(p);
                [[y.scale(-0.5) * r, x.scale(0.5) * r, one], [r, z, z], [z, r, z]]
            }
            ModelKind::RoundSphere3 => {
                let s = self.scale;
                let (sn, cs) = (x.sin(), x.cos());
                let sc = (sn * cs).scale(s);
                [[z, (cs * cs).scale(0.5 * s * s), (sn * sn).scale(0.5 * s * s)], [S::cst(s), z, z], [z, -sc, sc]]
            }
        }
    }

    fn phi<S: Real>(&self, p: &[S; 3]) -> S {
        S::cst(1.0) + (p[0] * p[0] + p[1] * p[1]).scale(0.25 * self.lambda)
    }

    /// Connection 1-form ω on (ξ, e_1, e_2): `∇_X e_1 = ω(X) e_2`.
    pub fn omega<S: Real>(&self, p: &[S; 3]) -> [S; 3] {
        let z = S::cst(0.0);
        match self.kind {
            ModelKind::HeisenbergNilmanifold => [z, z, z],
            ModelKind::SpaceFormChart => [z, p[1].scale(0.5 * self.lambda), p[0].scale(-0.5 * self.lambda)],
            ModelKind::RoundSphere3 => [z, z, (p[0].cot() - p[0].tan()).scale(1.0 / self.scale)],
        }
    }

    pub fn gamma<S: Real>(&self, p: &[S; 3]) -> Gamma<S> {
        let z = S::cst(0.0);
        let w = self.omega(p);
        let mut g = [[[z; 3]; 3]; 3];
        for a in 0..3 {
            g[a][1][2] = w[a];
            g[a][2][1] = -w[a];
        }
        g
    }

    /// Density of θ∧dθ against dx¹dx²dx³.
    pub fn volume_density<S: Real>(&self, p: &[S; 3]) -> S {
        match self.kind {
            ModelKind::HeisenbergNilmanifold => S::cst(1.0),
            ModelKind::SpaceFormChart => {
                let r = S::cst(1.0) / self.phi(p);
                r * r
            }
            ModelKind::RoundSphere3 => (p[0].scale(2.0)).sin().scale(0.25 * self.scale.powi(4)),
        }
    }

    /// `c[a][b][d]`: `e_d` component of `[e_a, e_b]`, exact via jets.
    pub fn structure_constants(&self, p: &V3) -> [[[f64; 3]; 3]; 3] {
        let jp = Jet::point(*p);
        let e = self.frame(&jp);
        let w = self.coframe(p);
        let mut c = [[[0.0; 3]; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let br: V3 = std::array::from_fn(|i| (e[b][i].along(&e[a]) - e[a][i].along(&e[b])).value());
                c[a][b] = matvec(&w, &br);
            }
        }
        c
    }

    pub fn frame_at(&self, p: &V3) -> Result<FrameData> {
        self.check(p)?;
        let f = self.frame(p);
        Ok(FrameData {
            point: *p,
            e: [f[1], f[2]],
            xi: f[0],
            theta: self.coframe(p)[0],
            j_matrix: [[0.0, -1.0], [1.0, 0.0]],
            gamma: self.gamma(p),
            a: [[0.0; 2]; 2],
            volume_density: self.volume_density(p),
        })
    }

    /// Full curvature tensor in the frame, `r[x][y][z][w] = ⟨R(e_z,e_w)e_y, e_x⟩`.
    pub fn curvature_tensor(&self, p: &V3) -> Curv {
        let jp = Jet::point(*p);
        let e = self.frame(&jp);
        let gj = self.gamma(&jp);
        let g = self.gamma(p);
        let c = self.structure_constants(p);
        // rop[a][b][cc][d]: e_d component of R(e_a, e_b) e_cc
        let mut rop = [[[[0.0; 3]; 3]; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for cc in 0..3 {
                    for d in 0..3 {
                        let mut v = gj[b][cc][d].along(&e[a]).value() - gj[a][cc][d].along(&e[b]).value();
                        for k in 0..3 {
                            v += g[b][cc][k] * g[a][k][d] - g[a][cc][k] * g[b][k][d] - c[a][b][k] * g[k][cc][d];
                        }
                        rop[a][b][cc][d] = v;
                    }
                }
            }
        }
        let mut r = [[[[0.0; 3]; 3]; 3]; 3];
        for x in 0..3 {
            for y in 0..3 {
                for z in 0..3 {
                    for w in 0..3 {
                        r[x][y][z][w] = rop[z][w][y][x];
                    }
                }
            }
        }
        r
    }

    pub fn curvature_at(&self, p: &V3) -> Result<CurvatureOperator> {
        self.check(p)?;
        let r = self.curvature_tensor(p);
        let q11 = hermitian_form(&r, 0.0);
        Ok(CurvatureOperator { r, q: vec![vec![r[1][2][1][2]]], q11: vec![vec![[q11.re, q11.im]]] })
    }

    pub fn sectional(&self, p: &V3, x: &V3, y: &V3) -> Result<f64> {
        self.check(p)?;
        horizontal(x)?;
        horizontal(y)?;
        let r = self.curvature_tensor(p);
        sectional_from(&r, x, y)
    }

    pub fn hol_sectional(&self, p: &V3, x: &V3) -> Result<f64> {
        self.check(p)?;
        horizontal(x)?;
        let jx = [0.0, -x[2], x[1]];
        sectional_from(&self.curvature_tensor(p), x, &jx)
    }

    pub fn negativity_class(&self, p: &V3) -> Result<NegativityClass> {
        self.negativity_class_in_frame(p, 0.0)
    }

    /// Classification with the unitary frame rotated by `e_1 → cos t e_1 + sin t Je_1`.
    pub fn negativity_class_in_frame(&self, p: &V3, t: f64) -> Result<NegativityClass> {
        self.check(p)?;
        let q = hermitian_form(&self.curvature_tensor(p), t);
        Ok(classify(&[q.re]))
    }

    pub fn order_k_negativity_sample(&self, p: &V3, k: usize, trials: usize, seed: u64) -> Result<OrderKReport> {
        if k == 0 {
            return Err(Error::InvalidOrder(k));
        }
        if trials == 0 {
            return Err(Error::InvalidParam("trials must be ≥ 1".into()));
        }
        self.check(p)?;
        let r = self.curvature_tensor(p);
        let m = self.m;
        let rc = complex_components(&r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut admissible = 0;
        let mut counterexample = None;
        for _ in 0..trials {
            let mut draw = || -> Vec<Vec<Complex64>> {
                (0..m)
                    .map(|_| (0..k).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
                    .collect()
            };
            let a = draw();
            let b = draw();
            if complex_rank(&block(&a, &b), 1e-9) != 2 * k {
                continue;
            }
            admissible += 1;
            let mut worst: f64 = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let xi = |al: usize, be: usize| a[al][i] * b[be][j].conj() - a[al][j] * b[be][i].conj();
                    let mut s = Complex64::new(0.0, 0.0);
                    for al in 0..m {
                        for be in 0..m {
                            for ga in 0..m {
                                for de in 0..m {
                                    s += rc(al, be, ga, de) * xi(al, be) * xi(de, ga).conj();
                                }
                            }
                        }
                    }
                    worst = worst.max(s.norm());
                }
            }
            if worst <= 1e-10 && counterexample.is_none() {
                counterexample = Some(Counterexample { a: to_pairs(&a), b: to_pairs(&b) });
            }
        }
        Ok(OrderKReport {
            k,
            trials,
            admissible_trials: admissible,
            semi_negative: self.negativity_class(p)? != NegativityClass::Indefinite,
            outcome: if counterexample.is_some() { "counterexample" } else { "no-counterexample" }.into(),
            counterexample,
            note: "random sampling can only falsify negativity of order k, never certify it".into(),
        })
    }

    pub fn connection_offset(&self, p: &V3) -> Result<ConnectionOffset> {
        self.check(p)?;
        let mut s = [[[0.0; 3]; 3]; 3];
        for (a, row) in s.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = offset_apply(&unit(a), &unit(b));
            }
        }
        Ok(ConnectionOffset { s })
    }

    /// Right action of the lattice element `g` on a chart point.
    pub fn lattice_translate(p: &V3, g: &V3) -> V3 {
        heis_mul(p, g)
    }
}

/// Heisenberg group law in the chart: `(p·q)_t = p_t + q_t + ½(p_x q_y − p_y q_x)`.
pub fn heis_mul<S: Real>(p: &[S; 3], q: &[S; 3]) -> [S; 3] {
    [p[0] + q[0], p[1] + q[1], p[2] + q[2] + (p[0] * q[1] - p[1] * q[0]).scale(0.5)]
}

fn unit(a: usize) -> V3 {
    let mut v = [0.0; 3];
    v[a] = 1.0;
    v
}

fn horizontal(x: &V3) -> Result<()> {
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if x[0].abs() > 1e-12 * n.max(1.0) {
        Err(Error::NotHorizontal(x[0]))
    } else {
        Ok(())
    }
}

fn quad(r: &Curv, x: &V3, y: &V3, z: &V3, w: &V3) -> f64 {
    let mut s = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for d in 0..3 {
                    s += r[a][b][c][d] * x[a] * y[b] * z[c] * w[d];
                }
            }
        }
    }
    s
}

fn sectional_from(r: &Curv, x: &V3, y: &V3) -> Result<f64> {
    let xx = x[1] * x[1] + x[2] * x[2];
    let yy = y[1] * y[1] + y[2] * y[2];
    let xy = x[1] * y[1] + x[2] * y[2];
    let area = xx * yy - xy * xy;
    if !(area > 1e-14 * (xx * yy).max(f64::MIN_POSITIVE)) {
        return Err(Error::DegeneratePlane(area));
    }
    Ok(quad(r, x, y, x, y) / area)
}

type CV3 = [Complex64; 3];

pub fn complex_quad(r: &Curv, x: &CV3, y: &CV3, z: &CV3, w: &CV3) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for d in 0..3 {
                    if r[a][b][c][d] != 0.0 {
                        s += r[a][b][c][d] * x[a] * y[b] * z[c] * w[d];
                    }
                }
            }
        }
    }
    s
}

/// `η_1 = (e_1 − iJe_1)/√2` for the frame rotated by `t`.
pub fn eta(t: f64) -> (CV3, CV3) {
    let (s, c) = t.sin_cos();
    let e1 = [0.0, c, s];
    let je1 = [0.0, -s, c];
    let h = FRAC_1_SQRT_2;
    let eta: CV3 = std::array::from_fn(|i| Complex64::new(h * e1[i], -h * je1[i]));
    let bar: CV3 = std::array::from_fn(|i| eta[i].conj());
    (eta, bar)
}

/// `⟨Q(η_1∧η̄_1), conj(η_1∧η̄_1)⟩ = R(η_1, η̄_1, η̄_1, η_1)`.
fn hermitian_form(r: &Curv, t: f64) -> Complex64 {
    let (e, eb) = eta(t);
    complex_quad(r, &e, &eb, &eb, &e)
}

/// `R_{αβ̄γδ̄} = R(η_α, η̄_β, η_γ, η̄_δ)`; m = 1.
fn complex_components(r: &Curv) -> impl Fn(usize, usize, usize, usize) -> Complex64 {
    let (e, eb) = eta(0.0);
    let v = complex_quad(r, &e, &eb, &e, &eb);
    move |_, _, _, _| v
}

fn classify(eigs: &[f64]) -> NegativityClass {
    const TOL: f64 = 1e-10;
    if eigs.iter().all(|&l| l < -TOL) {
        NegativityClass::StronglyNegative
    } else if eigs.iter().all(|&l| l <= TOL) {
        NegativityClass::StronglySeminegative
    } else {
        NegativityClass::Indefinite
    }
}

fn block(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let m = a.len();
    let k = a[0].len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); 2 * k]; 2 * m];
    for i in 0..m {
        for j in 0..k {
            out[i][j] = a[i][j];
            out[i][k + j] = b[i][j];
            out[m + i][j] = b[i][j].conj();
            out[m + i][k + j] = a[i][j].conj();
        }
    }
    out
}

fn complex_rank(m: &[Vec<Complex64>], tol: f64) -> usize {
    let mut a: Vec<Vec<Complex64>> = m.to_vec();
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let scale = a.iter().flatten().fold(0.0f64, |s, z| s.max(z.norm())).max(1.0);
    let mut rank = 0;
    for c in 0..cols {
        let piv = (rank..rows).max_by(|&i, &j| a[i][c].norm().total_cmp(&a[j][c].norm()));
        let Some(piv) = piv else { break };
        if a[piv][c].norm() <= tol * scale {
            continue;
        }
        a.swap(rank, piv);
        for i in rank + 1..rows {
            let f = a[i][c] / a[rank][c];
            for j in c..cols {
                let v = a[rank][j];
                a[i][j] -= f * v;
            }
        }
        rank += 1;
    }
    rank
}

fn to_pairs(m: &[Vec<Complex64>]) -> Vec<Vec<[f64; 2]>> {
    m.iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

/// `S(Z_1, Z_2) = −½dθ(Z_2,Z_1)ξ + ½(θ(Z_2)JZ_1 + θ(Z_1)JZ_2)` in frame components.
pub fn offset_apply(z1: &V3, z2: &V3) -> V3 {
    let dtheta21 = z2[1] * z1[2] - z2[2] * z1[1];
    let j = |v: &V3| [0.0, -v[2], v[1]];
    let (j1, j2) = (j(z1), j(z2));
    [-0.5 * dtheta21, 0.5 * (z2[0] * j1[1] + z1[0] * j2[1]), 0.5 * (z2[0] * j1[2] + z1[0] * j2[2])]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameData {
    pub point: V3,
    pub e: [V3; 2],
    pub xi: V3,
    pub theta: V3,
    /// Columns are the images `J e_1`, `J e_2` in the horizontal frame.
    pub j_matrix: [[f64; 2]; 2],
    pub gamma: Gamma<f64>,
    /// Pseudo-Hermitian torsion; zero on every shipped model.
    pub a: [[f64; 2]; 2],
    pub volume_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureOperator {
    pub r: Curv,
    /// `⟨Q(e_1∧e_2), e_1∧e_2⟩`.
    pub q: Vec<Vec<f64>>,
    /// Hermitian form on `η_1∧η̄_1`, stored as (re, im).
    pub q11: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativityClass {
    StronglyNegative,
    StronglySeminegative,
    Indefinite,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    pub a: Vec<Vec<[f64; 2]>>,
    pub b: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderKReport {
    pub k: usize,
    pub trials: usize,
    /// Draws meeting the rank condition; zero whenever k exceeds m.
    pub admissible_trials: usize,
    pub semi_negative: bool,
    pub outcome: String,
    pub counterexample: Option<Counterexample>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConnectionOffset {
    /// `s[a][b]` = frame components of `S(e_a, e_b)`.
    pub s: [[V3; 3]; 3],
}

// ---------------------------------------------------------------------------
// Finite-difference audit of the connection axioms.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwReport {
    pub model: String,
    pub samples: usize,
    pub h: f64,
    pub metric: f64,
    pub complex_structure: f64,
    pub torsion_purity: f64,
    pub reeb_parallel: f64,
    pub pseudohermitian_torsion: f64,
    pub reeb_axioms: f64,
    pub catastrophic_cancellation: bool,
}

impl TwReport {
    pub fn residuals(&self) -> [(&'static str, f64); 6] {
        [
            ("metric", self.metric),
            ("complex-structure", self.complex_structure),
            ("torsion-purity", self.torsion_purity),
            ("reeb-parallel", self.reeb_parallel),
            ("pseudohermitian-torsion", self.pseudohermitian_torsion),
            ("reeb-axioms", self.reeb_axioms),
        ]
    }

    pub fn max(&self) -> f64 {
        self.residuals().iter().fold(0.0, |m, r| if r.1.is_nan() { f64::INFINITY } else { m.max(r.1) })
    }
}

fn shifted(p: &V3, v: &V3, t: f64) -> V3 {
    [p[0] + t * v[0], p[1] + t * v[1], p[2] + t * v[2]]
}

fn ddir<const N: usize>(f: impl Fn(&V3) -> [f64; N], p: &V3, v: &V3, h: f64) -> [f64; N] {
    let a = f(&shifted(p, v, h));
    let b = f(&shifted(p, v, -h));
    std::array::from_fn(|i| (a[i] - b[i]) / (2.0 * h))
}

fn dtheta_fd(model: &Model, q: &V3, h: f64) -> M3 {
    let th = |x: &V3| model.coframe(x)[0];
    let d: [V3; 3] = std::array::from_fn(|i| ddir(th, q, &unit(i), h));
    std::array::from_fn(|i| std::array::from_fn(|j| d[i][j] - d[j][i]))
}

/// Coordinate matrix of J built from the coframe (`J e_1 = e_2`, `J e_2 = −e_1`, `Jξ = 0`).
fn j_coord(model: &Model, q: &V3) -> M3 {
    let e = model.frame(q);
    let w = model.coframe(q);
    let mut j = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            j[i][k] = e[2][i] * w[1][k] - e[1][i] * w[2][k];
        }
    }
    j
}

/// J recovered from dθ alone: `g(JX, Y) = dθ(X, Y)` with `g = Σ θ^A⊗θ^A`.
fn j_from_dtheta(model: &Model, q: &V3, h: f64) -> M3 {
    let w = model.coframe(q);
    let g = matmul(&transpose(&w), &w);
    matmul(&inv3(&g), &transpose(&dtheta_fd(model, q, h)))
}

pub fn check_tanaka_webster(model: &Model, samples: usize, h: f64, seed: u64) -> TwReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = TwReport {
        model: model.name(),
        samples,
        h,
        metric: 0.0,
        complex_structure: 0.0,
        torsion_purity: 0.0,
        reeb_parallel: 0.0,
        pseudohermitian_torsion: 0.0,
        reeb_axioms: 0.0,
        catastrophic_cancellation: !(h >= 1e-6),
    };
    let upd = |slot: &mut f64, v: f64| {
        *slot = if v.is_nan() || slot.is_nan() { f64::NAN } else { slot.max(v.abs()) };
    };
    for _ in 0..samples {
        let p = model.sample_point(&mut rng);
        let e = model.frame(&p);
        let w = model.coframe(&p);
        let g = model.gamma(&p);

        // metric: e_a(g(e_b,e_c)) − g(∇_a e_b, e_c) − g(e_b, ∇_a e_c), g = θ⊗θ + dθ(·, J·)
        let gram = |q: &V3| -> [f64; 9] {
            let th = model.coframe(q)[0];
            let dt = dtheta_fd(model, q, h);
            let j = j_coord(model, q);
            let gm = matmul(&dt, &j);
            let f = model.frame(q);
            std::array::from_fn(|k| {
                let (b, c) = (k / 3, k % 3);
                let mut s = 0.0;
                for i in 0..3 {
                    for l in 0..3 {
                        s += (th[i] * th[l] + gm[i][l]) * f[b][i] * f[c][l];
                    }
                }
                s
            })
        };
        let g0 = gram(&p);
        for k in 0..9 {
            let (b, c) = (k / 3, k % 3);
            upd(&mut rep.metric, g0[k] - if b == c { 1.0 } else { 0.0 });
        }
        for a in 0..3 {
            let dg = ddir(gram, &p, &e[a], h);
            for k in 0..9 {
                let (b, c) = (k / 3, k % 3);
                let mut v = dg[k];
                for d in 0..3 {
                    v -= g[a][b][d] * g0[d * 3 + c] + g[a][c][d] * g0[b * 3 + d];
                }
                upd(&mut rep.metric, v);
            }
        }

        // ∇J = 0 with J taken from dθ
        let jf = |q: &V3, b: usize| -> V3 {
            let j = j_from_dtheta(model, q, h);
            matvec(&model.coframe(q), &matvec(&j, &model.frame(q)[b]))
        };
        let jp = matmul(&w, &matmul(&j_from_dtheta(model, &p, h), &transpose(&e)));
        for a in 0..3 {
            for b in 0..3 {
                let dv = ddir(|q| jf(q, b), &p, &e[a], h);
                let v0 = jf(&p, b);
                for d in 0..3 {
                    let mut r = dv[d];
                    for c in 0..3 {
                        r += g[a][c][d] * v0[c] - jp[d][c] * g[a][b][c];
                    }
                    upd(&mut rep.complex_structure, r);
                }
            }
        }

        // torsion, with brackets from Cartan's formula θ^d([X,Y]) = −dθ^d(X,Y)
        let dt = dtheta_fd(model, &p, h);
        let dco: [M3; 3] = std::array::from_fn(|d| {
            let row = |x: &V3| model.coframe(x)[d];
            let g1: [V3; 3] = std::array::from_fn(|i| ddir(row, &p, &unit(i), h));
            std::array::from_fn(|i| std::array::from_fn(|j| g1[i][j] - g1[j][i]))
        });
        for a in 0..3 {
            for b in (a + 1)..3 {
                let brf: V3 = std::array::from_fn(|d| {
                    -(0..3).map(|i| (0..3).map(|j| dco[d][i][j] * e[a][i] * e[b][j]).sum::<f64>()).sum::<f64>()
                });
                let t: V3 = std::array::from_fn(|d| g[a][b][d] - g[b][a][d] - brf[d]);
                if a == 0 {
                    for v in t {
                        upd(&mut rep.pseudohermitian_torsion, v);
                    }
                } else {
                    let dth = (0..3).map(|i| (0..3).map(|j| dt[i][j] * e[1][i] * e[2][j]).sum::<f64>()).sum::<f64>();
                    upd(&mut rep.torsion_purity, t[0] - dth);
                    upd(&mut rep.torsion_purity, t[1]);
                    upd(&mut rep.torsion_purity, t[2]);
                }
            }
        }

        // ∇ξ = 0 with ξ recovered as the normalized kernel of dθ
        let xi_f = |q: &V3| -> V3 {
            let d = dtheta_fd(model, q, h);
            let v = [d[1][2], d[2][0], d[0][1]];
            let th = model.coframe(q)[0];
            let n = th[0] * v[0] + th[1] * v[1] + th[2] * v[2];
            matvec(&model.coframe(q), &[v[0] / n, v[1] / n, v[2] / n])
        };
        let u0 = xi_f(&p);
        for a in 0..3 {
            let du = ddir(xi_f, &p, &e[a], h);
            for d in 0..3 {
                let r = du[d] + (0..3).map(|c| g[a][c][d] * u0[c]).sum::<f64>();
                upd(&mut rep.reeb_parallel, r);
            }
        }
        upd(&mut rep.reeb_parallel, u0[0] - 1.0);

        let th = w[0];
        upd(&mut rep.reeb_axioms, th[0] * e[0][0] + th[1] * e[0][1] + th[2] * e[0][2] - 1.0);
        for j in 0..3 {
            let v: f64 = (0..3).map(|i| e[0][i] * dt[i][j]).sum();
            upd(&mut rep.reeb_axioms, v);
        }
    }
    if !rep.residuals().iter().all(|r| r.1.is_finite()) {
        rep.catastrophic_cancellation = true;
    }
    rep
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwConvergence {
    pub coarse: TwReport,
    pub fine: TwReport,
    /// Per-residual ratio coarse/fine; `None` where both sit below the noise floor.
    pub ratios: Vec<(String, Option<f64>)>,
    pub ok: bool,
}

/// Residuals this small are dominated by rounding in the nested differences.
pub const TW_NOISE_FLOOR: f64 = 1e-9;

/// Runs the audit at `h` and `h/2` and checks that resolved residuals quarter.
pub fn tanaka_webster_convergence(model: &Model, samples: usize, h: f64, seed: u64) -> TwConvergence {
    let coarse = check_tanaka_webster(model, samples, h, seed);
    let fine = check_tanaka_webster(model, samples, h / 2.0, seed);
    let mut ok = true;
    let ratios = coarse
        .residuals()
        .iter()
        .zip(fine.residuals().iter())
        .map(|(c, f)| {
            let r = if c.1 > TW_NOISE_FLOOR * 10.0 { Some(c.1 / f.1) } else { None };
            if let Some(r) = r {
                ok &= (3.0..=5.5).contains(&r);
            }
            (c.0.to_string(), r)
        })
        .collect();
    TwConvergence { coarse, fine, ratios, ok }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> Vec<Model> {
        vec![
            Model::heisenberg(),
            Model::sphere(1.0).unwrap(),
            Model::sphere(2.0).unwrap(),
            Model::space_form(-1.0).unwrap(),
            Model::space_form(0.7).unwrap(),
        ]
    }

    #[test]
    fn coframe_is_dual_and_reeb_axioms_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in models() {
            for _ in 0..20 {
                let p = m.sample_point(&mut rng);
                let e = m.frame(&p);
                let w = m.coframe(&p);
                for a in 0..3 {
                    for b in 0..3 {
                        let v: f64 = (0..3).map(|i| w[a][i] * e[b][i]).sum();
                        assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-13, "{}", m.name());
                    }
                }
            }
        }
    }

    #[test]
    fn structure_constants_match_connection() {
        // torsion-free on H up to dθ·ξ, and zero pseudo-Hermitian torsion
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in models() {
            for _ in 0..20 {
                let p = m.sample_point(&mut rng);
                let c = m.structure_constants(&p);
                let g = m.gamma(&p);
                for a in 0..3 {
                    for b in 0..3 {
                        for d in 0..3 {
                            let mut t = g[a][b][d] - g[b][a][d] - c[a][b][d];
                            if d == 0 && a == 1 && b == 2 {
                                t -= 1.0;
                            }
                            if d == 0 && a == 2 && b == 1 {
                                t += 1.0;
                            }
                            assert!(t.abs() < 1e-12, "{} T^{d}_{a}{b} = {t}", m.name());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn curvature_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = Model::heisenberg().sample_point(&mut rng);
            let r = Model::heisenberg().curvature_tensor(&p);
            assert!(r.iter().flatten().flatten().flatten().all(|v| v.abs() < 1e-12));
            for lam in [-1.0, 0.0, 1.0, 2.5] {
                let m = Model::space_form(lam).unwrap();
                let p = m.sample_point(&mut rng);
                let k = m.hol_sectional(&p, &[0.0, 1.0, 0.0]).unwrap();
                assert!((k - lam).abs() < 1e-10, "λ={lam}: {k}");
            }
            for s in [1.0, 2.0] {
                let m = Model::sphere(s).unwrap();
                let p = m.sample_point(&mut rng);
                let k = m.hol_sectional(&p, &[0.0, 0.3, -0.4]).unwrap();
                assert!((k - 4.0 / (s * s)).abs() < 1e-9, "scale {s}: {k}");
            }
        }
    }

    #[test]
    fn curvature_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in models() {
            let p = m.sample_point(&mut rng);
            let r = m.curvature_tensor(&p);
            let j = |a: usize| -> (usize, f64) {
                match a {
                    1 => (2, 1.0),
                    2 => (1, -1.0),
                    _ => (0, 0.0),
                }
            };
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        for d in 0..3 {
                            let v = r[a][b][c][d];
                            assert!((v + r[b][a][c][d]).abs() < 1e-10);
                            assert!((v + r[a][b][d][c]).abs() < 1e-10);
                            assert!((v - r[c][d][a][b]).abs() < 1e-10);
                            if a == 0 || b == 0 || c == 0 || d == 0 {
                                assert!(v.abs() < 1e-10);
                            }
                            let ((ja, sa), (jb, sb)) = (j(a), j(b));
                            let ((jc, sc), (jd, sd)) = (j(c), j(d));
                            let lhs = sa * sb * r[ja][jb][c][d];
                            let rhs = sc * sd * r[a][b][jc][jd];
                            assert!((lhs - rhs).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn offset_matches_koszul() {
        // ∇^θ_{e_a} e_b = ∇_{e_a} e_b + S(e_b, e_a)
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in models() {
            let p = m.sample_point(&mut rng);
            let c = m.structure_constants(&p);
            let g = m.gamma(&p);
            let s = m.connection_offset(&p).unwrap().s;
            for a in 0..3 {
                for b in 0..3 {
                    for d in 0..3 {
                        let koszul = 0.5 * (c[a][b][d] - c[b][d][a] + c[d][a][b]);
                        let ours = g[a][b][d] + s[b][a][d];
                        assert!((koszul - ours).abs() < 1e-12, "{} ({a},{b},{d})", m.name());
                    }
                }
            }
        }
    }

    #[test]
    fn offset_examples() {
        let s = Model::heisenberg().connection_offset(&[0.1, 0.2, 0.3]).unwrap().s;
        assert_eq!(s[1][2], [0.5, 0.0, 0.0]);
        assert_eq!(s[0][0], [0.0, 0.0, 0.0]);
        assert_eq!(s[1][0], [0.0, 0.0, 0.5]);
    }

    #[test]
    fn lattice_translation_pushes_frames() {
        let m = Model::heisenberg();
        let p = [0.3, -0.2, 0.7];
        let gmt = [2.0, -1.0, 3.0];
        let q = Model::lattice_translate(&p, &gmt);
        let dr = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5 * gmt[1], -0.5 * gmt[0], 1.0]];
        let (fp, fq) = (m.frame(&p), m.frame(&q));
        for a in 0..3 {
            let pushed = matvec(&dr, &fp[a]);
            for i in 0..3 {
                assert!((pushed[i] - fq[a][i]).abs() < 1e-14);
            }
        }
        assert_eq!(m.frame_at(&p).unwrap().gamma, m.frame_at(&q).unwrap().gamma);
    }

    #[test]
    fn classifier() {
        let p = [0.1, 0.2, 0.0];
        assert_eq!(Model::space_form(-1.0).unwrap().negativity_class(&p).unwrap(), NegativityClass::StronglyNegative);
        assert_eq!(Model::heisenberg().negativity_class(&p).unwrap(), NegativityClass::StronglySeminegative);
        let sp = [0.7, 0.2, 1.0];
        assert_eq!(Model::sphere(1.0).unwrap().negativity_class(&sp).unwrap(), NegativityClass::Indefinite);
        for t in [0.3, 1.1, 2.9] {
            assert_eq!(
                Model::space_form(-1.0).unwrap().negativity_class_in_frame(&p, t).unwrap(),
                NegativityClass::StronglyNegative
            );
        }
    }

    #[test]
    fn order_k_sampling() {
        let m = Model::space_form(-1.0).unwrap();
        let p = [0.1, 0.1, 0.0];
        let r2 = m.order_k_negativity_sample(&p, 2, 500, 9).unwrap();
        assert_eq!(r2.outcome, "no-counterexample");
        assert_eq!(r2.admissible_trials, 0);
        // for k = 1 the contraction has ξ_{11} = 0 identically
        let r1 = m.order_k_negativity_sample(&p, 1, 50, 9).unwrap();
        assert_eq!(r1.outcome, "counterexample");
        assert!(matches!(m.order_k_negativity_sample(&p, 0, 5, 1), Err(Error::InvalidOrder(0))));
    }

    #[test]
    fn tanaka_webster_audit() {
        for m in [Model::heisenberg(), Model::sphere(1.0).unwrap(), Model::space_form(-1.0).unwrap()] {
            let c = tanaka_webster_convergence(&m, 30, 1e-3, 11);
            assert!(c.coarse.max() <= 1e-5, "{:?}", c.coarse);
            assert!(c.ok, "{:?}", c.ratios);
            if m.kind != ModelKind::HeisenbergNilmanifold {
                assert!(c.ratios.iter().any(|r| r.1.is_some()), "{:?}", c.ratios);
            }
        }
        let r = check_tanaka_webster(&Model::sphere(1.0).unwrap(), 3, 1e-12, 1);
        assert!(r.catastrophic_cancellation);
    }

    #[test]
    fn degenerate_inputs() {
        let m = Model::heisenberg();
        let p = [0.0; 3];
        assert!(matches!(m.sectional(&p, &[0.0, 1.0, 0.0], &[0.0, 2.0, 0.0]), Err(Error::DegeneratePlane(_))));
        assert!(matches!(m.hol_sectional(&p, &[1.0, 1.0, 0.0]), Err(Error::NotHorizontal(_))));
        assert!(Model::sphere(1.0).unwrap().frame_at(&[2.0, 0.0, 0.0]).is_err());
        assert!(Model::sphere(0.0).is_err());
        assert!(build_model("torus", &ModelParams::default()).is_err());
    }
}
