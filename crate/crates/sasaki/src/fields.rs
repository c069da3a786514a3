//! Structured grids on the compact models and the discrete horizontal calculus.
//!
//! Frame derivatives are centred differences along the coordinate axes,
//! weighted by the exact frame coefficients: `D_B u = Σ_j E_B^j ∂_j u`.
//! Second-order operators are compositions of these (wide stencils).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{heis_mul, Model, ModelKind};
use crate::jet::Real;
use crate::small::{M3, V3};

/// Neighbour of a node across one axis step, with the gluing data needed to
/// transport values: lattice element for the nilmanifold, sign of the
/// horizontal frame for the sphere's η-faces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nb {
    pub idx: u32,
    pub deck: [i64; 3],
    pub flip: f64,
}

#[derive(Debug)]
pub struct Grid {
    pub model: Model,
    pub n: [usize; 3],
    pub h: [f64; 3],
    nbrs: [[Vec<Nb>; 2]; 3],
    weights: Vec<f64>,
    uniform: bool,
    frames: Vec<M3>,
    omegas: Vec<V3>,
}

impl Grid {
    /// Nilmanifold grid with `n × n × 2n` vertex-centred nodes on `[0,1)³`.
    pub fn nilmanifold(n: usize) -> Result<Arc<Grid>> {
        Grid::nilmanifold_dims(n, n, 2 * n)
    }

    pub fn nilmanifold_dims(nx: usize, ny: usize, nt: usize) -> Result<Arc<Grid>> {
        if nx < 3 || ny < 3 || nt < 3 {
            return Err(Error::InvalidGrid(format!("resolution ({nx},{ny},{nt}) too small")));
        }
        if nt % (2 * nx) != 0 || nt % (2 * ny) != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_t = {nt} must be divisible by 2·n_x and 2·n_y so the twisted gluing maps nodes to nodes"
            )));
        }
        let n = [nx, ny, nt];
        let h = [1.0 / nx as f64, 1.0 / ny as f64, 1.0 / nt as f64];
        let len = nx * ny * nt;
        let mut g = Grid::blank(Model::heisenberg(), n, h, len);
        g.uniform = true;
        g.weights = vec![h[0] * h[1] * h[2]; len];
        g.fill_frames();
        Ok(Arc::new(g))
    }

    /// Angle grid `(η, α, β)` on S³: η cell-centred on `(0, π/2)`, α and β
    /// vertex-centred and periodic.
    pub fn sphere(model: &Model, n_eta: usize, n_alpha: usize, n_beta: usize) -> Result<Arc<Grid>> {
        if model.kind != ModelKind::RoundSphere3 {
            return Err(Error::InvalidGrid(format!("sphere grid needs a sphere model, got {}", model.kind)));
        }
        if n_eta < 2 || n_alpha < 4 || n_beta < 4 || n_alpha % 2 != 0 || n_beta % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "sphere resolution ({n_eta},{n_alpha},{n_beta}): need n_eta ≥ 2 and even angle counts ≥ 4"
            )));
        }
        let pi = std::f64::consts::PI;
        let n = [n_eta, n_alpha, n_beta];
        let h = [pi / (2.0 * n_eta as f64), 2.0 * pi / n_alpha as f64, 2.0 * pi / n_beta as f64];
        let len = n_eta * n_alpha * n_beta;
        let mut g = Grid::blank(model.clone(), n, h, len);
        let z = Nb { idx: 0, deck: [0; 3], flip: 1.0 };
        g.nbrs = std::array::from_fn(|_| [vec![z; len], vec![z; len]]);
        let s4 = model.scale.powi(4);
        for idx in 0..len {
            let [i, j, k] = g.ijk(idx);
            let (lo, hi) = (i as f64 * h[0], (i + 1) as f64 * h[0]);
            g.weights[idx] = 0.25 * s4 * 0.5 * ((2.0 * lo).cos() - (2.0 * hi).cos()) * h[1] * h[2];
            for axis in 0..3 {
                for (d, s) in [-1i64, 1].into_iter().enumerate() {
                    let mut u = [i as i64, j as i64, k as i64];
                    u[axis] += s;
                    let mut flip = 1.0;
                    if u[0] < 0 {
                        u[0] = 0;
                        u[2] += n_beta as i64 / 2;
                        flip = -1.0;
                    } else if u[0] >= n_eta as i64 {
                        u[0] = n_eta as i64 - 1;
                        u[1] += n_alpha as i64 / 2;
                        flip = -1.0;
                    }
                    let q = g.index(u[0] as usize, u[1].rem_euclid(n_alpha as i64) as usize, u[2].rem_euclid(n_beta as i64) as usize);
                    g.nbrs[axis][d][idx] = Nb { idx: q as u32, deck: [0; 3], flip };
                }
            }
        }
        g.fill_frames();
        Ok(Arc::new(g))
    }

    fn blank(model: Model, n: [usize; 3], h: [f64; 3], len: usize) -> Grid {
        Grid {
            model,
            n,
            h,
            nbrs: std::array::from_fn(|_| [Vec::new(), Vec::new()]),
            weights: vec![0.0; len],
            uniform: false,
            frames: Vec::new(),
            omegas: Vec::new(),
        }
    }

    fn fill_frames(&mut self) {
        let pts: Vec<V3> = (0..self.len()).map(|i| self.coords(i)).collect();
        self.frames = pts.iter().map(|p| self.model.frame(p)).collect();
        self.omegas = pts.iter().map(|p| self.model.omega(p)).collect();
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }

    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.n[2];
        let j = (idx / self.n[2]) % self.n[1];
        [idx / (self.n[1] * self.n[2]), j, k]
    }

    pub fn coords(&self, idx: usize) -> V3 {
        let [i, j, k] = self.ijk(idx);
        match self.model.kind {
            ModelKind::RoundSphere3 => [(i as f64 + 0.5) * self.h[0], j as f64 * self.h[1], k as f64 * self.h[2]],
            _ => [i as f64 * self.h[0], j as f64 * self.h[1], k as f64 * self.h[2]],
        }
    }

    /// Canonical node and lattice element `γ` with `unwrapped = node · γ`.
    pub fn unwrap_nil(&self, u: [i64; 3]) -> (usize, [i64; 3]) {
        let [nx, ny, nt] = self.n.map(|v| v as i64);
        let (tx, ty) = (nt / (2 * nx), nt / (2 * ny));
        let a = u[0].div_euclid(nx);
        let b = u[1].div_euclid(ny);
        let kk = u[2] + a * u[1] * ty - b * u[0] * tx;
        let c = kk.div_euclid(nt);
        let q = self.index((u[0] - a * nx) as usize, (u[1] - b * ny) as usize, (kk - c * nt) as usize);
        (q, [a, b, c])
    }

    pub fn nb(&self, axis: usize, forward: bool, idx: usize) -> Nb {
        if self.is_nil() {
            let mut u = self.ijk(idx).map(|v| v as i64);
            u[axis] += if forward { 1 } else { -1 };
            let (q, deck) = self.unwrap_nil(u);
            Nb { idx: q as u32, deck, flip: 1.0 }
        } else {
            self.nbrs[axis][forward as usize][idx]
        }
    }

    pub fn is_nil(&self) -> bool {
        self.model.kind == ModelKind::HeisenbergNilmanifold
    }

    /// Visits the taps of the discrete frame derivative `D_b` at node `n`:
    /// `D_b u(n) = Σ w · u(tap)`, where the tap value is transported by `deck`
    /// (map lifts) or `flip` (odd frame components).
    ///
    /// On the nilmanifold `e_1`, `e_2` are generated by left translations,
    /// which commute with the lattice gluing; the stencil differences `u` along
    /// those translations, interpolating cubically in t where they land between
    /// nodes. The resulting operators map lattice-invariant data to
    /// lattice-invariant data exactly, so they can be composed across seams.
    pub fn taps(&self, n: usize, b: usize, mut f: impl FnMut(usize, [i64; 3], f64, f64)) {
        if self.is_nil() {
            let [i, j, k] = self.ijk(n).map(|v| v as i64);
            let [nx, ny, nt] = self.n.map(|v| v as i64);
            if b == 0 {
                let w = 0.5 / self.h[2];
                for s in [-1i64, 1] {
                    let (q, deck) = self.unwrap_nil([i, j, k + s]);
                    f(q, deck, 1.0, s as f64 * w);
                }
                return;
            }
            let w = 0.5 / self.h[b - 1];
            let den = 2 * nx * ny;
            for s in [-1i64, 1] {
                // t-offset of the translated node, in cells: num / den
                let (di, dj, num) = if b == 1 { (s, 0, s * j * nt) } else { (0, s, -s * i * nt) };
                let k0 = num.div_euclid(den);
                let fr = num.rem_euclid(den) as f64 / den as f64;
                let lw = if fr == 0.0 {
                    [0.0, 1.0, 0.0, 0.0]
                } else {
                    [
                        -fr * (fr - 1.0) * (fr - 2.0) / 6.0,
                        (fr + 1.0) * (fr - 1.0) * (fr - 2.0) / 2.0,
                        -(fr + 1.0) * fr * (fr - 2.0) / 2.0,
                        (fr + 1.0) * fr * (fr - 1.0) / 6.0,
                    ]
                };
                for (m, lwm) in lw.into_iter().enumerate() {
                    if lwm != 0.0 {
                        let (q, deck) = self.unwrap_nil([i + di, j + dj, k + k0 + m as i64 - 1]);
                        f(q, deck, 1.0, s as f64 * w * lwm);
                    }
                }
            }
        } else {
            let e = &self.frames[n][b];
            for j in 0..3 {
                if e[j] == 0.0 {
                    continue;
                }
                let w = 0.5 * e[j] / self.h[j];
                let (fw, bw) = (self.nbrs[j][1][n], self.nbrs[j][0][n]);
                f(fw.idx as usize, fw.deck, fw.flip, w);
                f(bw.idx as usize, bw.deck, bw.flip, -w);
            }
        }
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    /// Rows: coordinate components of ξ, e_1, e_2 at the node.
    pub fn frame(&self, idx: usize) -> &M3 {
        &self.frames[idx]
    }

    pub fn omega(&self, idx: usize) -> &V3 {
        &self.omegas[idx]
    }

    pub fn volume(&self) -> f64 {
        self.integrate_slice(&vec![1.0; self.len()])
    }

    /// Index-ordered quadrature, so results are reproducible bit for bit.
    pub fn integrate_slice(&self, u: &[f64]) -> f64 {
        if self.uniform {
            u.iter().sum::<f64>() / self.len() as f64
        } else {
            u.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
        }
    }

    /// Forward-Euler step bound for `Σ_b D_b D_b`: `h²/4` on the nilmanifold,
    /// the Gershgorin-type bound `2 / Σ_b max_n (Σ_j |E_b^j| / h_j)²` otherwise.
    pub fn cfl_dt(&self) -> f64 {
        if self.is_nil() {
            let h = self.h[0].min(self.h[1]);
            return h * h / 4.0;
        }
        let mut s = 0.0;
        for b in 1..3 {
            let m = self
                .frames
                .iter()
                .map(|e| (0..3).map(|j| e[b][j].abs() / self.h[j]).sum::<f64>())
                .fold(0.0, f64::max);
            s += m * m;
        }
        2.0 / s
    }

    /// Spacing used by tolerances expressed in grid units.
    pub fn spacing(&self) -> f64 {
        self.h[0].max(self.h[1])
    }

    /// `D_B u` for frame index `b`; `odd` marks fields carrying an odd number
    /// of horizontal frame indices (they change sign across the sphere's η-faces).
    pub fn frame_diff(&self, u: &[f64], b: usize, odd: bool) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|n| {
                let mut acc = 0.0;
                self.taps(n, b, |q, _, flip, w| acc += w * if odd { flip * u[q] } else { u[q] });
                acc
            })
            .collect()
    }

    pub fn frame_diffs(&self, u: &[f64], odd: bool) -> [Vec<f64>; 3] {
        std::array::from_fn(|b| self.frame_diff(u, b, odd))
    }
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

/// Frame components `(V^0, V^1, V^2)` on `{ξ, e_1, e_2}`; 1-forms use the same
/// layout since the frame is orthonormal.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub grid: Arc<Grid>,
    pub comps: [Vec<f64>; 3],
}

/// Frame components `(ω_01, ω_02, ω_12)` of a 2-form.
#[derive(Clone, Debug)]
pub struct TwoForm {
    pub grid: Arc<Grid>,
    pub comps: [Vec<f64>; 3],
}

impl ScalarField {
    pub fn constant(grid: &Arc<Grid>, v: f64) -> ScalarField {
        ScalarField { grid: grid.clone(), values: vec![v; grid.len()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(V3) -> f64 + Sync) -> ScalarField {
        let values = (0..grid.len()).into_par_iter().map(|n| f(grid.coords(n))).collect();
        ScalarField { grid: grid.clone(), values }
    }

    /// Like [`ScalarField::from_fn`], but first checks that `f` descends to
    /// the quotient: on the nilmanifold `f(p·γ) = f(p)` at every node for the
    /// lattice generators.
    pub fn from_fn_checked(grid: &Arc<Grid>, f: impl Fn(V3) -> f64 + Sync, tol: f64) -> Result<ScalarField> {
        if grid.model.kind == ModelKind::HeisenbergNilmanifold {
            let gens = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            for n in 0..grid.len() {
                let p = grid.coords(n);
                let v = f(p);
                for g in &gens {
                    let d = (f(heis_mul(&p, g)) - v).abs();
                    if !(d <= tol) {
                        return Err(Error::InvalidGrid(format!(
                            "field is not invariant under the lattice at node {n} (defect {d:e})"
                        )));
                    }
                }
            }
        }
        Ok(ScalarField::from_fn(grid, f))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl VectorField {
    pub fn zeros(grid: &Arc<Grid>) -> VectorField {
        VectorField { grid: grid.clone(), comps: std::array::from_fn(|_| vec![0.0; grid.len()]) }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(V3) -> V3 + Sync) -> VectorField {
        let v: Vec<V3> = (0..grid.len()).into_par_iter().map(|n| f(grid.coords(n))).collect();
        VectorField { grid: grid.clone(), comps: std::array::from_fn(|a| v.iter().map(|x| x[a]).collect()) }
    }
}

impl TwoForm {
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(V3) -> V3 + Sync) -> TwoForm {
        let v = VectorField::from_fn(grid, f);
        TwoForm { grid: v.grid, comps: v.comps }
    }

    /// `dθ`, whose only frame component is `dθ(e_1, e_2) = 1`.
    pub fn dtheta(grid: &Arc<Grid>) -> TwoForm {
        TwoForm::from_fn(grid, |_| [0.0, 0.0, 1.0])
    }
}

pub fn horizontal_gradient(u: &ScalarField) -> VectorField {
    let g = &u.grid;
    VectorField { grid: g.clone(), comps: [vec![0.0; g.len()], g.frame_diff(&u.values, 1, false), g.frame_diff(&u.values, 2, false)] }
}

pub fn gradient(u: &ScalarField) -> VectorField {
    VectorField { grid: u.grid.clone(), comps: u.grid.frame_diffs(&u.values, false) }
}

/// `Δ_H u = Σ_b (e_b e_b u − (∇_{e_b} e_b) u)`.
pub fn sub_laplacian(u: &ScalarField) -> ScalarField {
    let g = &u.grid;
    let d1 = g.frame_diff(&u.values, 1, false);
    let d2 = g.frame_diff(&u.values, 2, false);
    let d11 = g.frame_diff(&d1, 1, true);
    let d22 = g.frame_diff(&d2, 2, true);
    let values = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let w = g.omega(n);
            d11[n] + d22[n] - w[1] * d2[n] + w[2] * d1[n]
        })
        .collect();
    ScalarField { grid: g.clone(), values }
}

/// `div V = Σ_A g(∇_{e_A} V, e_A)`.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = &v.grid;
    let d0 = g.frame_diff(&v.comps[0], 0, false);
    let d1 = g.frame_diff(&v.comps[1], 1, true);
    let d2 = g.frame_diff(&v.comps[2], 2, true);
    let values = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let w = g.omega(n);
            d0[n] + d1[n] + d2[n] + w[2] * v.comps[1][n] - w[1] * v.comps[2][n]
        })
        .collect();
    ScalarField { grid: g.clone(), values }
}

/// `δρ = −Σ_A (∇_{e_A} ρ)(e_A)` for a 1-form given by frame components.
pub fn codifferential(rho: &VectorField) -> ScalarField {
    let mut d = divergence(rho);
    d.values.iter_mut().for_each(|x| *x = -*x);
    d
}

/// `(δω)(e_C) = −Σ_A (∇^θ_{e_A} ω)(e_A, e_C)` with the Levi-Civita connection
/// of the Webster metric.
pub fn codifferential_2form(w: &TwoForm) -> VectorField {
    let g = &w.grid;
    // derivatives e_A(ω_{AC}) are only needed for A ≠ C
    let odd = [true, true, false];
    let dd: [[Vec<f64>; 3]; 3] = std::array::from_fn(|k| g.frame_diffs(&w.comps[k], odd[k]));
    let comp = |k: usize, n: usize, a: usize, c: usize| -> (f64, f64) {
        // value and e_A-derivative of ω_{ac}
        let (slot, sign) = match (a, c) {
            (0, 1) => (0, 1.0),
            (1, 0) => (0, -1.0),
            (0, 2) => (1, 1.0),
            (2, 0) => (1, -1.0),
            (1, 2) => (2, 1.0),
            (2, 1) => (2, -1.0),
            _ => return (0.0, 0.0),
        };
        (sign * w.comps[slot][n], sign * dd[slot][k][n])
    };
    let out: Vec<V3> = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let gam = lc_gamma(g.omega(n));
            std::array::from_fn(|c| {
                let mut s = 0.0;
                for a in 0..3 {
                    s += comp(a, n, a, c).1;
                    for d in 0..3 {
                        s -= gam[a][a][d] * comp(a, n, d, c).0 + gam[a][c][d] * comp(a, n, a, d).0;
                    }
                }
                -s
            })
        })
        .collect();
    VectorField { grid: g.clone(), comps: std::array::from_fn(|a| out.iter().map(|x| x[a]).collect()) }
}

/// Levi-Civita coefficients of the Webster metric in the frame, from the
/// Tanaka–Webster ones plus the Sasakian offset.
pub fn lc_gamma(omega: &V3) -> [[V3; 3]; 3] {
    let mut g = [[[0.0; 3]; 3]; 3];
    for a in 0..3 {
        g[a][1][2] = omega[a];
        g[a][2][1] = -omega[a];
        for b in 0..3 {
            let mut ea = [0.0; 3];
            let mut eb = [0.0; 3];
            ea[a] = 1.0;
            eb[b] = 1.0;
            let s = crate::geometry::offset_apply(&eb, &ea);
            for d in 0..3 {
                g[a][b][d] += s[d];
            }
        }
    }
    g
}

pub fn integrate(u: &ScalarField) -> f64 {
    u.grid.integrate_slice(&u.values)
}

/// Pointwise `|u_{11̄} − u_{1̄1} − i ξu|`, which in real form reads
/// `|[e_2, e_1]u − ω(e_1) e_1u − ω(e_2) e_2u − ξu|` with discrete brackets.
pub fn scalar_commutation_residual(u: &ScalarField) -> ScalarField {
    let g = &u.grid;
    let [d0, d1, d2] = g.frame_diffs(&u.values, false);
    let d21 = g.frame_diff(&d1, 2, true);
    let d12 = g.frame_diff(&d2, 1, true);
    let values = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let w = g.omega(n);
            (d21[n] - d12[n] - w[1] * d1[n] - w[2] * d2[n] - d0[n]).abs()
        })
        .collect();
    ScalarField { grid: g.clone(), values }
}

/// Lattice-invariant function on the nilmanifold with a genuine Reeb
/// dependence: `Re[e^{2πit} e^{πixy} Σ_n e^{−π(y+n)²} e^{2πinx}]`, evaluated at
/// `shift·p` and rotated by `phase`. Plain `sin(2πt)` does not descend to the
/// quotient because of the twisted gluing, which is why this is needed.
pub fn theta_mode<S: Real>(p: &[S; 3], shift: &V3, phase: f64) -> S {
    let q = heis_mul(&shift.map(S::cst), p);
    let [x, y, t] = q;
    let pi = std::f64::consts::PI;
    let c = -(y.val().round() as i64);
    let mut s = S::cst(0.0);
    for n in (c - 7)..=(c + 7) {
        let yn = y + S::cst(n as f64);
        let arg = t.scale(2.0 * pi) + (x * y).scale(pi) + x.scale(2.0 * pi * n as f64) + S::cst(phase);
        s = s + (yn * yn).scale(-pi).exp() * arg.cos();
    }
    s
}

// ---------------------------------------------------------------------------
// Snapshots

const MAGIC: &[u8; 8] = b"SSKFLD01";

/// Binary layout (little endian): magic `SSKFLD01`; `u32` dims ×3; `f64`
/// spacing ×3; `u32` length + UTF-8 model kind; `u32` component count; then
/// all values, component-major, each component row-major over `(i, j, k)`.
pub fn write_binary(path: &Path, grid: &Grid, comps: &[&[f64]]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for d in grid.n {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for h in grid.h {
        w.write_all(&h.to_le_bytes())?;
    }
    let kind = grid.model.kind.name().as_bytes();
    w.write_all(&(kind.len() as u32).to_le_bytes())?;
    w.write_all(kind)?;
    w.write_all(&(comps.len() as u32).to_le_bytes())?;
    for c in comps {
        for v in c.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub model_kind: String,
    pub comps: Vec<Vec<f64>>,
}

pub fn read_binary(path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidGrid("not a field snapshot".into()));
    }
    let mut u32b = [0u8; 4];
    let mut f64b = [0u8; 8];
    let mut rd_u32 = |r: &mut BufReader<File>| -> Result<usize> {
        r.read_exact(&mut u32b)?;
        Ok(u32::from_le_bytes(u32b) as usize)
    };
    let dims = [rd_u32(&mut r)?, rd_u32(&mut r)?, rd_u32(&mut r)?];
    let mut spacing = [0.0; 3];
    for s in spacing.iter_mut() {
        r.read_exact(&mut f64b)?;
        *s = f64::from_le_bytes(f64b);
    }
    let kl = rd_u32(&mut r)?;
    let mut kind = vec![0u8; kl];
    r.read_exact(&mut kind)?;
    let nc = rd_u32(&mut r)?;
    let len = dims[0] * dims[1] * dims[2];
    let mut comps = Vec::with_capacity(nc);
    for _ in 0..nc {
        let mut c = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut f64b)?;
            c.push(f64::from_le_bytes(f64b));
        }
        comps.push(c);
    }
    Ok(Snapshot {
        dims,
        spacing,
        model_kind: String::from_utf8(kind).map_err(|e| Error::InvalidGrid(e.to_string()))?,
        comps,
    })
}

/// CSV with one row per node: `i,j,k,x1,x2,x3,c0,c1,...`.
pub fn write_csv(path: &Path, grid: &Grid, comps: &[&[f64]]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "i,j,k,x1,x2,x3")?;
    for c in 0..comps.len() {
        write!(w, ",c{c}")?;
    }
    writeln!(w)?;
    for n in 0..grid.len() {
        let [i, j, k] = grid.ijk(n);
        let p = grid.coords(n);
        write!(w, "{i},{j},{k},{},{},{}", p[0], p[1], p[2])?;
        for c in comps {
            write!(w, ",{}", c[n])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unwrap_is_consistent_with_the_lattice_action() {
        let g = Grid::nilmanifold(4).unwrap();
        for u in [[-1i64, 2, 3], [4, -1, 0], [5, 7, -3], [-9, 4, 17]] {
            let (q, deck) = g.unwrap_nil(u);
            let p = g.coords(q);
            let gam = deck.map(|v| v as f64);
            let back = heis_mul(&p, &gam);
            let want = [u[0] as f64 * g.h[0], u[1] as f64 * g.h[1], u[2] as f64 * g.h[2]];
            for i in 0..3 {
                assert!((back[i] - want[i]).abs() < 1e-12, "{u:?}: {back:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn neighbours_are_bijections() {
        let g = Grid::nilmanifold(5).unwrap();
        for axis in 0..3 {
            let mut seen = vec![false; g.len()];
            for n in 0..g.len() {
                let f = g.nb(axis, true, n);
                assert!(!seen[f.idx as usize]);
                seen[f.idx as usize] = true;
                assert_eq!(g.nb(axis, false, f.idx as usize).idx as usize, n);
            }
        }
        let s = Grid::sphere(&Model::sphere(1.0).unwrap(), 4, 6, 8).unwrap();
        for n in 0..s.len() {
            let f = s.nb(0, true, n);
            // crossing an η-face reverses the axis direction
            let back = s.nb(0, f.flip < 0.0, f.idx as usize);
            assert_eq!(back.idx as usize, n);
        }
    }

    #[test]
    fn theta_mode_descends() {
        let g = Grid::nilmanifold(4).unwrap();
        let f = |p: V3| theta_mode(&p, &[0.3, -0.2, 0.1], 0.7);
        assert!(ScalarField::from_fn_checked(&g, f, 1e-12).is_ok());
        let bad = |p: V3| (2.0 * std::f64::consts::PI * p[2]).sin() + p[0];
        assert!(ScalarField::from_fn_checked(&g, bad, 1e-9).is_err());
    }

    #[test]
    fn bad_dims_rejected() {
        assert!(Grid::nilmanifold_dims(4, 4, 6).is_err());
        assert!(Grid::sphere(&Model::sphere(1.0).unwrap(), 4, 5, 8).is_err());
        assert!(Grid::sphere(&Model::heisenberg(), 4, 6, 8).is_err());
    }

    #[test]
    fn volumes() {
        let g = Grid::nilmanifold(6).unwrap();
        assert_eq!(g.volume(), 1.0);
        let s = Grid::sphere(&Model::sphere(2.0).unwrap(), 6, 8, 8).unwrap();
        let pi = std::f64::consts::PI;
        assert!((s.volume() - 16.0 * pi * pi).abs() < 1e-10);
    }

    #[test]
    fn cfl_on_nilmanifold() {
        let g = Grid::nilmanifold(8).unwrap();
        let h = 1.0 / 8.0;
        // max |y| on the grid is (n−1)h, so the bound sits slightly above h²/4
        assert!(g.cfl_dt() >= h * h / 4.0);
        assert!(g.cfl_dt() < h * h / 3.0);
    }
}
