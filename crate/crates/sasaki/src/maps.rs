//! Maps between models: frame coefficients, second fundamental form,
//! energies, tension and the holomorphy/foliation defects.
//!
//! Real coefficients are indexed like the geometry module: `d1[a][b]` is the
//! `ẽ_a` component of `df(e_b)`, `d2[a][b][c] = β^a_{bc}` with `c` the
//! differentiation slot, `d3[a][b][c][d] = (∇_{e_d} β)^a_{bc}`. The complex
//! repackaging uses `η = (e_1 − i e_2)/√2`; complex slot 0 is ξ, 1 is the
//! holomorphic index (`j` / `α`), 2 the conjugate one (`j̄` / `ᾱ`).

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{theta_mode, Grid};
use crate::geometry::{heis_mul, Model, ModelKind};
use crate::jet::{Jet, Real};
use crate::small::{M3, V3};

pub type D2 = [[[f64; 3]; 3]; 3];
pub type D3 = [[[[f64; 3]; 3]; 3]; 3];

#[derive(Clone, Debug, Serialize)]
pub struct MapJet {
    pub point: V3,
    pub f: V3,
    pub d1: M3,
    pub d2: D2,
    pub d3: Option<D3>,
}

/// Complex frame coefficients `f^A_B`, `f^A_{BC}`, `f^A_{BCD}`.
#[derive(Clone, Debug)]
pub struct ComplexJet {
    pub c1: [[C64; 3]; 3],
    pub c2: [[[C64; 3]; 3]; 3],
    pub c3: Option<[[[[C64; 3]; 3]; 3]; 3]>,
}

// real components of the complex basis vectors ξ, η, η̄
fn basis(a: usize) -> [C64; 3] {
    let s = FRAC_1_SQRT_2;
    match a {
        0 => [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        1 => [C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(0.0, -s)],
        _ => [C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(0.0, s)],
    }
}

// dual coframe θ, θ^1 = (θ^{e1} + iθ^{e2})/√2, θ^1̄
fn cobasis(a: usize) -> [C64; 3] {
    let b = basis(a);
    [b[0].conj(), b[1].conj(), b[2].conj()]
}

impl MapJet {
    pub fn complex(&self) -> ComplexJet {
        let (e, w): ([[C64; 3]; 3], [[C64; 3]; 3]) = ([0, 1, 2].map(basis), [0, 1, 2].map(cobasis));
        let mut c1 = [[C64::default(); 3]; 3];
        let mut c2 = [[[C64::default(); 3]; 3]; 3];
        for big_a in 0..3 {
            for b in 0..3 {
                for a in 0..3 {
                    for x in 0..3 {
                        c1[big_a][b] += w[big_a][a] * self.d1[a][x] * e[b][x];
                    }
                }
                for c in 0..3 {
                    let mut s = C64::default();
                    for a in 0..3 {
                        for x in 0..3 {
                            for y in 0..3 {
                                s += w[big_a][a] * self.d2[a][x][y] * e[b][x] * e[c][y];
                            }
                        }
                    }
                    c2[big_a][b][c] = s;
                }
            }
        }
        let c3 = self.d3.as_ref().map(|d3| {
            let mut c3 = [[[[C64::default(); 3]; 3]; 3]; 3];
            for (big_a, ca) in c3.iter_mut().enumerate() {
                for b in 0..3 {
                    for c in 0..3 {
                        for d in 0..3 {
                            let mut s = C64::default();
                            for a in 0..3 {
                                for x in 0..3 {
                                    for y in 0..3 {
                                        for z in 0..3 {
                                            s += w[big_a][a] * d3[a][x][y][z] * e[b][x] * e[c][y] * e[d][z];
                                        }
                                    }
                                }
                            }
                            ca[b][c][d] = s;
                        }
                    }
                }
            }
            c3
        });
        ComplexJet { c1, c2, c3 }
    }
}

/// Inverse of the complex repackaging for `d1`.
pub fn real_d1(c1: &[[C64; 3]; 3]) -> M3 {
    let (e, w): ([[C64; 3]; 3], [[C64; 3]; 3]) = ([0, 1, 2].map(basis), [0, 1, 2].map(cobasis));
    let mut d = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let mut s = C64::default();
            for big_a in 0..3 {
                for big_b in 0..3 {
                    s += e[big_a][a] * c1[big_a][big_b] * w[big_b][b];
                }
            }
            d[a][b] = s.re;
        }
    }
    d
}

// ---------------------------------------------------------------------------
// Closed-form test maps

/// One summand of the left-translation perturbation `w` in `f = w·Φ_A`.
#[derive(Clone, Debug, PartialEq)]
pub enum WTerm {
    /// `amp · cos(2π(k·(x, y)) + phase)` added to component `comp`.
    Trig { comp: usize, amp: f64, k: [i32; 2], phase: f64 },
    /// `amp · theta_mode(p, shift, phase)` — depends on t.
    Theta { comp: usize, amp: f64, shift: V3, phase: f64 },
}

impl WTerm {
    fn eval<S: Real>(&self, p: &[S; 3]) -> (usize, S) {
        match self {
            WTerm::Trig { comp, amp, k, phase } => {
                let arg = (p[0].scale(k[0] as f64) + p[1].scale(k[1] as f64)).scale(2.0 * PI) + S::cst(*phase);
                (*comp, arg.cos().scale(*amp))
            }
            WTerm::Theta { comp, amp, shift, phase } => (*comp, theta_mode(p, shift, *phase).scale(*amp)),
        }
    }

    fn depends_on_t(&self) -> bool {
        matches!(self, WTerm::Theta { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapKind {
    /// Nilmanifold to itself: `f(p) = w(p)·(b, 0)·Φ_A(p)·r` with `Φ_A` the
    /// lifted torus automorphism `(A(x, y), det A · t)` and `w` lattice
    /// invariant. Right factors are pseudo-Hermitian isometries.
    Nil { a: [[i64; 2]; 2], b: [f64; 2], w: Vec<WTerm>, r: V3 },
    Constant(V3),
    /// Torus rotation `(η, α + c₁, β + c₂)` of the round sphere.
    SphereRotation([f64; 2]),
    /// Non-isometric sphere self-map
    /// `(η + ε sin 2η cos(α − β), α + ε sin β, β)`; for `|ε| < ½` it keeps η
    /// inside `(0, π/2)`.
    SphereTwist(f64),
}

#[derive(Clone, Debug)]
pub struct AnalyticMap {
    pub name: String,
    pub source: Model,
    pub target: Model,
    pub kind: MapKind,
}

impl AnalyticMap {
    pub fn nil(name: &str, a: [[i64; 2]; 2], b: [f64; 2], w: Vec<WTerm>) -> AnalyticMap {
        AnalyticMap {
            name: name.to_string(),
            source: Model::heisenberg(),
            target: Model::heisenberg(),
            kind: MapKind::Nil { a, b, w, r: [0.0; 3] },
        }
    }

    /// `p ↦ p·r`; with `r` a lattice element this is a deck translation.
    pub fn right_translate(r: V3) -> AnalyticMap {
        AnalyticMap {
            name: format!("right-translate:{},{},{}", r[0], r[1], r[2]),
            source: Model::heisenberg(),
            target: Model::heisenberg(),
            kind: MapKind::Nil { a: [[1, 0], [0, 1]], b: [0.0; 2], w: vec![], r },
        }
    }

    pub fn identity() -> AnalyticMap {
        Self::nil("identity", [[1, 0], [0, 1]], [0.0; 2], vec![])
    }

    pub fn fiber_rotation(c: f64) -> AnalyticMap {
        let w = vec![WTerm::Trig { comp: 2, amp: c, k: [0, 0], phase: 0.0 }];
        Self::nil(&format!("fiber-rotation:{c}"), [[1, 0], [0, 1]], [0.0; 2], w)
    }

    pub fn affine(a: [[i64; 2]; 2], b: [f64; 2]) -> AnalyticMap {
        let name = format!("affine:{},{},{},{},{},{}", a[0][0], a[0][1], a[1][0], a[1][1], b[0], b[1]);
        Self::nil(&name, a, b, vec![])
    }

    /// `(x, y, t) ↦ (x, −y, −t)`.
    pub fn conjugation() -> AnalyticMap {
        Self::nil("conjugation", [[1, 0], [0, -1]], [0.0; 2], vec![])
    }

    pub fn vertical_shift(amp: f64) -> AnalyticMap {
        let w = vec![WTerm::Trig { comp: 2, amp, k: [1, 0], phase: -PI / 2.0 }];
        Self::nil(&format!("vertical-shift:{amp}"), [[1, 0], [0, 1]], [0.0; 2], w)
    }

    /// Foliated trigonometric perturbation of the identity.
    pub fn trig(eps: f64) -> AnalyticMap {
        let w = vec![
            WTerm::Trig { comp: 0, amp: eps, k: [0, 1], phase: -PI / 2.0 },
            WTerm::Trig { comp: 1, amp: 0.5 * eps, k: [1, 0], phase: 0.0 },
            WTerm::Trig { comp: 2, amp: eps, k: [1, 1], phase: -PI / 2.0 },
        ];
        Self::nil(&format!("trig:{eps}"), [[1, 0], [0, 1]], [0.0; 2], w)
    }

    /// Perturbation whose horizontal part oscillates along the Reeb fibres,
    /// so `f^α_0 ≠ 0`.
    pub fn reeb_tilt(eps: f64) -> AnalyticMap {
        let w = vec![
            WTerm::Theta { comp: 0, amp: eps, shift: [0.0; 3], phase: 0.0 },
            WTerm::Theta { comp: 1, amp: 0.7 * eps, shift: [0.3, 0.1, 0.0], phase: 1.0 },
            WTerm::Theta { comp: 2, amp: 0.5 * eps, shift: [0.2, 0.6, 0.0], phase: 0.4 },
        ];
        Self::nil(&format!("reeb-tilt:{eps}"), [[1, 0], [0, 1]], [0.0; 2], w)
    }

    /// Seeded perturbation of the identity; foliated unless `foliated` is false.
    pub fn perturbed(seed: u64, eps: f64, foliated: bool) -> AnalyticMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Vec::new();
        for comp in 0..3 {
            for _ in 0..3 {
                let k = loop {
                    let k = [rng.gen_range(-2..=2), rng.gen_range(-2..=2)];
                    if k != [0, 0] {
                        break k;
                    }
                };
                w.push(WTerm::Trig { comp, amp: eps * rng.gen_range(-1.0..1.0), k, phase: rng.gen_range(0.0..2.0 * PI) });
            }
        }
        let shift = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0];
        w.push(WTerm::Theta { comp: 2, amp: 0.5 * eps, shift, phase: rng.gen_range(0.0..2.0 * PI) });
        if !foliated {
            w.push(WTerm::Theta { comp: 0, amp: 0.5 * eps, shift, phase: rng.gen_range(0.0..2.0 * PI) });
        }
        let tag = if foliated { "" } else { ":nonfoliated" };
        Self::nil(&format!("perturbed:{seed}:{eps}{tag}"), [[1, 0], [0, 1]], [0.0; 2], w)
    }

    pub fn constant(c: V3) -> AnalyticMap {
        AnalyticMap {
            name: format!("constant:{},{},{}", c[0], c[1], c[2]),
            source: Model::heisenberg(),
            target: Model::heisenberg(),
            kind: MapKind::Constant(c),
        }
    }

    pub fn sphere_rotation(scale: f64, c: [f64; 2]) -> Result<AnalyticMap> {
        let s = Model::sphere(scale)?;
        Ok(AnalyticMap {
            name: format!("sphere-rotation:{},{}", c[0], c[1]),
            source: s.clone(),
            target: s,
            kind: MapKind::SphereRotation(c),
        })
    }

    pub fn sphere_twist(scale: f64, eps: f64) -> Result<AnalyticMap> {
        if eps.abs() >= 0.5 {
            return Err(Error::InvalidParam(format!("sphere twist needs |ε| < 1/2, got {eps}")));
        }
        let s = Model::sphere(scale)?;
        Ok(AnalyticMap { name: format!("sphere-twist:{scale},{eps}"), source: s.clone(), target: s, kind: MapKind::SphereTwist(eps) })
    }

    /// The shipped corpus used by the commutation and energy suites.
    pub fn corpus() -> Vec<AnalyticMap> {
        vec![
            Self::identity(),
            Self::fiber_rotation(0.37),
            Self::affine([[2, 0], [0, 1]], [0.0; 2]),
            Self::affine([[2, 1], [1, 1]], [0.25, -0.5]),
            Self::conjugation(),
            Self::vertical_shift(0.3),
            Self::trig(0.1),
            Self::reeb_tilt(0.1),
            Self::perturbed(7, 0.05, false),
            Self::constant([0.2, 0.4, 0.6]),
            Self::sphere_rotation(1.0, [0.0, 0.0]).expect("valid scale"),
            Self::sphere_rotation(2.0, [0.4, -1.1]).expect("valid scale"),
            Self::sphere_twist(1.0, 0.15).expect("valid twist"),
        ]
    }

    /// Induced map on the lattice (nilmanifold maps).
    pub fn hom(&self) -> Option<Hom> {
        match &self.kind {
            MapKind::Nil { a, r, .. } => {
                // r⁻¹·Φ_A(γ)·r = Φ_A(γ) shifted centrally by (Aγ)_x r_y − (Aγ)_y r_x
                let shear = [a[0][0] as f64 * r[1] - a[1][0] as f64 * r[0], a[0][1] as f64 * r[1] - a[1][1] as f64 * r[0]];
                Some(Hom { a: *a, shear })
            }
            MapKind::Constant(_) => Some(Hom { a: [[0, 0]; 2], shear: [0.0; 2] }),
            MapKind::SphereRotation(_) | MapKind::SphereTwist(_) => None,
        }
    }

    pub fn is_foliated(&self) -> bool {
        match &self.kind {
            MapKind::Nil { w, .. } => !w.iter().any(|t| t.depends_on_t() && matches!(t, WTerm::Theta { comp: 0 | 1, .. })),
            _ => true,
        }
    }

    pub fn eval<S: Real>(&self, p: &[S; 3]) -> [S; 3] {
        match &self.kind {
            MapKind::Nil { a, b, w, r } => {
                let det = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) as f64;
                let base = [
                    p[0].scale(a[0][0] as f64) + p[1].scale(a[0][1] as f64),
                    p[0].scale(a[1][0] as f64) + p[1].scale(a[1][1] as f64),
                    p[2].scale(det),
                ];
                let base = heis_mul(&[S::cst(b[0]), S::cst(b[1]), S::cst(0.0)], &base);
                let mut wv = [S::cst(0.0); 3];
                for term in w {
                    let (c, v) = term.eval(p);
                    wv[c] = wv[c] + v;
                }
                let f = heis_mul(&wv, &base);
                if *r == [0.0; 3] {
                    f
                } else {
                    heis_mul(&f, &r.map(S::cst))
                }
            }
            MapKind::Constant(c) => c.map(S::cst),
            MapKind::SphereRotation(c) => [p[0], p[1] + S::cst(c[0]), p[2] + S::cst(c[1])],
            MapKind::SphereTwist(eps) => [
                p[0] + (p[0].scale(2.0).sin() * (p[1] - p[2]).cos()).scale(*eps),
                p[1] + p[2].sin().scale(*eps),
                p[2],
            ],
        }
    }
}

impl FromStr for AnalyticMap {
    type Err = Error;

    /// `identity`, `conjugation`, `fiber-rotation:c`, `vertical-shift:a`,
    /// `trig:eps`, `reeb-tilt:eps`, `affine:a11,a12,a21,a22[,b1,b2]`,
    /// `perturbed:seed:eps[:nonfoliated]`, `constant:x,y,t`,
    /// `sphere-rotation[:scale[,c1,c2]]`, `sphere-twist:[scale,]eps`.
    fn from_str(s: &str) -> Result<AnalyticMap> {
        let bad = || Error::UnknownMap(s.to_string());
        let (head, rest) = match s.trim().split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s.trim(), None),
        };
        let nums = |r: Option<&str>| -> Result<Vec<f64>> {
            r.map(|r| r.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect())
                .unwrap_or(Ok(vec![]))
        };
        let one = |r: Option<&str>| -> Result<f64> {
            match nums(r)?.as_slice() {
                [x] => Ok(*x),
                _ => Err(bad()),
            }
        };
        match head {
            "identity" if rest.is_none() => Ok(Self::identity()),
            "conjugation" if rest.is_none() => Ok(Self::conjugation()),
            "fiber-rotation" => Ok(Self::fiber_rotation(one(rest)?)),
            "vertical-shift" => Ok(Self::vertical_shift(one(rest)?)),
            "trig" => Ok(Self::trig(one(rest)?)),
            "reeb-tilt" => Ok(Self::reeb_tilt(one(rest)?)),
            "affine" => {
                let v = nums(rest)?;
                if !(v.len() == 4 || v.len() == 6) || v[..4].iter().any(|x| x.fract() != 0.0) {
                    return Err(bad());
                }
                let a = [[v[0] as i64, v[1] as i64], [v[2] as i64, v[3] as i64]];
                let b = if v.len() == 6 { [v[4], v[5]] } else { [0.0; 2] };
                Ok(Self::affine(a, b))
            }
            "perturbed" => {
                let parts: Vec<&str> = rest.ok_or_else(bad)?.split(':').collect();
                let (seed, eps) = match parts.as_slice() {
                    [s, e] | [s, e, "nonfoliated"] => (s.parse().map_err(|_| bad())?, e.parse().map_err(|_| bad())?),
                    _ => return Err(bad()),
                };
                Ok(Self::perturbed(seed, eps, parts.len() == 2))
            }
            "constant" => match nums(rest)?.as_slice() {
                [x, y, t] => Ok(Self::constant([*x, *y, *t])),
                _ => Err(bad()),
            },
            "sphere-rotation" => match nums(rest)?.as_slice() {
                [] => Self::sphere_rotation(1.0, [0.0; 2]),
                [s] => Self::sphere_rotation(*s, [0.0; 2]),
                [s, a, b] => Self::sphere_rotation(*s, [*a, *b]),
                _ => Err(bad()),
            },
            "sphere-twist" => match nums(rest)?.as_slice() {
                [e] => Self::sphere_twist(1.0, *e).map_err(|_| bad()),
                [s, e] => Self::sphere_twist(*s, *e).map_err(|_| bad()),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

fn cj(v: f64) -> Jet {
    Jet::constant(v)
}

/// Exact value and first-order frame coefficients only.
pub fn analytic_d1(map: &AnalyticMap, p: &V3) -> Result<(V3, M3)> {
    if !map.source.contains(p) {
        return Err(Error::OutsideDomain { model: map.source.name(), point: *p });
    }
    let x = Jet::point(*p);
    let fj = map.eval(&x);
    let fv = fj.map(|v| v.value());
    let e = map.source.frame(p);
    let w = map.target.coframe(&fv);
    let mut d1 = [[0.0; 3]; 3];
    for b in 0..3 {
        let ef: V3 = std::array::from_fn(|i| {
            let g = fj[i].grad();
            g[0] * e[b][0] + g[1] * e[b][1] + g[2] * e[b][2]
        });
        for a in 0..3 {
            d1[a][b] = w[a][0] * ef[0] + w[a][1] * ef[1] + w[a][2] * ef[2];
        }
    }
    Ok((fv, d1))
}

/// Exact jet of a closed-form map, including third covariant derivatives.
pub fn analytic_jet(map: &AnalyticMap, p: &V3) -> Result<MapJet> {
    if !map.source.contains(p) {
        return Err(Error::OutsideDomain { model: map.source.name(), point: *p });
    }
    let x = Jet::point(*p);
    let fj = map.eval(&x);
    let fv = fj.map(|v| v.value());
    if !map.target.contains(&fv) {
        return Err(Error::TargetOutsideChart { node: 0, point: fv });
    }
    let e = map.source.frame(&x);
    let w = map.target.coframe(&fj);
    let g = map.source.gamma(&x);
    let tg = map.target.gamma(&fj);

    let mut big_f = [[cj(0.0); 3]; 3];
    for b in 0..3 {
        let ef: [Jet; 3] = std::array::from_fn(|i| fj[i].along(&e[b]));
        for a in 0..3 {
            big_f[a][b] = w[a][0] * ef[0] + w[a][1] * ef[1] + w[a][2] * ef[2];
        }
    }
    // β^a_{BC} = e_C(F^a_B) + Γ̃^a_{cd} F^c_C F^d_B − Γ^D_{CB} F^a_D
    let mut beta = [[[cj(0.0); 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                let mut s = big_f[a][b].along(&e[c]);
                for k in 0..3 {
                    for l in 0..3 {
                        s = s + tg[k][l][a] * big_f[k][c] * big_f[l][b];
                    }
                    s = s - g[c][b][k] * big_f[a][k];
                }
                beta[a][b][c] = s;
            }
        }
    }
    let mut d3 = [[[[0.0; 3]; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for d in 0..3 {
                    let mut s = beta[a][b][c].along(&e[d]);
                    for k in 0..3 {
                        for l in 0..3 {
                            s = s + tg[k][l][a] * big_f[k][d] * beta[l][b][c];
                        }
                        s = s - g[d][b][k] * beta[a][k][c] - g[d][c][k] * beta[a][b][k];
                    }
                    d3[a][b][c][d] = s.value();
                }
            }
        }
    }
    Ok(MapJet {
        point: *p,
        f: fv,
        d1: big_f.map(|r| r.map(|v| v.value())),
        d2: beta.map(|r| r.map(|c| c.map(|v| v.value()))),
        d3: Some(d3),
    })
}

// ---------------------------------------------------------------------------
// Discrete maps

/// Map from the nilmanifold grid to the nilmanifold, stored as lifts in the
/// Heisenberg group at the canonical nodes. Values at translated nodes follow
/// the deck rule `f(p·γ) = f(p)·φ(γ)` with `φ(a, b, c) = (A(a, b), det A · c)`.
#[derive(Clone, Debug)]
pub struct MapField {
    pub grid: Arc<Grid>,
    pub target: Model,
    pub values: Vec<V3>,
    pub hom: Hom,
}

/// Deck homomorphism `φ(a, b, c) = (A(a, b), det A · c + shear·(a, b))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hom {
    pub a: [[i64; 2]; 2],
    pub shear: [f64; 2],
}

impl Hom {
    pub fn identity() -> Hom {
        Hom { a: [[1, 0], [0, 1]], shear: [0.0; 2] }
    }

    pub fn phi(&self, deck: [i64; 3]) -> V3 {
        let a = &self.a;
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [
            (a[0][0] * deck[0] + a[0][1] * deck[1]) as f64,
            (a[1][0] * deck[0] + a[1][1] * deck[1]) as f64,
            (det * deck[2]) as f64 + self.shear[0] * deck[0] as f64 + self.shear[1] * deck[1] as f64,
        ]
    }
}

impl MapField {
    pub fn new(grid: &Arc<Grid>, values: Vec<V3>, hom: Hom) -> Result<MapField> {
        if !grid.is_nil() {
            return Err(Error::Unsupported("discrete maps are implemented for the nilmanifold grid".into()));
        }
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if let Some(n) = values.iter().position(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::TargetOutsideChart { node: n, point: values[n] });
        }
        Ok(MapField { grid: grid.clone(), target: Model::heisenberg(), values, hom })
    }

    pub fn from_analytic(grid: &Arc<Grid>, map: &AnalyticMap) -> Result<MapField> {
        let hom = match (map.hom(), map.source.kind, map.target.kind) {
            (Some(h), ModelKind::HeisenbergNilmanifold, ModelKind::HeisenbergNilmanifold) => h,
            _ => return Err(Error::Unsupported(format!("map `{}` is not a nilmanifold self-map", map.name))),
        };
        let values = (0..grid.len()).into_par_iter().map(|n| map.eval(&grid.coords(n))).collect();
        MapField::new(grid, values, hom)
    }

    pub fn phi(&self, deck: [i64; 3]) -> V3 {
        self.hom.phi(deck)
    }

    pub fn lift(&self, idx: usize, deck: [i64; 3]) -> V3 {
        if deck == [0; 3] {
            self.values[idx]
        } else {
            heis_mul(&self.values[idx], &self.phi(deck))
        }
    }

    /// Frame coefficients `F^a_B = W̃^a_i(f) D_B f^i` at node `n`.
    fn d1_at(&self, n: usize) -> M3 {
        let f0 = self.values[n];
        let w = self.target.coframe(&f0);
        let mut out = [[0.0; 3]; 3];
        for b in 0..3 {
            let mut df = [0.0; 3];
            self.grid.taps(n, b, |q, deck, _, wt| {
                let v = self.lift(q, deck);
                for i in 0..3 {
                    df[i] += wt * (v[i] - f0[i]);
                }
            });
            for a in 0..3 {
                out[a][b] = w[a][0] * df[0] + w[a][1] * df[1] + w[a][2] * df[2];
            }
        }
        out
    }

    pub fn d1_all(&self) -> Vec<M3> {
        (0..self.grid.len()).into_par_iter().map(|n| self.d1_at(n)).collect()
    }

    /// Jets at every node. On the flat model both connections vanish in the
    /// frames, so `β^a_{BC} = D_C F^a_B`; `F` is lattice invariant, which keeps
    /// the second difference consistent across the seams.
    pub fn jets(&self) -> Vec<MapJet> {
        let d1 = self.d1_all();
        let comps: Vec<Vec<f64>> = (0..9).map(|k| d1.iter().map(|m| m[k / 3][k % 3]).collect()).collect();
        let diffs: Vec<[Vec<f64>; 3]> = comps.par_iter().map(|u| self.grid.frame_diffs(u, false)).collect();
        (0..self.grid.len())
            .into_par_iter()
            .map(|n| {
                let mut d2 = [[[0.0; 3]; 3]; 3];
                for k in 0..9 {
                    for c in 0..3 {
                        d2[k / 3][k % 3][c] = diffs[k][c][n];
                    }
                }
                MapJet { point: self.grid.coords(n), f: self.values[n], d1: d1[n], d2, d3: None }
            })
            .collect()
    }

    pub fn jet_at(&self, node: usize) -> Result<MapJet> {
        if node >= self.grid.len() {
            return Err(Error::InvalidGrid(format!("node {node} out of range")));
        }
        let mut d2 = [[[0.0; 3]; 3]; 3];
        for c in 0..3 {
            self.grid.taps(node, c, |q, _, _, wt| {
                let fq = self.d1_at(q);
                for a in 0..3 {
                    for b in 0..3 {
                        d2[a][b][c] += wt * fq[a][b];
                    }
                }
            });
        }
        Ok(MapJet { point: self.grid.coords(node), f: self.values[node], d1: self.d1_at(node), d2, d3: None })
    }
}

// ---------------------------------------------------------------------------
// Energies

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub e_hh: f64,
    pub e_lh: f64,
    pub e_hl: f64,
    pub e_ll: f64,
    pub d_bar_sq: f64,
    pub d_sq: f64,
    pub k: f64,
}

/// Same as [`energy_density`] from the first-order coefficients alone, in real arithmetic.
pub fn energy_density_d1(f: &M3) -> EnergyBreakdown {
    let e_hh = 0.5 * (f[1][1] * f[1][1] + f[1][2] * f[1][2] + f[2][1] * f[2][1] + f[2][2] * f[2][2]);
    let k = f[1][1] * f[2][2] - f[1][2] * f[2][1];
    EnergyBreakdown {
        e_hh,
        e_lh: 0.5 * (f[1][0] * f[1][0] + f[2][0] * f[2][0]),
        e_hl: 0.5 * (f[0][1] * f[0][1] + f[0][2] * f[0][2]),
        e_ll: 0.5 * f[0][0] * f[0][0],
        d_bar_sq: 0.25 * ((f[1][1] - f[2][2]).powi(2) + (f[2][1] + f[1][2]).powi(2)),
        d_sq: 0.25 * ((f[1][1] + f[2][2]).powi(2) + (f[2][1] - f[1][2]).powi(2)),
        k,
    }
}

pub fn energy_density(jet: &MapJet) -> EnergyBreakdown {
    let c = jet.complex().c1;
    let f = &jet.d1;
    EnergyBreakdown {
        e_hh: 0.5 * (f[1][1] * f[1][1] + f[1][2] * f[1][2] + f[2][1] * f[2][1] + f[2][2] * f[2][2]),
        e_lh: c[1][0].norm_sqr(),
        e_hl: c[0][1].norm_sqr(),
        e_ll: 0.5 * c[0][0].re * c[0][0].re,
        d_bar_sq: c[1][2].norm_sqr(),
        d_sq: c[1][1].norm_sqr(),
        k: c[1][1].norm_sqr() - c[1][2].norm_sqr(),
    }
}

/// Integrated energies; `E′ = ∫|∂f|²`, `E″ = ∫|∂̄f|²`, `K = E′ − E″`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Energies {
    #[serde(rename = "E_HH")]
    pub e_hh: f64,
    #[serde(rename = "E_LH")]
    pub e_lh: f64,
    #[serde(rename = "E_HL")]
    pub e_hl: f64,
    #[serde(rename = "E_LL")]
    pub e_ll: f64,
    #[serde(rename = "E_prime")]
    pub e_prime: f64,
    #[serde(rename = "E_dprime")]
    pub e_dprime: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

pub fn integrate_densities(grid: &Grid, dens: &[EnergyBreakdown]) -> Energies {
    let int = |g: fn(&EnergyBreakdown) -> f64| grid.integrate_slice(&dens.iter().map(g).collect::<Vec<_>>());
    let e_prime = int(|d| d.d_sq);
    let e_dprime = int(|d| d.d_bar_sq);
    Energies {
        e_hh: int(|d| d.e_hh),
        e_lh: int(|d| d.e_lh),
        e_hl: int(|d| d.e_hl),
        e_ll: int(|d| d.e_ll),
        e_prime,
        e_dprime,
        k: e_prime - e_dprime,
    }
}

pub fn energies(f: &MapField) -> Energies {
    let dens: Vec<EnergyBreakdown> = f.d1_all().iter().map(|d1| energy_density(&d1_jet(d1))).collect();
    integrate_densities(&f.grid, &dens)
}

/// Energies of a closed-form map by quadrature of its exact densities.
pub fn energies_analytic(map: &AnalyticMap, grid: &Grid) -> Result<Energies> {
    let dens = (0..grid.len())
        .into_par_iter()
        .map(|n| analytic_d1(map, &grid.coords(n)).map(|(_, d1)| energy_density(&d1_jet(&d1))))
        .collect::<Result<Vec<_>>>()?;
    Ok(integrate_densities(grid, &dens))
}

fn d1_jet(d1: &M3) -> MapJet {
    MapJet { point: [0.0; 3], f: [0.0; 3], d1: *d1, d2: [[[0.0; 3]; 3]; 3], d3: None }
}

/// Coordinate components of `dθ̃` at `q`: `Ω_ij = ∂_i θ̃_j − ∂_j θ̃_i`.
fn dtheta_coords(model: &Model, q: &V3) -> M3 {
    let th = model.coframe(&Jet::point(*q))[0];
    let g = th.map(|c| c.grad());
    std::array::from_fn(|i| std::array::from_fn(|j| g[j][i] - g[i][j]))
}

/// `⟨ω^M, f*ω^N⟩ = dθ̃(df e_1, df e_2)` evaluated on coordinate differentials.
fn pullback_pairing(target: &Model, f: &V3, x: &V3, y: &V3) -> f64 {
    let om = dtheta_coords(target, f);
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += om[i][j] * x[i] * y[j];
        }
    }
    s
}

/// `max |k − ⟨ω^M, f*ω^N⟩|` over the nodes: `k` from the complex coefficients,
/// the pairing from the coordinate pullback of `dθ̃`.
pub fn pullback_residual(f: &MapField) -> f64 {
    (0..f.grid.len())
        .into_par_iter()
        .map(|n| {
            let k = energy_density(&d1_jet(&f.d1_at(n))).k;
            let f0 = f.values[n];
            let mut dx = [[0.0; 3]; 2];
            for b in 1..3 {
                f.grid.taps(n, b, |q, deck, _, wt| {
                    let v = f.lift(q, deck);
                    for i in 0..3 {
                        dx[b - 1][i] += wt * (v[i] - f0[i]);
                    }
                });
            }
            (k - pullback_pairing(&f.target, &f0, &dx[0], &dx[1])).abs()
        })
        .reduce(|| 0.0, f64::max)
}

pub fn pullback_residual_analytic(map: &AnalyticMap, p: &V3) -> Result<f64> {
    let jet = analytic_jet(map, p)?;
    let x = Jet::point(*p);
    let fj = map.eval(&x);
    let e = map.source.frame(&x);
    let dx: [V3; 2] = std::array::from_fn(|b| std::array::from_fn(|i| fj[i].along(&e[b + 1]).value()));
    Ok((energy_density(&jet).k - pullback_pairing(&map.target, &jet.f, &dx[0], &dx[1])).abs())
}

// ---------------------------------------------------------------------------
// Tension and defects

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TensionVector {
    /// `ẽ_1`, `ẽ_2` components of `τ_{H,H̃}`.
    pub tau_hh: [f64; 2],
    /// ξ̃ component, `τ_{H,L̃}`.
    pub tau_hl: f64,
    /// `(τ_{H,L̃}, τ_{H,H̃})` as one target vector.
    pub tau_h: V3,
    pub torsion_term: f64,
    pub full_trace: V3,
}

impl TensionVector {
    pub fn tau_hh_norm(&self) -> f64 {
        self.tau_hh[0].hypot(self.tau_hh[1])
    }

    /// Corollary form `f^α_{kk̄} + f^α_{k̄k}` of the horizontal tension.
    pub fn tau_alpha(&self) -> C64 {
        C64::new(self.tau_hh[0], self.tau_hh[1]) * FRAC_1_SQRT_2
    }
}

pub fn tension_of(jet: &MapJet) -> TensionVector {
    let tr = |a: usize| jet.d2[a][1][1] + jet.d2[a][2][2];
    let tau_h = [tr(0), tr(1), tr(2)];
    TensionVector {
        tau_hh: [tau_h[1], tau_h[2]],
        tau_hl: tau_h[0],
        tau_h,
        // the targets are Sasakian, so f*θ̃ ⊗ f*τ̃ vanishes identically
        torsion_term: 0.0,
        full_trace: std::array::from_fn(|a| tau_h[a] + jet.d2[a][0][0]),
    }
}

pub fn tension(f: &MapField, node: usize) -> Result<TensionVector> {
    Ok(tension_of(&f.jet_at(node)?))
}

pub fn tensions(jets: &[MapJet]) -> Vec<TensionVector> {
    jets.par_iter().map(tension_of).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Defects {
    pub holo: f64,
    pub antiholo: f64,
    pub foliated: f64,
    pub pluriharmonic: f64,
    pub horizontally_constant: f64,
}

impl Defects {
    fn merge(self, o: Defects) -> Defects {
        Defects {
            holo: self.holo.max(o.holo),
            antiholo: self.antiholo.max(o.antiholo),
            foliated: self.foliated.max(o.foliated),
            pluriharmonic: self.pluriharmonic.max(o.pluriharmonic),
            horizontally_constant: self.horizontally_constant.max(o.horizontally_constant),
        }
    }
}

pub fn jet_defects(jet: &MapJet) -> Defects {
    let c = jet.complex();
    let f = &jet.d1;
    Defects {
        holo: c.c1[1][2].norm(),
        antiholo: c.c1[1][1].norm(),
        foliated: c.c1[1][0].norm(),
        pluriharmonic: c.c2[1][1][2].norm().max(c.c2[1][2][1].norm()),
        horizontally_constant: (f[1][1].powi(2) + f[1][2].powi(2) + f[2][1].powi(2) + f[2][2].powi(2)).sqrt(),
    }
}

pub fn defects_of(jets: &[MapJet]) -> Defects {
    jets.par_iter().map(jet_defects).reduce(Defects::default, Defects::merge)
}

pub fn defects(f: &MapField) -> Defects {
    defects_of(&f.jets())
}

/// Foliation defect only; cheaper than full jets.
pub fn foliated_defect(f: &MapField) -> f64 {
    f.d1_all().par_iter().map(|d| d[1][0].hypot(d[2][0]) * FRAC_1_SQRT_2).reduce(|| 0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Commutation relations (Sasakian source and target)

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CommutationReport {
    /// `f^α_{jl} − f^α_{lj}` (and the conjugate-index version).
    pub alpha_symmetric: f64,
    /// `f^α_{j̄l} − f^α_{lj̄} + i f^α_0 δ_{lj}`.
    pub alpha_mixed: f64,
    /// `f^α_{0j} − f^α_{j0}`, `f^α_{0j̄} − f^α_{j̄0}`.
    pub alpha_reeb: f64,
    /// `f^0_{jl} − f^0_{lj} − i(f^α_j f^ᾱ_l − f^ᾱ_j f^α_l)`.
    pub zero_symmetric: f64,
    /// `f^0_{jl̄} − f^0_{l̄j} − i f^0_0 δ_{jl} − i(f^ᾱ_j f^α_{l̄} − f^α_j f^ᾱ_{l̄})`.
    pub zero_mixed: f64,
    /// `f^0_{j0} − f^0_{0j} − i(f^α_0 f^ᾱ_j − f^ᾱ_0 f^α_j)` and its conjugate-index version.
    pub zero_reeb: f64,
    /// `f^α_{kk̄} − f^α_{k̄k} − m i f^α_0`.
    pub trace_identity: f64,
}

impl CommutationReport {
    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("alpha-symmetric", self.alpha_symmetric),
            ("alpha-mixed", self.alpha_mixed),
            ("alpha-reeb", self.alpha_reeb),
            ("zero-symmetric", self.zero_symmetric),
            ("zero-mixed", self.zero_mixed),
            ("zero-reeb", self.zero_reeb),
            ("trace-identity", self.trace_identity),
        ]
    }

    pub fn max(&self) -> f64 {
        self.entries().iter().fold(0.0, |m, e| m.max(e.1))
    }

    fn merge(self, o: CommutationReport) -> CommutationReport {
        CommutationReport {
            alpha_symmetric: self.alpha_symmetric.max(o.alpha_symmetric),
            alpha_mixed: self.alpha_mixed.max(o.alpha_mixed),
            alpha_reeb: self.alpha_reeb.max(o.alpha_reeb),
            zero_symmetric: self.zero_symmetric.max(o.zero_symmetric),
            zero_mixed: self.zero_mixed.max(o.zero_mixed),
            zero_reeb: self.zero_reeb.max(o.zero_reeb),
            trace_identity: self.trace_identity.max(o.trace_identity),
        }
    }
}

pub fn jet_commutation(jet: &MapJet) -> CommutationReport {
    let ComplexJet { c1, c2, .. } = jet.complex();
    let i = C64::i();
    // slots: 0 = ξ, 1 = j (α), 2 = j̄ (ᾱ); m = 1, so j = l = k = 1
    let (j, jb) = (1, 2);
    let (al, alb) = (1, 2);
    let mut zero_sym = 0.0f64;
    let mut alpha_sym = 0.0f64;
    for (x, y) in [(j, j), (jb, jb)] {
        alpha_sym = alpha_sym.max((c2[al][x][y] - c2[al][y][x]).norm());
        let rhs = i * (c1[al][x] * c1[alb][y] - c1[alb][x] * c1[al][y]);
        zero_sym = zero_sym.max((c2[0][x][y] - c2[0][y][x] - rhs).norm());
    }
    let alpha_mixed = (c2[al][jb][j] - c2[al][j][jb] + i * c1[al][0]).norm();
    let alpha_reeb = (c2[al][0][j] - c2[al][j][0]).norm().max((c2[al][0][jb] - c2[al][jb][0]).norm());
    let zero_mixed = (c2[0][j][jb] - c2[0][jb][j] - i * c1[0][0] - i * (c1[alb][j] * c1[al][jb] - c1[al][j] * c1[alb][jb])).norm();
    let mut zero_reeb = 0.0f64;
    for x in [j, jb] {
        let rhs = i * (c1[al][0] * c1[alb][x] - c1[alb][0] * c1[al][x]);
        zero_reeb = zero_reeb.max((c2[0][x][0] - c2[0][0][x] - rhs).norm());
    }
    let trace_identity = (c2[al][j][jb] - c2[al][jb][j] - i * c1[al][0]).norm();
    CommutationReport {
        alpha_symmetric: alpha_sym,
        alpha_mixed,
        alpha_reeb,
        zero_symmetric: zero_sym,
        zero_mixed,
        zero_reeb,
        trace_identity,
    }
}

pub fn commutation_residuals(f: &MapField) -> CommutationReport {
    f.jets().par_iter().map(jet_commutation).reduce(CommutationReport::default, CommutationReport::merge)
}

pub fn commutation_residuals_analytic(map: &AnalyticMap, points: &[V3]) -> Result<CommutationReport> {
    let mut r = CommutationReport::default();
    for p in points {
        r = r.merge(jet_commutation(&analytic_jet(map, p)?));
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Paneitz operator and the Bochner formula

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Paneitz {
    /// `P^α_1 = f^α_{1̄11}` as (re, im).
    pub p: [f64; 2],
}

pub fn paneitz(jet: &MapJet) -> Result<Paneitz> {
    let c3 = jet.complex().c3.ok_or(Error::MissingThirdOrder)?;
    let v = c3[1][2][1][1];
    Ok(Paneitz { p: [v.re, v.im] })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BochnerTerms {
    pub lhs: f64,
    pub beta_sq: f64,
    pub grad_tension: f64,
    pub mixed: f64,
    pub residual: f64,
}

/// Both sides of the sub-Laplacian Bochner formula for `e_{H,H̃}` at `p`,
/// flat source and target (torsion and curvature terms vanish).
pub fn bochner_terms(map: &AnalyticMap, p: &V3) -> Result<BochnerTerms> {
    if map.source.kind != ModelKind::HeisenbergNilmanifold || map.target.kind != ModelKind::HeisenbergNilmanifold {
        return Err(Error::Unsupported("the Bochner check is implemented for the flat model only".into()));
    }
    let jet = analytic_jet(map, p)?;
    let d3 = jet.d3.ok_or(Error::MissingThirdOrder)?;

    // left side: Δ_H e_{H,H̃} straight from the closed form
    let x = Jet::point(*p);
    let fj = map.eval(&x);
    let e = map.source.frame(&x);
    let w = map.target.coframe(&fj);
    let mut dens = cj(0.0);
    for a in 1..3 {
        for b in 1..3 {
            let ef: [Jet; 3] = std::array::from_fn(|i| fj[i].along(&e[b]));
            let fab = w[a][0] * ef[0] + w[a][1] * ef[1] + w[a][2] * ef[2];
            dens = dens + fab * fab * cj(0.5);
        }
    }
    let lhs: f64 = (1..3).map(|b| dens.along(&e[b]).along(&e[b]).value()).sum();

    let mut beta_sq = 0.0;
    let mut grad_tension = 0.0;
    for a in 1..3 {
        for b in 1..3 {
            for c in 1..3 {
                beta_sq += jet.d2[a][b][c].powi(2);
                grad_tension += jet.d1[a][c] * d3[a][b][b][c];
            }
        }
    }
    let ComplexJet { c1, c2, .. } = jet.complex();
    let (j, jb, al, alb) = (1, 2, 1, 2);
    let m = c1[alb][j] * c2[al][jb][0] + c1[al][j] * c2[alb][jb][0] - c1[al][jb] * c2[alb][j][0] - c1[alb][jb] * c2[al][j][0];
    let mixed = (C64::new(0.0, -2.0) * m).re;
    Ok(BochnerTerms { lhs, beta_sq, grad_tension, mixed, residual: lhs - beta_sq - grad_tension - mixed })
}

pub fn bochner_residual(map: &AnalyticMap, p: &V3) -> Result<f64> {
    Ok(bochner_terms(map, p)?.residual.abs())
}

// ---------------------------------------------------------------------------
// Homotopy invariance

#[derive(Clone, Debug, Serialize)]
pub struct HomotopyReport {
    pub k: Vec<f64>,
    pub e_prime: Vec<f64>,
    pub e_dprime: Vec<f64>,
    pub k_drift: f64,
    pub e_prime_drift: f64,
    pub e_dprime_drift: f64,
}

pub fn homotopy_invariance_check(family: &[MapField], foliated: bool, tol: f64) -> Result<HomotopyReport> {
    if family.is_empty() {
        return Err(Error::Empty("homotopy family".into()));
    }
    let mut rep = HomotopyReport { k: vec![], e_prime: vec![], e_dprime: vec![], k_drift: 0.0, e_prime_drift: 0.0, e_dprime_drift: 0.0 };
    for (idx, f) in family.iter().enumerate() {
        if foliated {
            let d = foliated_defect(f);
            if d > tol {
                return Err(Error::NotFoliated { index: idx, defect: d });
            }
        }
        let e = energies(f);
        rep.k.push(e.k);
        rep.e_prime.push(e.e_prime);
        rep.e_dprime.push(e.e_dprime);
    }
    let drift = |v: &[f64]| v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max);
    rep.k_drift = drift(&rep.k);
    rep.e_prime_drift = drift(&rep.e_prime);
    rep.e_dprime_drift = drift(&rep.e_dprime);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_round_trip() {
        let d1 = [[0.3, -1.2, 0.7], [2.0, 0.1, -0.4], [0.5, 1.5, 0.9]];
        let j = d1_jet(&d1);
        let back = real_d1(&j.complex().c1);
        for a in 0..3 {
            for b in 0..3 {
                assert!((back[a][b] - d1[a][b]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn real_densities_match_complex() {
        let d1 = [[0.3, -1.2, 0.7], [2.0, 0.1, -0.4], [0.5, 1.5, 0.9]];
        let (a, b) = (energy_density(&d1_jet(&d1)), energy_density_d1(&d1));
        let pairs = [(a.e_hh, b.e_hh), (a.e_lh, b.e_lh), (a.e_hl, b.e_hl), (a.e_ll, b.e_ll), (a.d_sq, b.d_sq), (a.d_bar_sq, b.d_bar_sq), (a.k, b.k)];
        for (x, y) in pairs {
            assert!((x - y).abs() < 1e-14, "{x} vs {y}");
        }
    }

    #[test]
    fn parse_specs() {
        for s in ["identity", "fiber-rotation:0.5", "affine:2,0,0,1", "affine:1,1,0,1,0.5,0.2", "perturbed:3:0.1:nonfoliated", "sphere-rotation:2,0.1,0.2"] {
            assert!(s.parse::<AnalyticMap>().is_ok(), "{s}");
        }
        for s in ["affine:1.5,0,0,1", "nope", "identity:3", "perturbed:x:1"] {
            assert!(matches!(s.parse::<AnalyticMap>(), Err(Error::UnknownMap(_))), "{s}");
        }
        assert!(!"perturbed:3:0.1:nonfoliated".parse::<AnalyticMap>().unwrap().is_foliated());
    }
}
