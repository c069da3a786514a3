//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] is a polynomial in three perturbation variables, truncated at
//! total degree 3. Evaluating closed-form geometry on `p + δ` gives exact
//! partial derivatives up to third order, which is how connection
//! coefficients, curvature and analytic map jets avoid finite differences.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

/// Scalar type the closed-form model and map formulas are written against.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn val(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
    fn tan(self) -> Self {
        self.sin() / self.cos()
    }
    fn cot(self) -> Self {
        self.cos() / self.sin()
    }
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn val(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

pub const NMONO: usize = 20;
pub const MAX_ORDER: i8 = 3;

struct Tables {
    exps: [[u8; 3]; NMONO],
    /// (i, j, k): monomial i times monomial j is monomial k
    products: Vec<(u8, u8, u8)>,
    /// shift[v][k]: index of monomial k + e_v, if within degree 3
    shift: [[Option<u8>; NMONO]; 3],
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut exps = [[0u8; 3]; NMONO];
        let mut n = 0;
        for deg in 0..=3u8 {
            for a in (0..=deg).rev() {
                for b in (0..=deg - a).rev() {
                    exps[n] = [a, b, deg - a - b];
                    n += 1;
                }
            }
        }
        let find = |e: [u8; 3]| exps.iter().position(|x| *x == e).map(|p| p as u8);
        let mut products = Vec::new();
        for i in 0..NMONO {
            for j in 0..NMONO {
                let e = [
                    exps[i][0] + exps[j][0],
                    exps[i][1] + exps[j][1],
                    exps[i][2] + exps[j][2],
                ];
                if e.iter().map(|&x| x as u32).sum::<u32>() <= 3 {
                    products.push((i as u8, j as u8, find(e).unwrap()));
                }
            }
        }
        let mut shift = [[None; NMONO]; 3];
        for v in 0..3 {
            for k in 0..NMONO {
                let mut e = exps[k];
                e[v] += 1;
                shift[v][k] = find(e);
            }
        }
        Tables { exps, products, shift }
    })
}

/// Degree of monomial `k` in the coefficient layout.
pub fn mono_degree(k: usize) -> u8 {
    let e = tables().exps[k];
    e[0] + e[1] + e[2]
}

pub fn mono_index(e: [u8; 3]) -> usize {
    tables().exps.iter().position(|x| *x == e).expect("degree <= 3")
}

/// Taylor coefficients `c[k]` of `Σ c_k δ^{e_k}`; `ord` is the highest total
/// degree whose coefficients are trustworthy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [f64; NMONO],
    pub ord: i8,
}

impl Jet {
    pub fn constant(v: f64) -> Jet {
        let mut c = [0.0; NMONO];
        c[0] = v;
        Jet { c, ord: MAX_ORDER }
    }

    /// The coordinate function `v0 + δ_axis`.
    pub fn variable(v0: f64, axis: usize) -> Jet {
        let mut j = Jet::constant(v0);
        j.c[1 + axis] = 1.0;
        j
    }

    pub fn point(p: [f64; 3]) -> [Jet; 3] {
        [Jet::variable(p[0], 0), Jet::variable(p[1], 1), Jet::variable(p[2], 2)]
    }

    pub fn value(&self) -> f64 {
        debug_assert!(self.ord >= 0, "jet has no valid order left");
        self.c[0]
    }

    /// Partial derivative with respect to perturbation variable `v`.
    pub fn d(&self, v: usize) -> Jet {
        let t = tables();
        let mut c = [0.0; NMONO];
        for (k, slot) in c.iter_mut().enumerate() {
            if let Some(s) = t.shift[v][k] {
                *slot = (t.exps[s as usize][v] as f64) * self.c[s as usize];
            }
        }
        Jet { c, ord: self.ord - 1 }
    }

    pub fn grad(&self) -> [f64; 3] {
        debug_assert!(self.ord >= 1);
        [self.c[1], self.c[2], self.c[3]]
    }

    /// Derivative along the vector with (jet-valued) coordinate components `v`.
    pub fn along(&self, v: &[Jet; 3]) -> Jet {
        self.d(0) * v[0] + self.d(1) * v[1] + self.d(2) * v[2]
    }

    /// `g(a + δ)` from the value and first three derivatives of `g` at `a`.
    fn compose(&self, g: [f64; 4]) -> Jet {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let mut out = Jet::constant(g[0]);
        for k in 1..NMONO {
            out.c[k] = g[1] * delta.c[k] + 0.5 * g[2] * d2.c[k] + g[3] / 6.0 * d3.c[k];
        }
        out.ord = self.ord;
        out
    }

    pub fn recip(self) -> Jet {
        let a = self.c[0];
        self.compose([1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a), -6.0 / (a * a * a * a)])
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(o.c.iter()) {
            *x += y;
        }
        Jet { c, ord: self.ord.min(o.ord) }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(o.c.iter()) {
            *x -= y;
        }
        Jet { c, ord: self.ord.min(o.ord) }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        let mut c = self.c;
        for x in c.iter_mut() {
            *x = -*x;
        }
        Jet { c, ord: self.ord }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; NMONO];
        for &(i, j, k) in &tables().products {
            c[k as usize] += self.c[i as usize] * o.c[j as usize];
        }
        Jet { c, ord: self.ord.min(o.ord) }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Real for Jet {
    fn cst(v: f64) -> Self {
        Jet::constant(v)
    }
    fn val(&self) -> f64 {
        self.value()
    }
    fn sin(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([s, c, -s, -c])
    }
    fn cos(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([c, -s, -c, s])
    }
    fn exp(self) -> Self {
        let e = self.c[0].exp();
        self.compose([e, e, e, e])
    }
    fn sqrt(self) -> Self {
        let r = self.c[0].sqrt();
        let a = self.c[0];
        self.compose([r, 0.5 / r, -0.25 / (r * a), 0.375 / (r * a * a)])
    }
    fn scale(self, k: f64) -> Self {
        let mut c = self.c;
        for x in c.iter_mut() {
            *x *= k;
        }
        Jet { c, ord: self.ord }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_graded() {
        assert_eq!(mono_index([0, 0, 0]), 0);
        assert_eq!(mono_index([1, 0, 0]), 1);
        assert_eq!(mono_index([0, 1, 0]), 2);
        assert_eq!(mono_index([0, 0, 1]), 3);
        assert_eq!(mono_degree(19), 3);
    }

    #[test]
    fn product_rule_and_orders() {
        let [x, y, _] = Jet::point([0.3, -0.7, 0.1]);
        let f = x * x * y;
        // ∂x∂y(x²y) = 2x
        assert!((f.d(0).d(1).value() - 0.6).abs() < 1e-15);
        assert_eq!(f.d(0).d(1).ord, 1);
        // ∂x³ of x²y vanishes
        assert_eq!(f.d(0).d(0).d(0).value(), 0.0);
    }

    #[test]
    fn transcendental_third_derivatives() {
        let [x, y, z] = Jet::point([0.4, 0.2, -0.3]);
        let f = (x * y + z).sin() * (x - z).exp() / (y + Jet::cst(2.0)).sqrt();
        let h = 1e-3;
        let g = |a: f64, b: f64, c: f64| (a * b + c).sin() * (a - c).exp() / (b + 2.0).sqrt();
        // ∂x∂y∂z by nested central differences
        let mut fd = 0.0;
        for (sx, sy, sz) in [
            (1., 1., 1.),
            (1., 1., -1.),
            (1., -1., 1.),
            (1., -1., -1.),
            (-1., 1., 1.),
            (-1., 1., -1.),
            (-1., -1., 1.),
            (-1., -1., -1.),
        ] {
            fd += sx * sy * sz * g(0.4 + sx * h, 0.2 + sy * h, -0.3 + sz * h);
        }
        fd /= 8.0 * h * h * h;
        let ad = f.d(0).d(1).d(2).value();
        assert!((ad - fd).abs() < 1e-5, "{ad} vs {fd}");
    }

    #[test]
    fn division_round_trip() {
        let [x, y, z] = Jet::point([1.3, 0.5, 0.8]);
        let a = x * y + z.cos();
        let b = (a / (x + y * z)) * (x + y * z);
        for k in 0..NMONO {
            assert!((a.c[k] - b.c[k]).abs() < 1e-13);
        }
    }
}
