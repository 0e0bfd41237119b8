//! Second-order forward-mode jets.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to up to [`MAX_DIM`] chart coordinates. Arithmetic on jets applies
//! the product and chain rules, so any component function written in terms of
//! jets yields exact first and second partial derivatives.

use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Largest supported chart dimension.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; MAX_DIM],
    pub h: [[f64; MAX_DIM]; MAX_DIM],
}

impl Default for Jet {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Self::constant(v)
    }
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Self {
            v,
            d: [0.0; MAX_DIM],
            h: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    /// The coordinate function `x_index` evaluated at `v`.
    pub fn var(v: f64, index: usize) -> Self {
        let mut j = Self::constant(v);
        j.d[index] = 1.0;
        j
    }

    /// Seeds every coordinate of `p` as an independent variable.
    pub fn seed(p: &[f64]) -> Vec<Jet> {
        p.iter().enumerate().map(|(i, &x)| Jet::var(x, i)).collect()
    }

    /// Applies a scalar function with value `f0`, first derivative `f1` and
    /// second derivative `f2` at `self.v`.
    #[inline]
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(f0);
        for a in 0..MAX_DIM {
            out.d[a] = f1 * self.d[a];
        }
        for a in 0..MAX_DIM {
            for b in 0..MAX_DIM {
                out.h[a][b] = f1 * self.h[a][b] + f2 * self.d[a] * self.d[b];
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(&self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(&self, n: i32) -> Self {
        match n {
            0 => Self::constant(1.0),
            1 => *self,
            _ => {
                let nf = n as f64;
                self.chain(
                    self.v.powi(n),
                    nf * self.v.powi(n - 1),
                    nf * (nf - 1.0) * self.v.powi(n - 2),
                )
            }
        }
    }

    pub fn powf(&self, e: f64) -> Self {
        self.chain(
            self.v.powf(e),
            e * self.v.powf(e - 1.0),
            e * (e - 1.0) * self.v.powf(e - 2.0),
        )
    }

    pub fn sq(&self) -> Self {
        *self * *self
    }

    /// Gradient restricted to the first `m` coordinates.
    pub fn grad(&self, m: usize) -> Vec<f64> {
        self.d[..m].to_vec()
    }

    /// Composition `F ∘ u` where `outer` holds jets of the components of `F`
    /// with respect to its own arguments and `inner` the jets of `u`.
    pub fn compose(outer: &Jet, inner: &[Jet]) -> Jet {
        let n = inner.len();
        let mut out = Jet::constant(outer.v);
        for a in 0..n {
            let fa = outer.d[a];
            if fa != 0.0 {
                for i in 0..MAX_DIM {
                    out.d[i] += fa * inner[a].d[i];
                    for j in 0..MAX_DIM {
                        out.h[i][j] += fa * inner[a].h[i][j];
                    }
                }
            }
            for b in 0..n {
                let fab = outer.h[a][b];
                if fab == 0.0 {
                    continue;
                }
                for i in 0..MAX_DIM {
                    let ui = fab * inner[a].d[i];
                    if ui == 0.0 {
                        continue;
                    }
                    for j in 0..MAX_DIM {
                        out.h[i][j] += ui * inner[b].d[j];
                    }
                }
            }
        }
        out
    }

    /// Drops second-order information.
    pub fn truncate_first(mut self) -> Self {
        self.h = [[0.0; MAX_DIM]; MAX_DIM];
        self
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: Jet) -> Jet {
        self += rhs;
        self
    }
}

impl AddAssign for Jet {
    #[inline]
    fn add_assign(&mut self, rhs: Jet) {
        self.v += rhs.v;
        for a in 0..MAX_DIM {
            self.d[a] += rhs.d[a];
            for b in 0..MAX_DIM {
                self.h[a][b] += rhs.h[a][b];
            }
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: Jet) -> Jet {
        self -= rhs;
        self
    }
}

impl SubAssign for Jet {
    #[inline]
    fn sub_assign(&mut self, rhs: Jet) {
        self.v -= rhs.v;
        for a in 0..MAX_DIM {
            self.d[a] -= rhs.d[a];
            for b in 0..MAX_DIM {
                self.h[a][b] -= rhs.h[a][b];
            }
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::constant(self.v * rhs.v);
        for a in 0..MAX_DIM {
            out.d[a] = self.d[a] * rhs.v + self.v * rhs.d[a];
        }
        for a in 0..MAX_DIM {
            for b in 0..MAX_DIM {
                out.h[a][b] = self.h[a][b] * rhs.v
                    + self.v * rhs.h[a][b]
                    + self.d[a] * rhs.d[b]
                    + self.d[b] * rhs.d[a];
            }
        }
        out
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: f64) -> Jet {
        self.v += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: f64) -> Jet {
        self.v -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn mul(mut self, rhs: f64) -> Jet {
        self.v *= rhs;
        for a in 0..MAX_DIM {
            self.d[a] *= rhs;
            for b in 0..MAX_DIM {
                self.h[a][b] *= rhs;
            }
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        rhs.recip() * self
    }
}

impl Sum for Jet {
    fn sum<I: Iterator<Item = Jet>>(iter: I) -> Jet {
        iter.fold(Jet::constant(0.0), |acc, x| acc + x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(&[f64]) -> f64, jf: impl Fn(&[Jet]) -> Jet, p: &[f64]) {
        let j = jf(&Jet::seed(p));
        assert!((j.v - f(p)).abs() < 1e-14);
        let h = 1e-5;
        for a in 0..p.len() {
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[a] += h;
            pm[a] -= h;
            let fd = (f(&pp) - f(&pm)) / (2.0 * h);
            assert!((fd - j.d[a]).abs() < 1e-8, "d{a}: {fd} vs {}", j.d[a]);
            for b in 0..p.len() {
                let gp = jf(&Jet::seed(&pp)).d[b];
                let gm = jf(&Jet::seed(&pm)).d[b];
                let fd2 = (gp - gm) / (2.0 * h);
                assert!((fd2 - j.h[a][b]).abs() < 1e-7, "h{a}{b}: {fd2} vs {}", j.h[a][b]);
            }
        }
    }

    #[test]
    fn elementary_functions_match_finite_differences() {
        let p = [0.3, -0.7, 1.1];
        fd_check(
            |x| (x[0] * x[1]).exp() + x[2].ln() * x[0].sin(),
            |x| (x[0] * x[1]).exp() + x[2].ln() * x[0].sin(),
            &p,
        );
        fd_check(
            |x| x[0].cos() / (1.0 + x[1] * x[1]) + x[2].sqrt().powi(3),
            |x| x[0].cos() / (1.0 + x[1] * x[1]) + x[2].sqrt().powi(3),
            &p,
        );
        fd_check(|x| x[2].powf(1.7) - 2.0 * x[1], |x| x[2].powf(1.7) - 2.0 * x[1], &p);
    }

    #[test]
    fn composition_applies_chain_rule() {
        let p = [0.4, 0.9];
        let inner = {
            let x = Jet::seed(&p);
            vec![x[0] * x[1], x[0].sin() + x[1]]
        };
        let q: Vec<f64> = inner.iter().map(|j| j.v).collect();
        let outer = {
            let y = Jet::seed(&q);
            y[0].exp() * y[1]
        };
        let composed = Jet::compose(&outer, &inner);
        let direct = {
            let x = Jet::seed(&p);
            (x[0] * x[1]).exp() * (x[0].sin() + x[1])
        };
        for a in 0..2 {
            assert!((composed.d[a] - direct.d[a]).abs() < 1e-12);
            for b in 0..2 {
                assert!((composed.h[a][b] - direct.h[a][b]).abs() < 1e-12);
            }
        }
    }
}
