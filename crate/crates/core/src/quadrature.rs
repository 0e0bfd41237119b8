//! Product quadrature on the unit sphere `S^m ⊂ R^{m+1}`.
//!
//! Even `m` peels off the last embedding coordinate `s` with weight
//! `(1−s²)^{(m−2)/2}`; odd `m` splits `S^m` into `S^1 × S^{m−2}` through
//! `u = sin²η` with weight `½ u^{(m−3)/2}`. Both weights are polynomial, so
//! Gauss–Legendre is exact on them. Circles use the uniform trapezoid rule.
//! Nodes are handed to the stereographic chart whose origin lies in the same
//! hemisphere.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::catalog::{stereo_project, Pole};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct QuadNode {
    /// Point on the unit sphere in `R^{m+1}`.
    pub point: Vec<f64>,
    pub pole: Pole,
    /// Coordinates in the stereographic chart for `pole`.
    pub coords: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub m: usize,
    pub order: usize,
    pub nodes: Vec<QuadNode>,
}

/// `Vol(S^m)` for the unit sphere.
pub fn sphere_volume(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (m as f64 - 1.0) * sphere_volume(m - 2),
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    for i in 0..k {
        let mut z = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for n in 2..=k {
                let p2 = ((2 * n - 1) as f64 * z * p1 - (n - 1) as f64 * p0) / n as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = k as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        // recompute the derivative at the converged node
        let (mut p0, mut p1) = (1.0, z);
        for n in 2..=k {
            let p2 = ((2 * n - 1) as f64 * z * p1 - (n - 1) as f64 * p0) / n as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = k as f64 * (z * p1 - p0) / (z * z - 1.0);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// Weighted points on the unit `S^m`, as (embedding, weight) pairs.
fn raw_rule(m: usize, k: usize) -> Vec<(Vec<f64>, f64)> {
    if m == 1 {
        let w = 2.0 * PI / k as f64;
        return (0..k)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / k as f64;
                (vec![a.cos(), a.sin()], w)
            })
            .collect();
    }
    let (x, w) = gauss_legendre(k);
    let mut out = Vec::new();
    if m % 2 == 0 {
        let lower = raw_rule(m - 1, k);
        for (s, ws) in x.iter().zip(&w) {
            let r2 = 1.0 - s * s;
            let weight = ws * r2.powi((m as i32 - 2) / 2);
            let r = r2.sqrt();
            for (y, wy) in &lower {
                let mut p: Vec<f64> = y.iter().map(|c| c * r).collect();
                p.push(*s);
                out.push((p, weight * wy));
            }
        }
    } else {
        let circle = raw_rule(1, k);
        let rest = raw_rule(m - 2, k);
        for (t, wt) in x.iter().zip(&w) {
            let u = 0.5 * (t + 1.0);
            let weight = 0.5 * 0.5 * wt * u.powi((m as i32 - 3) / 2);
            let (ca, cb) = ((1.0 - u).sqrt(), u.sqrt());
            for (a, wa) in &circle {
                for (b, wb) in &rest {
                    let mut p: Vec<f64> = a.iter().map(|c| c * ca).collect();
                    p.extend(b.iter().map(|c| c * cb));
                    out.push((p, weight * wa * wb));
                }
            }
        }
    }
    out
}

impl QuadratureRule {
    /// The product rule with `order` Gauss–Legendre nodes per polar variable
    /// and `order` trapezoid points per circle.
    pub fn sphere(m: usize, order: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::param(format!("sphere quadrature needs m ≥ 2, got {m}")));
        }
        if m > crate::jet::MAX_DIM {
            return Err(Error::param(format!("m ≤ {} violated", crate::jet::MAX_DIM)));
        }
        if order < 1 {
            return Err(Error::param("quadrature order must be ≥ 1"));
        }
        let nodes = raw_rule(m, order)
            .into_iter()
            .map(|(point, weight)| {
                let pole = if point[m] >= 0.0 { Pole::South } else { Pole::North };
                let coords = stereo_project(&point, 1.0, pole);
                QuadNode {
                    point,
                    pole,
                    coords,
                    weight,
                }
            })
            .collect();
        Ok(Self { m, order, nodes })
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// `Σ w_i f(node_i)`, evaluated in parallel and summed in node order.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&QuadNode) -> Result<f64> + Sync,
    {
        Ok(self.integrate_many(1, |n| Ok(vec![f(n)?]))?[0])
    }

    /// Integrates several integrands that share per-node work.
    pub fn integrate_many<F>(&self, count: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&QuadNode) -> Result<Vec<f64>> + Sync,
    {
        let values: Vec<Vec<f64>> = self.nodes.par_iter().map(&f).collect::<Result<_>>()?;
        let mut sums = vec![0.0; count];
        for (node, v) in self.nodes.iter().zip(&values) {
            for (s, x) in sums.iter_mut().zip(v) {
                *s += node.weight * x;
            }
        }
        Ok(sums)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        for k in 1..12 {
            let (x, w) = gauss_legendre(k);
            for d in 0..2 * k {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "k={k} d={d}");
            }
        }
    }

    #[test]
    fn volumes_and_second_moments() {
        for m in 2..=5 {
            let q = QuadratureRule::sphere(m, 6).unwrap();
            let vol = sphere_volume(m);
            assert!((q.total_weight() / vol - 1.0).abs() < 1e-12, "m={m}");
            assert!(q.nodes.iter().all(|n| n.weight > 0.0));
            for k in 0..=m {
                let mom: f64 = q.nodes.iter().map(|n| n.weight * n.point[k].powi(2)).sum();
                assert!((mom / (vol / (m as f64 + 1.0)) - 1.0).abs() < 1e-12, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn nodes_lie_on_sphere_and_inside_unit_chart_ball() {
        let q = QuadratureRule::sphere(3, 5).unwrap();
        for n in &q.nodes {
            let r2: f64 = n.point.iter().map(|c| c * c).sum();
            assert!((r2 - 1.0).abs() < 1e-13);
            let c2: f64 = n.coords.iter().map(|c| c * c).sum();
            assert!(c2 <= 1.0 + 1e-12);
        }
    }
}
