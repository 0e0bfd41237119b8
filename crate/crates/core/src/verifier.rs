//! Pointwise and integral checks of soliton identities.
//!
//! Pointwise tensor residuals are measured with the metric-raised Frobenius
//! norm `sqrt(g^{ik} g^{jl} R_ij R_kl)`. Laplacians follow `Δ = tr ∇d`, so
//! eigenfunctions satisfy `Δu = −αu` with `α ≥ 0`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{
    berger_sphere, exterior_derivative_oneform, round_sphere_metric, Built, GeometrySpec, Pole,
    SolitonData, Structure,
};
use crate::error::{Error, Result};
use crate::field::{MetricField, OracleKind, ScalarField};
use crate::jet::Jet;
use crate::quadrature::QuadratureRule;
use crate::report::{RecordKind, ResidualReport};
use crate::tensor::{divergence_sym2, ricci_field, scalar_curvature, scalar_curvature_differential, LocalGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Pointwise residuals with analytic derivative oracles.
    pub pointwise: f64,
    /// Pointwise residuals when some oracle falls back to finite differences.
    pub pointwise_fd: f64,
    /// Relative gap of integral identities.
    pub integral: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pointwise: 1e-8,
            pointwise_fd: 1e-5,
            integral: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn for_kind(&self, kind: OracleKind) -> f64 {
        match kind {
            OracleKind::Analytic => self.pointwise,
            _ => self.pointwise_fd,
        }
    }
}

/// `sqrt(g^{ik} g^{jl} T_ij T_kl)`.
pub fn tensor_norm(geo: &LocalGeometry, t: &DMatrix<f64>) -> f64 {
    geo.norm2(t).max(0.0).sqrt()
}

/// `|w|_g` for a covector.
pub fn covector_norm(geo: &LocalGeometry, w: &DVector<f64>) -> f64 {
    geo.inner_covectors(w, w).max(0.0).sqrt()
}

/// Evaluates `f` at every point (in parallel, results kept in point order).
pub fn evaluate_points<T, F>(points: &[Vec<f64>], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64]) -> Result<T> + Sync,
{
    points.par_iter().map(|p| f(p)).collect()
}

pub fn pointwise_report<F>(
    label: &str,
    check: &str,
    points: &[Vec<f64>],
    tolerance: f64,
    f: F,
) -> Result<ResidualReport>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let residuals = evaluate_points(points, f)?;
    Ok(ResidualReport::new(label, check, RecordKind::Pointwise, residuals, tolerance)
        .with("points", points.len()))
}

fn lambda_matrix(d: &SolitonData, geo: &LocalGeometry, p: &[f64]) -> Result<DMatrix<f64>> {
    Ok(geo.metric() * d.lambda.at(p)?)
}

/// `Ric + ½ L_X g − λ g − θ ω⊗ω` at `p`.
pub fn soliton_residual(d: &SolitonData, p: &[f64]) -> Result<DMatrix<f64>> {
    let geo = LocalGeometry::new(d.metric(), p)?;
    soliton_residual_at(d, &geo, p)
}

fn soliton_residual_at(d: &SolitonData, geo: &LocalGeometry, p: &[f64]) -> Result<DMatrix<f64>> {
    let ric = geo.ricci()?;
    let x = d.vector_field().jets(p, 1)?;
    let w = d.one_form().covector(p)?;
    Ok(ric + geo.lie_derivative(&x) * 0.5 - lambda_matrix(d, geo, p)? - &w * w.transpose() * d.theta)
}

fn gradient_parts(d: &SolitonData) -> Result<(&ScalarField, &ScalarField)> {
    match &d.structure {
        Structure::Gradient { eta, xi } => Ok((eta, xi)),
        Structure::Vector { .. } => Err(Error::MissingField(format!(
            "{} carries no potentials η, ξ",
            d.label
        ))),
    }
}

/// `Ric + ∇dη − λ g − θ dξ⊗dξ` at `p`.
pub fn gradient_soliton_residual(d: &SolitonData, p: &[f64]) -> Result<DMatrix<f64>> {
    let (eta, xi) = gradient_parts(d)?;
    let geo = LocalGeometry::new(d.metric(), p)?;
    let ric = geo.ricci()?;
    let he = geo.hessian(&eta.jet(p, 2)?);
    let dxi = DVector::from_vec(xi.jet(p, 1)?.grad(d.dim()));
    Ok(ric + he - lambda_matrix(d, &geo, p)? - &dxi * dxi.transpose() * d.theta)
}

/// `du⊗du − ½∇d(u²) + u ∇du` at `p`.
pub fn du_identity_residual(u: &ScalarField, g: &MetricField, p: &[f64]) -> Result<DMatrix<f64>> {
    let geo = LocalGeometry::first_order(g, p)?;
    let uj = u.jet(p, 2)?;
    let du = DVector::from_vec(uj.grad(g.dim()));
    Ok(&du * du.transpose() - geo.hessian(&(uj * uj)) * 0.5 + geo.hessian(&uj) * uj.v)
}

/// `S + div X − mλ − θ|ω|²` at `p`.
pub fn trace_identity_residual(d: &SolitonData, p: &[f64]) -> Result<f64> {
    let geo = LocalGeometry::new(d.metric(), p)?;
    let s = geo.scalar_curvature()?;
    let x = d.vector_field().jets(p, 1)?;
    let w = d.one_form().covector(p)?;
    Ok(s + geo.divergence(&x) - d.dim() as f64 * d.lambda.at(p)? - d.theta * geo.inner_covectors(&w, &w))
}

/// Difference between the trace identity and the g-trace of the full
/// soliton residual.
pub fn trace_consistency_gap(d: &SolitonData, p: &[f64]) -> Result<f64> {
    let geo = LocalGeometry::new(d.metric(), p)?;
    let full = soliton_residual_at(d, &geo, p)?;
    Ok((geo.trace(&full) - trace_identity_residual(d, p)?).abs())
}

/// Trace-free part of `∇dΨ` and the difference `∇dΨ − (λ − θξΔξ/m − S/m) g`,
/// where `Ψ = η − θξ²/2`. Both vanish when `∇Ψ` is conformal and `ξ`, `Ric`
/// are pure trace.
pub fn conformal_hessian_gap(d: &SolitonData, p: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (eta, xi) = gradient_parts(d)?;
    let geo = LocalGeometry::new(d.metric(), p)?;
    let mf = d.dim() as f64;
    let xj = xi.jet(p, 2)?;
    let psi = eta.jet(p, 2)? - xj.sq() * (0.5 * d.theta);
    let hess = geo.hessian(&psi);
    let trace_free = &hess - geo.metric() * (geo.trace(&hess) / mf);
    let expected = d.lambda.at(p)? - d.theta * xj.v * geo.laplacian(&xj) / mf - geo.scalar_curvature()? / mf;
    let against = hess - geo.metric() * expected;
    Ok((trace_free, against))
}

/// Residuals of the three equivalent forms of the quasi-Einstein equation at
/// one point.
#[derive(Clone, Debug)]
pub struct QuasiEinsteinPoint {
    /// `Ric + ∇dh − (1/r) dh⊗dh − λg`, `r = 4n`.
    pub quasi_einstein: DMatrix<f64>,
    /// `Ric + ∇dφ − λg − (n/f) ∇df`, `φ = h/2`, `f = e^{−φ/n}`.
    pub ricci_hessian: DMatrix<f64>,
    /// `Ric + ∇dη − λg − (1/n) dξ⊗dξ`, `ξ = −n ln f`, `η = φ + ξ`.
    pub auxiliary: DMatrix<f64>,
    /// `(n/f)∇df − (−∇dξ + (1/n) dξ⊗dξ)`.
    pub hessian_identity: DMatrix<f64>,
    pub geometry: LocalGeometry,
}

impl QuasiEinsteinPoint {
    /// Largest disagreement between the three residuals, plus the Hessian
    /// identity residual, in the metric norm.
    pub fn max_gap(&self) -> f64 {
        let g = &self.geometry;
        tensor_norm(g, &(&self.ricci_hessian - &self.quasi_einstein))
            .max(tensor_norm(g, &(&self.auxiliary - &self.quasi_einstein)))
            .max(tensor_norm(g, &self.hessian_identity))
    }
}

pub fn quasi_einstein_roundtrip(
    h: &ScalarField,
    n: f64,
    lambda: f64,
    g: &MetricField,
    p: &[f64],
) -> Result<QuasiEinsteinPoint> {
    if !(n > 0.0) {
        return Err(Error::param(format!("n > 0 violated (n = {n})")));
    }
    let m = g.dim();
    let geo = LocalGeometry::new(g, p)?;
    let ric = geo.ricci()?;
    let lg = geo.metric() * lambda;
    let hj = h.jet(p, 2)?;
    let phi = hj * 0.5;
    let f = (phi * (-1.0 / n)).exp();
    if !(f.v > 0.0) {
        return Err(Error::param(format!("f = e^(−φ/n) is not positive at {p:?}")));
    }
    let xi = f.ln() * (-n);
    let eta = phi + xi;
    let outer = |j: &Jet| {
        let v = DVector::from_vec(j.grad(m));
        &v * v.transpose()
    };
    let hess_f = geo.hessian(&f) * (n / f.v);
    let quasi_einstein = &ric + geo.hessian(&hj) - outer(&hj) / (4.0 * n) - &lg;
    let ricci_hessian = &ric + geo.hessian(&phi) - &lg - &hess_f;
    let auxiliary = &ric + geo.hessian(&eta) - &lg - outer(&xi) / n;
    let hessian_identity = &hess_f - (-geo.hessian(&xi) + outer(&xi) / n);
    Ok(QuasiEinsteinPoint {
        quasi_einstein,
        ricci_hessian,
        auxiliary,
        hessian_identity,
        geometry: geo,
    })
}

/// Contracted Bianchi residual `|div Ric − ½ dS|_g`; the divergence uses
/// finite differences of the Ricci tensor.
pub fn bianchi_residual(g: &MetricField, p: &[f64]) -> Result<f64> {
    let div = divergence_sym2(&ricci_field(g), g, p)?;
    let ds = scalar_curvature_differential(g, p)?;
    let geo = LocalGeometry::first_order(g, p)?;
    Ok(covector_norm(&geo, &(div - ds * 0.5)))
}

/// `dS(v)` by fourth-order central differences along `v`.
fn directional_scalar_curvature(g: &MetricField, p: &[f64], v: &DVector<f64>) -> Result<f64> {
    let norm = v.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let h = 1e-3 / norm;
    let s = |t: f64| -> Result<f64> {
        let q: Vec<f64> = p.iter().zip(v.iter()).map(|(a, b)| a + t * b).collect();
        scalar_curvature(g, &q)
    };
    Ok((-s(2.0 * h)? + 8.0 * s(h)? - 8.0 * s(-h)? + s(-2.0 * h)?) / (12.0 * h))
}

/// Two sides of an integral identity, with the absolute and relative gap.
/// The relative gap divides by the sum of the absolute values of the
/// individual integrals that make up both sides, floored at 1 so that
/// identities whose terms all vanish report the absolute gap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralGap {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub scale: f64,
}

impl IntegralGap {
    fn new(lhs: f64, rhs: f64, scale: f64) -> Self {
        let gap = (lhs - rhs).abs();
        let relative_gap = gap / scale.max(1.0);
        Self {
            lhs,
            rhs,
            gap,
            relative_gap,
            scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralIdentity {
    pub order: usize,
    /// `∫|R̊ic|² = (m−2)/(2m) ∫⟨∇S, X⟩ + θ ∫ R̊ic(ω♯, ω♯)`.
    pub general: IntegralGap,
    /// The same identity rewritten for `ω = dξ`; present for gradient data.
    pub gradient: Option<IntegralGap>,
    pub terms: BTreeMap<String, f64>,
}

const TERM_NAMES: [&str; 8] = [
    "traceless_ricci_norm2",
    "grad_scalar_dot_x",
    "traceless_ricci_omega",
    "traceless_hessian_xi_norm2",
    "laplacian_xi_squared",
    "scaled_grad_xi_norm2",
    "scalar_curvature",
    "volume",
];

fn require_sphere(d: &SolitonData) -> Result<()> {
    d.in_chart(Pole::South)?;
    d.in_chart(Pole::North)?;
    if d.geometry.name != "round-sphere" {
        return Err(Error::Unsupported(format!(
            "integral identities need compact sphere data, got {}",
            d.geometry.label
        )));
    }
    Ok(())
}

/// Integrates both forms of the traceless-Ricci identity over the sphere.
pub fn integral_identity_check(d: &SolitonData, q: &QuadratureRule) -> Result<IntegralIdentity> {
    require_sphere(d)?;
    if q.m != d.dim() {
        return Err(Error::DimensionMismatch(format!(
            "quadrature on S^{} for data of dimension {}",
            q.m,
            d.dim()
        )));
    }
    let m = d.dim();
    let mf = m as f64;
    let gradient = matches!(d.structure, Structure::Gradient { .. });
    let sums = q.integrate_many(TERM_NAMES.len(), |node| {
        let dd = d.in_chart(node.pole)?;
        let p = &node.coords;
        let geo = LocalGeometry::new(dd.metric(), p)?;
        let ric = geo.ricci()?;
        let s = geo.scalar_curvature()?;
        let r0 = geo.traceless(&ric);
        let x = dd.vector_field().jets(p, 0)?;
        let xv = DVector::from_iterator(m, x.iter().map(|j| j.v));
        let ds_x = directional_scalar_curvature(dd.metric(), p, &xv)?;
        let w = geo.sharp(&dd.one_form().covector(p)?);
        let mut out = vec![
            geo.norm2(&r0),
            ds_x,
            (w.transpose() * &r0 * &w)[(0, 0)],
            0.0,
            0.0,
            0.0,
            s,
            1.0,
        ];
        if let Structure::Gradient { xi, .. } = &dd.structure {
            let xj = xi.jet(p, 2)?;
            let hess = geo.hessian(&xj);
            let dxi = DVector::from_vec(xj.grad(m));
            out[3] = geo.norm2(&geo.traceless(&hess));
            out[4] = geo.trace(&hess).powi(2);
            out[5] = s / (mf - 1.0) * geo.inner_covectors(&dxi, &dxi);
        }
        Ok(out)
    })?;
    let terms: BTreeMap<String, f64> = TERM_NAMES
        .iter()
        .zip(&sums)
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    let [lhs, ds_x, ric_w, hess0, lap2, grad2, _, _] = <[f64; 8]>::try_from(sums).expect("term count");
    let c = (mf - 2.0) / (2.0 * mf);
    let th = d.theta;
    let general = IntegralGap::new(
        lhs,
        c * ds_x + th * ric_w,
        lhs.abs() + (c * ds_x).abs() + (th * ric_w).abs(),
    );
    let gradient = gradient.then(|| {
        let k = th * (mf - 1.0) / mf;
        IntegralGap::new(
            lhs,
            c * ds_x - th * hess0 + k * (lap2 - grad2),
            lhs.abs() + (c * ds_x).abs() + (th * hess0).abs() + k * (lap2.abs() + grad2.abs()),
        )
    });
    Ok(IntegralIdentity {
        order: q.order,
        general,
        gradient,
        terms,
    })
}

/// A scalar function on the unit sphere, written in both stereographic
/// charts.
#[derive(Clone, Debug)]
pub struct SphereFunction {
    pub south: ScalarField,
    pub north: ScalarField,
}

impl SphereFunction {
    pub fn from_fn(f: impl Fn(Pole) -> ScalarField) -> Self {
        Self {
            south: f(Pole::South),
            north: f(Pole::North),
        }
    }

    pub fn get(&self, pole: Pole) -> &ScalarField {
        match pole {
            Pole::South => &self.south,
            Pole::North => &self.north,
        }
    }
}

/// Gap in `∫[R̊ic(∇u,∇u) + |∇dů|²] = (m−1)/m ∫[(Δu)² − S/(m−1)|∇u|²]` on
/// the unit sphere.
pub fn bochner_stokes_check(u: &SphereFunction, q: &QuadratureRule) -> Result<IntegralGap> {
    let m = q.m;
    let mf = m as f64;
    let g = round_sphere_metric(m, 1.0);
    let sums = q.integrate_many(4, |node| {
        let p = &node.coords;
        let geo = LocalGeometry::new(&g, p)?;
        let ric = geo.ricci()?;
        let s = geo.scalar_curvature()?;
        let uj = u.get(node.pole).jet(p, 2)?;
        let du = DVector::from_vec(uj.grad(m));
        let grad = geo.sharp(&du);
        let hess = geo.hessian(&uj);
        Ok(vec![
            (grad.transpose() * geo.traceless(&ric) * &grad)[(0, 0)],
            geo.norm2(&geo.traceless(&hess)),
            geo.trace(&hess).powi(2),
            s / (mf - 1.0) * geo.inner_covectors(&du, &du),
        ])
    })?;
    let k = (mf - 1.0) / mf;
    Ok(IntegralGap::new(
        sums[0] + sums[1],
        k * (sums[2] - sums[3]),
        sums[0].abs() + sums[1].abs() + k * (sums[2].abs() + sums[3].abs()),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenCheck {
    pub convention: String,
    pub c1: f64,
    /// Least-squares fit of `Δ(ξ−c1) = −α(ξ−c1)` over the sample points.
    pub alpha: f64,
    /// Mean scalar curvature over the samples divided by `m − 1`.
    pub s_over_m1: f64,
    pub scalar_curvature_spread: f64,
    pub eigen_residuals: Vec<f64>,
    pub is_eigenfunction: bool,
    /// `|∇d(ξ−c1) + S(ξ−c1)/(m(m−1)) g|_g` per point.
    pub hessian_residuals: Vec<f64>,
    /// The same with `ξ` in place of `ξ − c1`.
    pub hessian_residuals_unshifted: Vec<f64>,
    pub notes: Vec<String>,
}

pub fn eigen_check_function(
    xi: &ScalarField,
    c1: f64,
    g: &MetricField,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<EigenCheck> {
    let m = g.dim();
    let mf = m as f64;
    let rows = evaluate_points(points, |p| {
        let geo = LocalGeometry::new(g, p)?;
        let s = geo.scalar_curvature()?;
        let xj = xi.jet(p, 2)?;
        let hess = geo.hessian(&xj);
        Ok((xj.v - c1, geo.trace(&hess), s, hess, geo))
    })?;
    let num: f64 = rows.iter().map(|r| r.1 * r.0).sum();
    let den: f64 = rows.iter().map(|r| r.0 * r.0).sum();
    if den == 0.0 {
        return Err(Error::param("ξ − c1 vanishes at every sample point"));
    }
    let alpha = -num / den;
    let s_mean = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;
    let s_spread = rows.iter().map(|r| (r.2 - s_mean).abs()).fold(0.0, f64::max);
    let eigen_residuals: Vec<f64> = rows.iter().map(|r| (r.1 + alpha * r.0).abs()).collect();
    let is_eigenfunction = eigen_residuals.iter().all(|r| *r <= tolerance);
    let obata = |shift: f64| -> Vec<f64> {
        rows.iter()
            .map(|(u, _, s, hess, geo)| {
                let t = hess + geo.metric() * (s * (u + shift) / (mf * (mf - 1.0)));
                tensor_norm(geo, &t)
            })
            .collect()
    };
    let mut notes = Vec::new();
    if !is_eigenfunction {
        notes.push("ξ − c1 is not a Laplace eigenfunction; the eigenvalue bound is not asserted".into());
    }
    if c1 != 0.0 {
        notes.push(format!("c1 = {c1}: the eigen relation holds for ξ − c1 only"));
    }
    Ok(EigenCheck {
        convention: "Δ = tr ∇d, Δ(ξ − c1) = −α(ξ − c1)".into(),
        c1,
        alpha,
        s_over_m1: s_mean / (mf - 1.0),
        scalar_curvature_spread: s_spread,
        eigen_residuals,
        is_eigenfunction,
        hessian_residuals: obata(0.0),
        hessian_residuals_unshifted: obata(c1),
        notes,
    })
}

fn param_scalar(d: &SolitonData, key: &str) -> f64 {
    match d.params.get(key) {
        Some(crate::catalog::ParamValue::Scalar(v)) => *v,
        _ => 0.0,
    }
}

/// Eigenvalue check for the `ξ` of gradient sphere data.
pub fn eigen_equality_check(
    d: &SolitonData,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<EigenCheck> {
    let (_, xi) = gradient_parts(d)?;
    eigen_check_function(xi, param_scalar(d, "c1"), d.metric(), points, tolerance)
}

impl EigenCheck {
    /// Records: eigen relation, eigenvalue versus `S/(m−1)` and the Obata
    /// Hessian equation. When the hypothesis fails the last two become
    /// findings.
    pub fn reports(&self, label: &str, tolerance: f64) -> Vec<ResidualReport> {
        let hyp = self.is_eigenfunction;
        let finding = |k| if hyp { k } else { RecordKind::Finding };
        let eigen = ResidualReport::new(
            label,
            "eigen-relation",
            finding(RecordKind::Pointwise),
            self.eigen_residuals.clone(),
            tolerance,
        )
        .with("alpha", self.alpha)
        .with("convention", &self.convention)
        .with("notes", &self.notes);
        let bound = ResidualReport::new(
            label,
            "eigenvalue-vs-scalar-curvature",
            finding(RecordKind::Pointwise),
            vec![self.alpha - self.s_over_m1],
            1e-10,
        )
        .with("alpha", self.alpha)
        .with("s_over_m_minus_1", self.s_over_m1)
        .with("bound_holds", self.alpha >= self.s_over_m1 - 1e-10);
        let hessian = ResidualReport::new(
            label,
            "obata-hessian",
            finding(RecordKind::Pointwise),
            self.hessian_residuals.clone(),
            tolerance,
        )
        .with("c1", self.c1)
        .with(
            "unshifted_max",
            crate::report::summarize(&self.hessian_residuals_unshifted).0,
        );
        vec![eigen.with("is_eigenfunction", hyp), bound, hessian]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RicciBound {
    pub kappa: f64,
    pub tau: f64,
    /// Smallest `Ric(u, u)` over sampled unit vectors.
    pub min_ricci: f64,
    /// Smallest eigenvalue of `g^{-1}Ric` over the sample points.
    pub min_eigenvalue: f64,
    pub c1: f64,
    pub c2: f64,
    pub diameter_bound: f64,
    pub samples: usize,
}

/// Sampled Ricci lower bound on the Berger sphere and the diameter bound
/// `(π/c2)(c1 + sqrt(c1² + (m−1)c2))` with `c1 = sup|X|`, `c2 = κ − 2τ²`.
pub fn ricci_lower_bound_and_diameter(
    kappa: f64,
    tau: f64,
    samples: usize,
    seed: u64,
) -> Result<RicciBound> {
    if 4.0 * tau * tau < kappa {
        return Err(Error::param(format!(
            "branch 4τ² ≥ κ violated (4τ² = {}, κ = {kappa})",
            4.0 * tau * tau
        )));
    }
    if kappa <= 2.0 * tau * tau {
        return Err(Error::param(format!(
            "branch κ > 2τ² violated (κ = {kappa}, 2τ² = {})",
            2.0 * tau * tau
        )));
    }
    let geo_spec = berger_sphere(kappa, tau)?;
    let e3 = geo_spec.vector("E3")?.clone();
    let points = geo_spec.sample(samples, seed);
    let per_point = evaluate_points(&points, |p| {
        let geo = LocalGeometry::new(&geo_spec.metric, p)?;
        let ric = geo.ricci()?;
        let chol = geo.metric().clone().cholesky().ok_or_else(|| Error::SingularMetric {
            point: p.to_vec(),
        })?;
        let linv = chol.l().try_inverse().expect("triangular factor is invertible");
        let sym = &linv * &ric * linv.transpose();
        let min_eig = sym.symmetric_eigenvalues().min();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ crate::chart::fnv1a(format!("{p:?}").as_bytes()));
        let mut min_ric = f64::INFINITY;
        for _ in 0..16 {
            let u = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let n2 = geo.inner(&u, &u);
            if n2 <= 1e-12 {
                continue;
            }
            min_ric = min_ric.min((u.transpose() * &ric * &u)[(0, 0)] / n2);
        }
        let x = e3.vector(p)?;
        Ok((min_ric, min_eig, geo.inner(&x, &x).sqrt()))
    })?;
    let min_ricci = per_point.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let min_eigenvalue = per_point.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let c1 = per_point.iter().map(|r| r.2).fold(0.0, f64::max);
    let c2 = kappa - 2.0 * tau * tau;
    let m = 3.0;
    let diameter_bound = std::f64::consts::PI / c2 * (c1 + (c1 * c1 + (m - 1.0) * c2).sqrt());
    Ok(RicciBound {
        kappa,
        tau,
        min_ricci,
        min_eigenvalue,
        c1,
        c2,
        diameter_bound,
        samples,
    })
}

/// Runtime options for [`verify_suite`].
#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub samples: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 0,
            tolerances: Tolerances::default(),
        }
    }
}

fn params_value(params: &crate::catalog::Params) -> serde_json::Value {
    serde_json::to_value(params).unwrap_or(serde_json::Value::Null)
}

/// Pointwise soliton records for one datum.
pub fn soliton_reports(d: &SolitonData, opts: &SuiteOptions) -> Result<Vec<ResidualReport>> {
    let points = d.geometry.sample(opts.samples, opts.seed);
    let tol = opts.tolerances.for_kind(d.metric().kind());
    let meta = |r: ResidualReport| {
        r.with("parameters", params_value(&d.params))
            .with("oracle", d.metric().kind())
            .with("norm", "metric-raised Frobenius")
            .with("kind", d.kind)
    };
    let mut out = vec![meta(pointwise_report(&d.label, "soliton-equation", &points, tol, |p| {
        let geo = LocalGeometry::new(d.metric(), p)?;
        Ok(tensor_norm(&geo, &soliton_residual_at(d, &geo, p)?))
    })?)];
    out.push(meta(pointwise_report(&d.label, "trace-identity", &points, tol, |p| {
        trace_identity_residual(d, p)
    })?));
    out.push(meta(pointwise_report(&d.label, "trace-consistency", &points, 1e-12, |p| {
        trace_consistency_gap(d, p)
    })?));
    if matches!(d.structure, Structure::Gradient { .. }) {
        out.push(meta(pointwise_report(&d.label, "gradient-soliton-equation", &points, tol, |p| {
            let geo = LocalGeometry::first_order(d.metric(), p)?;
            Ok(tensor_norm(&geo, &gradient_soliton_residual(d, p)?))
        })?));
    }
    if let crate::catalog::Lambda::Field(f) = &d.lambda {
        let vals = evaluate_points(&points, |p| f.value(p))?;
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.push(
            ResidualReport::new(&d.label, "lambda-range", RecordKind::Finding, vec![hi - lo], 0.0)
                .with("min", lo)
                .with("max", hi),
        );
    }
    Ok(out)
}

/// Metric sanity and curvature identities for a bare geometry.
pub fn geometry_reports(g: &GeometrySpec, opts: &SuiteOptions) -> Result<Vec<ResidualReport>> {
    let points = g.sample(opts.samples, opts.seed);
    let params = params_value(&g.params);
    let mut out = vec![pointwise_report(&g.label, "ricci-symmetry", &points, 1e-10, |p| {
        let r = LocalGeometry::new(&g.metric, p)?.ricci()?;
        Ok((&r - r.transpose()).amax())
    })?
    .with("parameters", params.clone())];
    let bianchi_points = g.sample(opts.samples.min(20), opts.seed);
    out.push(
        pointwise_report(&g.label, "contracted-bianchi", &bianchi_points, 1e-6, |p| {
            bianchi_residual(&g.metric, p)
        })?
        .with("parameters", params.clone()),
    );
    if let (Ok(xf), Ok(dxf), Ok(x)) = (g.one_form("X_flat"), g.two_tensor("dX_flat"), g.vector("X")) {
        let tol = opts.tolerances.pointwise;
        out.push(pointwise_report(&g.label, "dX-flat-closed-form", &points, tol, |p| {
            Ok((exterior_derivative_oneform(xf, p)? - dxf.matrix(p)?).amax())
        })?);
        let euclid = crate::tensor::flat_field(x, &MetricField::euclidean(g.dim()));
        out.push(pointwise_report(&g.label, "euclidean-dual-closed", &points, tol, |p| {
            Ok(exterior_derivative_oneform(&euclid, p)?.amax())
        })?);
        let u = g.scalar("u")?;
        out.push(pointwise_report(&g.label, "euclidean-potential", &points, tol, |p| {
            let grad = DVector::from_vec(u.jet(p, 1)?.grad(g.dim()));
            Ok((grad - x.vector(p)?).amax())
        })?);
        let mut probe = vec![0.0; g.dim()];
        probe[1] = 1.0;
        let d = exterior_derivative_oneform(xf, &probe)?;
        out.push(
            ResidualReport::new(&g.label, "warped-dual-not-closed", RecordKind::Finding, vec![d[(0, 1)]], 0.0)
                .with("point", probe),
        );
    }
    Ok(out)
}

/// Every applicable check for a catalog entry.
pub fn verify_suite(built: &Built, opts: &SuiteOptions) -> Result<Vec<ResidualReport>> {
    match built {
        Built::Geometry(g) => geometry_reports(g, opts),
        Built::Soliton(d) => {
            let mut out = soliton_reports(d, opts)?;
            if d.harmonic.is_some() {
                out.extend(crate::flow::msoliton_conditions_check(d, opts)?);
            }
            if d.name == "berger-soliton" {
                let kappa = param_scalar(d, "kappa");
                let tau = param_scalar(d, "tau");
                if kappa > 2.0 * tau * tau {
                    let b = ricci_lower_bound_and_diameter(kappa, tau, opts.samples, opts.seed)?;
                    out.push(
                        ResidualReport::new(
                            &d.label,
                            "ricci-lower-bound",
                            RecordKind::Pointwise,
                            vec![(b.c2 - b.min_ricci).max(0.0)],
                            1e-8,
                        )
                        .with("bound", &b),
                    );
                }
            }
            if d.pole.is_some() && matches!(d.structure, Structure::Gradient { .. }) && d.name == "obata-sphere" {
                let points = d.geometry.sample(opts.samples, opts.seed);
                let e = eigen_equality_check(d, &points, opts.tolerances.pointwise)?;
                out.extend(e.reports(&d.label, opts.tolerances.pointwise));
                let tol = opts.tolerances.pointwise;
                out.push(pointwise_report(&d.label, "conformal-hessian-tracefree", &points, tol, |p| {
                    Ok(conformal_hessian_gap(d, p)?.0.amax())
                })?);
                out.push(pointwise_report(&d.label, "conformal-hessian-factor", &points, tol, |p| {
                    Ok(conformal_hessian_gap(d, p)?.1.amax())
                })?);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{euclidean_gradient_soliton, euclidean_soliton, hyperbolic_warped_metric};

    #[test]
    fn trivial_euclidean_residuals_vanish_exactly() {
        for d in [euclidean_soliton(3).unwrap(), euclidean_gradient_soliton(3).unwrap()] {
            for p in d.geometry.sample(10, 1) {
                assert_eq!(soliton_residual(&d, &p).unwrap().amax(), 0.0);
                assert_eq!(trace_identity_residual(&d, &p).unwrap(), 0.0);
            }
        }
        let d = euclidean_gradient_soliton(2).unwrap();
        assert_eq!(gradient_soliton_residual(&d, &[0.1, 0.2]).unwrap().amax(), 0.0);
    }

    #[test]
    fn du_identity_for_linear_function() {
        let u = ScalarField::analytic(3, |x| x[0]);
        let r = du_identity_residual(&u, &MetricField::euclidean(3), &[0.3, -0.2, 1.0]).unwrap();
        assert_eq!(r.amax(), 0.0);
    }

    #[test]
    fn quasi_einstein_constant_h_reduces_to_einstein() {
        let g = hyperbolic_warped_metric(3);
        let h = ScalarField::constant(3, 0.7);
        let q = quasi_einstein_roundtrip(&h, 1.0, -2.0, &g, &[0.2, 0.1, -0.4]).unwrap();
        let einstein = crate::tensor::ricci(&g, &[0.2, 0.1, -0.4]).unwrap() + g.matrix(&[0.2, 0.1, -0.4]).unwrap() * 2.0;
        assert!((&q.quasi_einstein - &einstein).amax() < 1e-12);
        assert!((&q.ricci_hessian - &einstein).amax() < 1e-12);
        assert!((&q.auxiliary - &einstein).amax() < 1e-12);
    }

    #[test]
    fn integral_check_rejects_non_compact_data() {
        let d = euclidean_soliton(2).unwrap();
        let q = QuadratureRule::sphere(2, 4).unwrap();
        assert!(matches!(integral_identity_check(&d, &q), Err(Error::Unsupported(_))));
    }

    #[test]
    fn berger_branch_errors() {
        assert!(ricci_lower_bound_and_diameter(9.0, 1.0, 10, 0).is_err());
        assert!(ricci_lower_bound_and_diameter(16.0, 3.0, 10, 0).is_err());
        let b = ricci_lower_bound_and_diameter(9.0, 2.0, 10, 0).unwrap();
        assert!((b.diameter_bound - std::f64::consts::PI * (1.0 + 3f64.sqrt())).abs() < 1e-10);
    }
}
