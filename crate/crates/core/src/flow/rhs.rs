//! Pointwise right-hand sides of the flow and its gauge-fixed variant.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{round_sphere_metric, SolitonData};
use crate::error::{Error, Result};
use crate::field::{MetricField, OneForm, SmoothMap};
use crate::jet::Jet;
use crate::report::{RecordKind, ResidualReport};
use crate::tensor::{pullback_metric_field, pullback_oneform, tension_field, LocalGeometry};
use crate::verifier::{covector_norm, pointwise_report, soliton_residual, tensor_norm, SuiteOptions};

/// `−2 Ric + 2θ ω⊗ω` at `p`.
pub fn flow_rhs(g: &MetricField, omega: &OneForm, theta: f64, p: &[f64]) -> Result<DMatrix<f64>> {
    let geo = LocalGeometry::new(g, p)?;
    let w = omega.covector(p)?;
    Ok(geo.ricci()? * -2.0 + &w * w.transpose() * (2.0 * theta))
}

/// Tension field of `φ: (M, g) → (N, h)` at `p`.
pub fn map_rhs(phi: &SmoothMap, g: &MetricField, h: &MetricField, p: &[f64]) -> Result<DVector<f64>> {
    tension_field(phi, g, h, p)
}

/// `Z^l = g̃^{ij}(Γ̄^l_ij − Γ̃^l_ij)` at `p`.
pub fn deturck_field(g: &MetricField, reference: &MetricField, p: &[f64]) -> Result<DVector<f64>> {
    let geo = LocalGeometry::first_order(g, p)?;
    let rf = LocalGeometry::first_order(reference, p)?;
    Ok(geo.deturck(&rf))
}

/// `(−2Ric + 2θω̃⊗ω̃ − L_Z g̃, τ(φ̃) − dφ̃(Z))` at `p`, with `Z` the DeTurck
/// field of `g̃` against `ḡ`.
#[allow(clippy::too_many_arguments)]
pub fn deturck_rhs(
    g: &MetricField,
    omega: &OneForm,
    theta: f64,
    phi: &SmoothMap,
    reference: &MetricField,
    h: &MetricField,
    p: &[f64],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let geo = LocalGeometry::new(g, p)?;
    let rf = LocalGeometry::new(reference, p)?;
    let z = geo.deturck_jets(&rf)?;
    let w = omega.covector(p)?;
    let metric = geo.ricci()? * -2.0 + &w * w.transpose() * (2.0 * theta) - geo.lie_derivative(&z);
    let zv = DVector::from_iterator(z.len(), z.iter().map(|j| j.v));
    let map = tension_field(phi, g, h, p)? - phi.jacobian(p)? * zv;
    Ok((metric, map))
}

/// `τ_{ψ*g}(φ∘ψ)(p) − τ_g(φ)(ψ(p))`.
pub fn tension_naturality_check(
    phi: &SmoothMap,
    g: &MetricField,
    h: &MetricField,
    psi: &SmoothMap,
    p: &[f64],
) -> Result<DVector<f64>> {
    let pulled = pullback_metric_field(psi, g)?;
    let lhs = tension_field(&phi.compose(psi)?, &pulled, h, p)?;
    let rhs = tension_field(phi, g, h, &psi.apply(p)?)?;
    Ok(lhs - rhs)
}

/// A seeded random pair for the naturality check: a polynomial perturbation
/// of the identity with sup-perturbation `amplitude` on `[-1, 1]^m`, and a
/// quadratic map into the stereographic chart of the unit 2-sphere.
pub fn random_naturality_pair(m: usize, amplitude: f64, seed: u64) -> (SmoothMap, SmoothMap, MetricField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // each perturbation component: Σ c_α x^α over monomials of degree ≤ 2,
    // normalized so that Σ|c_α| = 1 (hence |·| ≤ 1 on the unit cube)
    let monomials: Vec<(usize, usize)> = (0..=m)
        .flat_map(|i| (i..=m).map(move |j| (i, j)))
        .collect();
    let mut coeffs = |scale: f64| -> Vec<Vec<f64>> {
        (0..m.max(2))
            .map(|_| {
                let c: Vec<f64> = monomials.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
                let s: f64 = c.iter().map(|v: &f64| v.abs()).sum();
                c.into_iter().map(|v| scale * v / s).collect()
            })
            .collect()
    };
    let pc = coeffs(amplitude);
    let fc = coeffs(0.5);
    let mono = monomials.clone();
    // index m stands for the constant 1
    let eval = move |x: &[Jet], c: &[f64], mono: &[(usize, usize)]| -> Jet {
        let var = |i: usize| if i == x.len() { Jet::constant(1.0) } else { x[i] };
        mono.iter()
            .zip(c)
            .map(|(&(i, j), ck)| var(i) * var(j) * *ck)
            .sum()
    };
    let mono2 = mono.clone();
    let psi = SmoothMap::analytic(m, m, move |x| {
        (0..m).map(|k| x[k] + eval(x, &pc[k], &mono)).collect()
    });
    let phi = SmoothMap::analytic(m, 2, move |x| (0..2).map(|k| eval(x, &fc[k], &mono2)).collect());
    (psi, phi, round_sphere_metric(2, 1.0))
}

fn scalar_param(d: &SolitonData, key: &str) -> Result<f64> {
    match d.params.get(key) {
        Some(crate::catalog::ParamValue::Scalar(v)) => Ok(*v),
        _ => Err(Error::MissingField(format!("parameter `{key}` on {}", d.label))),
    }
}

fn vector_param(d: &SolitonData, key: &str) -> Result<Vec<f64>> {
    match d.params.get(key) {
        Some(crate::catalog::ParamValue::Vector(v)) => Ok(v.clone()),
        _ => Err(Error::MissingField(format!("parameter `{key}` on {}", d.label))),
    }
}

pub(crate) fn warped_parameters(d: &SolitonData) -> Result<(usize, f64, Vec<f64>, Vec<f64>)> {
    Ok((
        scalar_param(d, "m")? as usize,
        scalar_param(d, "lambda")?,
        vector_param(d, "a")?,
        vector_param(d, "b")?,
    ))
}

/// The three conditions of a modified Ricci-harmonic soliton: `φ*ω_N = ω`,
/// the soliton equation, and `τ(φ) = dφ(X)`; plus a target-domain check.
pub fn msoliton_conditions_check(d: &SolitonData, opts: &SuiteOptions) -> Result<Vec<ResidualReport>> {
    let hm = d
        .harmonic
        .as_ref()
        .ok_or_else(|| Error::MissingField(format!("{} has no harmonic map data", d.label)))?;
    let points = d.geometry.sample(opts.samples, opts.seed);
    let tol = opts.tolerances.for_kind(d.metric().kind());
    let g = d.metric();
    let omega = d.one_form();
    let x = d.vector_field();
    let h = &hm.target.metric;
    let label = &d.label;
    let pull = pointwise_report(label, "pullback-target-form", &points, tol, |p| {
        let geo = LocalGeometry::first_order(g, p)?;
        let gap = pullback_oneform(&hm.map, &hm.omega_target, p)? - omega.covector(p)?;
        Ok(covector_norm(&geo, &gap))
    })?;
    let sol = pointwise_report(label, "msoliton-equation", &points, tol, |p| {
        let geo = LocalGeometry::first_order(g, p)?;
        Ok(tensor_norm(&geo, &soliton_residual(d, p)?))
    })?;
    let harm = pointwise_report(label, "tension-equals-dphi-x", &points, tol, |p| {
        let tau = tension_field(&hm.map, g, h, p)?;
        let dphi_x = hm.map.jacobian(p)? * x.vector(p)?;
        Ok((tau - dphi_x).norm())
    })?;
    let a = match hm.target.params.get("a") {
        Some(crate::catalog::ParamValue::Vector(v)) => v.clone(),
        _ => vec![0.0; hm.map.target_dim()],
    };
    let domain = pointwise_report(label, "image-in-punctured-target", &points, 0.0, |p| {
        let y = hm.map.apply(p)?;
        Ok(if y.iter().zip(&a).all(|(yv, av)| yv > av) { 0.0 } else { 1.0 })
    })?;
    Ok(vec![pull, sol, harm, domain]
        .into_iter()
        .map(|r| r.with("oracle", g.kind()))
        .collect())
}

/// Negative control: the soliton equation with `λ` shifted by `shift`.
pub fn shifted_lambda_residual(d: &SolitonData, shift: f64, opts: &SuiteOptions) -> Result<ResidualReport> {
    let mut shifted = d.clone();
    shifted.lambda = match &d.lambda {
        crate::catalog::Lambda::Constant(c) => crate::catalog::Lambda::Constant(c + shift),
        crate::catalog::Lambda::Field(f) => crate::catalog::Lambda::Field(f.map(move |v| v + shift)),
    };
    let points = d.geometry.sample(opts.samples, opts.seed);
    let r = pointwise_report(&d.label, "soliton-equation-shifted-lambda", &points, 0.0, |p| {
        let geo = LocalGeometry::first_order(d.metric(), p)?;
        Ok(tensor_norm(&geo, &soliton_residual(&shifted, p)?))
    })?;
    let min = r.residuals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ResidualReport {
        kind: RecordKind::Finding,
        pass: true,
        ..r
    }
    .with("shift", shift)
    .with("min_residual", min))
}
