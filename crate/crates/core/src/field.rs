//! Pointwise-evaluable fields on a coordinate chart.
//!
//! Every field is a map from chart points to a fixed number of real
//! components. Derivatives come from a derivative oracle: jets computed by
//! forward-mode differentiation of an analytic closure (the primary path),
//! central finite differences of a plain closure (the fallback), or a
//! composite rule supplied by the caller.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{Jet, MAX_DIM};

type JetFn = dyn Fn(&[f64], usize) -> Result<Vec<Jet>> + Send + Sync;

/// How a field produces its derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Analytic,
    FiniteDifference,
    Composite,
    ValuesOnly,
}

/// Finite-difference step sizes, scaled by `max(1, |x_k|)` per coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdSteps {
    pub first: f64,
    pub second: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self {
            first: 1e-5,
            second: 1e-4,
        }
    }
}

#[derive(Clone)]
pub struct Field {
    dim: usize,
    len: usize,
    order: usize,
    kind: OracleKind,
    eval: Arc<JetFn>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("dim", &self.dim)
            .field("len", &self.len)
            .field("order", &self.order)
            .field("kind", &self.kind)
            .finish()
    }
}

fn step(base: f64, x: f64) -> f64 {
    base * x.abs().max(1.0)
}

/// Jets of `f` at `p` by central differences: first derivatives with the
/// `first` step, second derivatives by nested differences with `second`.
fn fd_jets(
    f: &(dyn Fn(&[f64]) -> Vec<f64> + Send + Sync),
    p: &[f64],
    order: usize,
    steps: FdSteps,
) -> Vec<Jet> {
    let f0 = f(p);
    let mut out: Vec<Jet> = f0.iter().map(|&v| Jet::constant(v)).collect();
    if order == 0 {
        return out;
    }
    let mut x = p.to_vec();
    for k in 0..p.len() {
        let h = step(steps.first, p[k]);
        x[k] = p[k] + h;
        let fp = f(&x);
        x[k] = p[k] - h;
        let fm = f(&x);
        x[k] = p[k];
        for (c, jet) in out.iter_mut().enumerate() {
            jet.d[k] = (fp[c] - fm[c]) / (2.0 * h);
        }
    }
    if order < 2 {
        return out;
    }
    for k in 0..p.len() {
        let hk = step(steps.second, p[k]);
        x[k] = p[k] + hk;
        let fp = f(&x);
        x[k] = p[k] - hk;
        let fm = f(&x);
        x[k] = p[k];
        for (c, jet) in out.iter_mut().enumerate() {
            jet.h[k][k] = (fp[c] - 2.0 * f0[c] + fm[c]) / (hk * hk);
        }
        for l in (k + 1)..p.len() {
            let hl = step(steps.second, p[l]);
            let mut eval = |sk: f64, sl: f64| {
                x[k] = p[k] + sk * hk;
                x[l] = p[l] + sl * hl;
                let v = f(&x);
                x[k] = p[k];
                x[l] = p[l];
                v
            };
            let fpp = eval(1.0, 1.0);
            let fpm = eval(1.0, -1.0);
            let fmp = eval(-1.0, 1.0);
            let fmm = eval(-1.0, -1.0);
            for (c, jet) in out.iter_mut().enumerate() {
                let v = (fpp[c] - fpm[c] - fmp[c] + fmm[c]) / (4.0 * hk * hl);
                jet.h[k][l] = v;
                jet.h[l][k] = v;
            }
        }
    }
    out
}

impl Field {
    /// A field given by a closure over jets; derivatives are exact.
    pub fn analytic<F>(dim: usize, len: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        assert!(dim <= MAX_DIM, "chart dimension {dim} exceeds {MAX_DIM}");
        Self {
            dim,
            len,
            order: 2,
            kind: OracleKind::Analytic,
            eval: Arc::new(move |p, _| Ok(f(&Jet::seed(p)))),
        }
    }

    /// A field given by plain values; derivatives by central differences.
    pub fn sampled<F>(dim: usize, len: usize, steps: FdSteps, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        assert!(dim <= MAX_DIM, "chart dimension {dim} exceeds {MAX_DIM}");
        Self {
            dim,
            len,
            order: 2,
            kind: OracleKind::FiniteDifference,
            eval: Arc::new(move |p, order| Ok(fd_jets(&f, p, order, steps))),
        }
    }

    /// A field with no derivative oracle.
    pub fn values_only<F>(dim: usize, len: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            len,
            order: 0,
            kind: OracleKind::ValuesOnly,
            eval: Arc::new(move |p, _| Ok(f(p).into_iter().map(Jet::constant).collect())),
        }
    }

    /// A field whose jets (up to `order`) are produced by `f`.
    pub fn from_jets<F>(dim: usize, len: usize, order: usize, kind: OracleKind, f: F) -> Self
    where
        F: Fn(&[f64], usize) -> Result<Vec<Jet>> + Send + Sync + 'static,
    {
        Self {
            dim,
            len,
            order,
            kind,
            eval: Arc::new(f),
        }
    }

    /// Lifts a field with first-order jets to second order by central
    /// differencing of its gradients.
    pub fn with_fd_hessian(self, base_step: f64) -> Self {
        if self.order >= 2 {
            return self;
        }
        let inner = self.clone();
        let dim = self.dim;
        Self {
            order: 2,
            kind: OracleKind::Composite,
            eval: Arc::new(move |p, order| {
                let mut jets = inner.jets(p, order.min(1))?;
                if order < 2 {
                    return Ok(jets);
                }
                let mut x = p.to_vec();
                for k in 0..dim {
                    let h = step(base_step, p[k]);
                    x[k] = p[k] + h;
                    let jp = inner.jets(&x, 1)?;
                    x[k] = p[k] - h;
                    let jm = inner.jets(&x, 1)?;
                    x[k] = p[k];
                    for (c, jet) in jets.iter_mut().enumerate() {
                        for l in 0..dim {
                            jet.h[k][l] = (jp[c].d[l] - jm[c].d[l]) / (2.0 * h);
                        }
                    }
                }
                for jet in jets.iter_mut() {
                    for k in 0..dim {
                        for l in (k + 1)..dim {
                            let s = 0.5 * (jet.h[k][l] + jet.h[l][k]);
                            jet.h[k][l] = s;
                            jet.h[l][k] = s;
                        }
                    }
                }
                Ok(jets)
            }),
            ..self
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Highest derivative order the oracle supplies.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "field on a {}-dimensional chart evaluated at a point with {} coordinates",
                self.dim,
                p.len()
            )));
        }
        if order > self.order {
            return Err(Error::Unsupported(format!(
                "derivatives of order {order} requested from a {:?} field that supplies order {}",
                self.kind, self.order
            )));
        }
        let out = (self.eval)(p, order)?;
        debug_assert_eq!(out.len(), self.len);
        Ok(out)
    }

    pub fn values(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jets(p, 0)?.into_iter().map(|j| j.v).collect())
    }
}

#[derive(Clone, Debug)]
pub struct ScalarField(pub Field);

impl ScalarField {
    pub fn analytic<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Jet + Send + Sync + 'static,
    {
        Self(Field::analytic(dim, 1, move |x| vec![f(x)]))
    }

    pub fn sampled<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self(Field::sampled(dim, 1, FdSteps::default(), move |x| vec![f(x)]))
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::analytic(dim, move |_| Jet::constant(c))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        Ok(self.0.jets(p, order)?[0])
    }

    pub fn value(&self, p: &[f64]) -> Result<f64> {
        Ok(self.jet(p, 0)?.v)
    }

    /// Pointwise transform of the jet, e.g. `u ↦ u²`.
    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(Jet) -> Jet + Send + Sync + 'static,
    {
        let inner = self.clone();
        Self(Field::from_jets(
            self.dim(),
            1,
            self.0.order(),
            OracleKind::Composite,
            move |p, order| Ok(vec![f(inner.jet(p, order)?)]),
        ))
    }

    /// Pointwise combination of two scalar fields.
    pub fn zip<F>(&self, other: &ScalarField, f: F) -> Self
    where
        F: Fn(Jet, Jet) -> Jet + Send + Sync + 'static,
    {
        let (a, b) = (self.clone(), other.clone());
        Self(Field::from_jets(
            self.dim(),
            1,
            self.0.order().min(other.0.order()),
            OracleKind::Composite,
            move |p, order| Ok(vec![f(a.jet(p, order)?, b.jet(p, order)?)]),
        ))
    }
}

/// Contravariant vector field, components `X^i`.
#[derive(Clone, Debug)]
pub struct VectorField(pub Field);

impl VectorField {
    pub fn analytic<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        Self(Field::analytic(dim, dim, f))
    }

    pub fn zero(dim: usize) -> Self {
        Self::analytic(dim, move |_| vec![Jet::constant(0.0); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.0.jets(p, order)
    }

    pub fn vector(&self, p: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.0.values(p)?))
    }
}

/// Covariant one-form field, components `ω_i`.
#[derive(Clone, Debug)]
pub struct OneForm(pub Field);

impl OneForm {
    pub fn analytic<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        Self(Field::analytic(dim, dim, f))
    }

    pub fn zero(dim: usize) -> Self {
        Self::analytic(dim, move |_| vec![Jet::constant(0.0); dim])
    }

    /// The differential `du` of a scalar field (one derivative order lower).
    pub fn exact(u: &ScalarField) -> Self {
        let u = u.clone();
        let dim = u.dim();
        let order = u.0.order().saturating_sub(1);
        Self(Field::from_jets(
            dim,
            dim,
            order,
            OracleKind::Composite,
            move |p, order| {
                let j = u.jet(p, order + 1)?;
                Ok((0..dim)
                    .map(|i| {
                        let mut c = Jet::constant(j.d[i]);
                        if order >= 1 {
                            for k in 0..dim {
                                c.d[k] = j.h[i][k];
                            }
                        }
                        c
                    })
                    .collect())
            },
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.0.jets(p, order)
    }

    pub fn covector(&self, p: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.0.values(p)?))
    }
}

/// Covariant rank-2 tensor field stored row-major as `m*m` components.
#[derive(Clone, Debug)]
pub struct TensorField2 {
    field: Field,
    symmetric: bool,
}

impl TensorField2 {
    pub fn new(field: Field, symmetric: bool) -> Result<Self> {
        if field.len() != field.dim() * field.dim() {
            return Err(Error::DimensionMismatch(format!(
                "rank-2 tensor on a {}-dimensional chart needs {} components, got {}",
                field.dim(),
                field.dim() * field.dim(),
                field.len()
            )));
        }
        Ok(Self { field, symmetric })
    }

    pub fn analytic<F>(dim: usize, symmetric: bool, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        Self {
            field: Field::analytic(dim, dim * dim, f),
            symmetric,
        }
    }

    /// A field from plain matrix values; derivatives by central differences.
    pub fn sampled<F>(dim: usize, symmetric: bool, steps: FdSteps, f: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            field: Field::sampled(dim, dim * dim, steps, move |p| {
                let m = f(p);
                m.transpose().as_slice().to_vec()
            }),
            symmetric,
        }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.field.jets(p, order)
    }

    pub fn matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.dim();
        Ok(DMatrix::from_row_slice(m, m, &self.field.values(p)?))
    }
}

/// Riemannian metric `g_ij`, row-major; the upper triangle is authoritative
/// and mirrored so that symmetry holds exactly.
#[derive(Clone, Debug)]
pub struct MetricField(pub Field);

impl MetricField {
    pub fn new(field: Field) -> Result<Self> {
        if field.len() != field.dim() * field.dim() {
            return Err(Error::DimensionMismatch(format!(
                "metric on a {}-dimensional chart needs {} components, got {}",
                field.dim(),
                field.dim() * field.dim(),
                field.len()
            )));
        }
        Ok(Self(field))
    }

    pub fn analytic<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        Self(Field::analytic(dim, dim * dim, f))
    }

    /// Metric `diag(f_1, ..., f_m)` from analytic diagonal entries.
    pub fn diagonal<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        Self::analytic(dim, move |x| {
            let d = f(x);
            let mut out = vec![Jet::constant(0.0); dim * dim];
            for i in 0..dim {
                out[i * dim + i] = d[i];
            }
            out
        })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::diagonal(dim, move |_| vec![Jet::constant(1.0); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn kind(&self) -> OracleKind {
        self.0.kind()
    }

    pub fn jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let m = self.dim();
        let mut jets = self.0.jets(p, order)?;
        for i in 0..m {
            for j in (i + 1)..m {
                jets[j * m + i] = jets[i * m + j];
            }
        }
        Ok(jets)
    }

    pub fn matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.dim();
        let jets = self.jets(p, 0)?;
        Ok(DMatrix::from_fn(m, m, |i, j| jets[i * m + j].v))
    }
}

/// Smooth map between charts, components `φ^γ`.
#[derive(Clone, Debug)]
pub struct SmoothMap {
    field: Field,
}

impl SmoothMap {
    pub fn new(field: Field) -> Self {
        Self { field }
    }

    pub fn analytic<F>(source_dim: usize, target_dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        Self {
            field: Field::analytic(source_dim, target_dim, f),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::analytic(dim, dim, |x| x.to_vec())
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn source_dim(&self) -> usize {
        self.field.dim()
    }

    pub fn target_dim(&self) -> usize {
        self.field.len()
    }

    pub fn jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.field.jets(p, order)
    }

    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.field.values(p)
    }

    /// Jacobian `∂_i φ^γ` as an `n × m` matrix.
    pub fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let jets = self.jets(p, 1)?;
        let m = self.source_dim();
        Ok(DMatrix::from_fn(self.target_dim(), m, |g, i| jets[g].d[i]))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &SmoothMap) -> Result<SmoothMap> {
        if inner.target_dim() != self.source_dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose a map on a {}-dimensional chart after a map into {} dimensions",
                self.source_dim(),
                inner.target_dim()
            )));
        }
        let (outer, inner) = (self.clone(), inner.clone());
        let order = outer.field.order().min(inner.field.order());
        Ok(SmoothMap::new(Field::from_jets(
            inner.source_dim(),
            outer.target_dim(),
            order,
            OracleKind::Composite,
            move |p, order| {
                let u = inner.jets(p, order)?;
                let q: Vec<f64> = u.iter().map(|j| j.v).collect();
                let f = outer.jets(&q, order)?;
                Ok(f.iter().map(|fj| Jet::compose(fj, &u)).collect())
            },
        )))
    }

    /// `f ∘ self` for a scalar field on the target chart.
    pub fn pull_scalar(&self, f: &ScalarField) -> Result<ScalarField> {
        let composed = SmoothMap::new(f.0.clone()).compose(self)?;
        Ok(ScalarField(composed.field))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_fallback_agrees_with_analytic_at_second_order() {
        let f = |x: &[f64]| vec![(x[0] * x[1]).sin() + x[0].exp() * x[1]];
        let fa = Field::analytic(2, 1, |x| vec![(x[0] * x[1]).sin() + x[0].exp() * x[1]]);
        let p = [0.3, 0.8];
        let exact = fa.jets(&p, 2).unwrap()[0];
        let err = |h1: f64, h2: f64| {
            let fd = Field::sampled(2, 1, FdSteps { first: h1, second: h2 }, f);
            let j = fd.jets(&p, 2).unwrap()[0];
            let e1 = (0..2).map(|a| (j.d[a] - exact.d[a]).abs()).fold(0.0, f64::max);
            let e2 = (0..2)
                .flat_map(|a| (0..2).map(move |b| (a, b)))
                .map(|(a, b)| (j.h[a][b] - exact.h[a][b]).abs())
                .fold(0.0, f64::max);
            (e1, e2)
        };
        let (a1, a2) = err(2e-2, 4e-2);
        let (b1, b2) = err(1e-2, 2e-2);
        let r1 = a1 / b1;
        let r2 = a2 / b2;
        assert!((r1 - 4.0).abs() <= 1.0, "first-derivative ratio {r1}");
        assert!((r2 - 4.0).abs() <= 1.0, "second-derivative ratio {r2}");
    }

    #[test]
    fn values_only_field_rejects_derivative_requests() {
        let f = Field::values_only(2, 1, |x| vec![x[0]]);
        assert!(matches!(f.jets(&[0.0, 0.0], 1), Err(Error::Unsupported(_))));
        assert_eq!(f.values(&[2.0, 0.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn metric_is_exactly_symmetric() {
        let g = MetricField::analytic(2, |x| {
            vec![Jet::constant(1.0), x[0] * 0.1, x[1] * 0.3, Jet::constant(2.0)]
        });
        let m = g.matrix(&[0.5, 0.7]).unwrap();
        assert_eq!(m[(0, 1)], m[(1, 0)]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = ScalarField::constant(3, 1.0);
        assert!(matches!(f.value(&[0.0]), Err(Error::DimensionMismatch(_))));
    }
}
