//! Pointwise differential geometry in a single chart.
//!
//! [`LocalGeometry`] caches the metric, its inverse, Christoffel symbols and
//! (when second derivatives are available) their first derivatives at one
//! point. Curvature, Hessians, Lie derivatives, divergences and tension fields
//! are evaluated from that cache. The free functions at the bottom of the
//! module are field-level conveniences that build the cache on demand.
//!
//! Sign conventions: `Δf = g^{ij}(∇df)_ij`, so `Δh_v = -m h_v` for height
//! functions on the unit sphere.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::{FdSteps, Field, MetricField, OneForm, OracleKind, ScalarField, SmoothMap, TensorField2, VectorField};
use crate::jet::Jet;

/// Christoffel symbols of the second kind, `Γ^l_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    m: usize,
    data: Vec<f64>,
}

impl Christoffel {
    fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; m * m * m],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, l: usize, i: usize, j: usize) -> f64 {
        self.data[(l * self.m + i) * self.m + j]
    }

    #[inline]
    fn set(&mut self, l: usize, i: usize, j: usize, v: f64) {
        self.data[(l * self.m + i) * self.m + j] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Metric data and connection at a single chart point.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    m: usize,
    point: Vec<f64>,
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    dg: Vec<DMatrix<f64>>,
    ddg: Option<Vec<Vec<DMatrix<f64>>>>,
    gamma: Christoffel,
    dgamma: Option<Vec<Christoffel>>,
}

impl LocalGeometry {
    /// Full second-order data; required for curvature.
    pub fn new(metric: &MetricField, p: &[f64]) -> Result<Self> {
        let jets = metric.jets(p, 2)?;
        Self::from_jets(metric.dim(), p, &jets, 2)
    }

    /// Connection only; enough for Hessians, Lie derivatives, tension fields.
    pub fn first_order(metric: &MetricField, p: &[f64]) -> Result<Self> {
        let jets = metric.jets(p, 1)?;
        Self::from_jets(metric.dim(), p, &jets, 1)
    }

    /// Builds the cache from row-major metric jets (`m*m` entries).
    pub fn from_jets(m: usize, p: &[f64], jets: &[Jet], order: usize) -> Result<Self> {
        if jets.len() != m * m {
            return Err(Error::DimensionMismatch(format!(
                "expected {} metric components, got {}",
                m * m,
                jets.len()
            )));
        }
        let g = DMatrix::from_fn(m, m, |i, j| jets[i * m + j].v);
        let ginv = invert_spd(&g, p)?;
        let dg: Vec<DMatrix<f64>> = (0..m)
            .map(|k| DMatrix::from_fn(m, m, |i, j| jets[i * m + j].d[k]))
            .collect();
        let ddg = (order >= 2).then(|| {
            (0..m)
                .map(|k| {
                    (0..m)
                        .map(|l| DMatrix::from_fn(m, m, |i, j| jets[i * m + j].h[k][l]))
                        .collect()
                })
                .collect::<Vec<Vec<_>>>()
        });

        // first-kind symbols S_kij = ∂_i g_kj + ∂_j g_ik − ∂_k g_ij
        let first_kind = |k: usize, i: usize, j: usize| dg[i][(k, j)] + dg[j][(i, k)] - dg[k][(i, j)];
        let mut gamma = Christoffel::zeros(m);
        for l in 0..m {
            for i in 0..m {
                for j in i..m {
                    let v = 0.5 * (0..m).map(|k| ginv[(l, k)] * first_kind(k, i, j)).sum::<f64>();
                    gamma.set(l, i, j, v);
                    gamma.set(l, j, i, v);
                }
            }
        }

        let dgamma = ddg.as_ref().map(|ddg| {
            (0..m)
                .map(|a| {
                    let dginv = -(&ginv * &dg[a] * &ginv);
                    let mut out = Christoffel::zeros(m);
                    for l in 0..m {
                        for i in 0..m {
                            for j in i..m {
                                let mut v = 0.0;
                                for k in 0..m {
                                    let ds = ddg[a][i][(k, j)] + ddg[a][j][(i, k)] - ddg[a][k][(i, j)];
                                    v += dginv[(l, k)] * first_kind(k, i, j) + ginv[(l, k)] * ds;
                                }
                                out.set(l, i, j, 0.5 * v);
                                out.set(l, j, i, 0.5 * v);
                            }
                        }
                    }
                    out
                })
                .collect()
        });

        Ok(Self {
            m,
            point: p.to_vec(),
            g,
            ginv,
            dg,
            ddg,
            gamma,
            dgamma,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.ginv
    }

    /// `∂_k g_ij` as a matrix for each `k`.
    pub fn metric_derivative(&self, k: usize) -> &DMatrix<f64> {
        &self.dg[k]
    }

    pub fn christoffel(&self) -> &Christoffel {
        &self.gamma
    }

    fn dgamma(&self) -> Result<&[Christoffel]> {
        self.dgamma.as_deref().ok_or_else(|| {
            Error::Unsupported("curvature needs second derivatives of the metric".into())
        })
    }

    /// `∂_a Γ^l_ij` for each `a`.
    pub fn christoffel_derivatives(&self) -> Result<&[Christoffel]> {
        self.dgamma()
    }

    pub fn ricci(&self) -> Result<DMatrix<f64>> {
        let m = self.m;
        let dgamma = self.dgamma()?;
        let gm = &self.gamma;
        let mut ric = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut v = 0.0;
                for l in 0..m {
                    v += dgamma[l].get(l, i, j) - dgamma[j].get(l, i, l);
                    for k in 0..m {
                        v += gm.get(l, l, k) * gm.get(k, i, j) - gm.get(l, j, k) * gm.get(k, i, l);
                    }
                }
                ric[(i, j)] = v;
            }
        }
        Ok(ric)
    }

    pub fn scalar_curvature(&self) -> Result<f64> {
        Ok(self.trace(&self.ricci()?))
    }

    /// `g^{ij} T_ij`.
    pub fn trace(&self, t: &DMatrix<f64>) -> f64 {
        self.ginv.component_mul(t).sum()
    }

    /// `T − (tr_g T / m) g`.
    pub fn traceless(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        t - &self.g * (self.trace(t) / self.m as f64)
    }

    /// `g^{ik} g^{jl} T_ij T_kl`.
    pub fn norm2(&self, t: &DMatrix<f64>) -> f64 {
        let raised = &self.ginv * t * &self.ginv;
        raised.component_mul(t).sum()
    }

    /// `g(u, v)`.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.g * v)[(0, 0)]
    }

    /// `g^{ij} α_i β_j`.
    pub fn inner_covectors(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.transpose() * &self.ginv * b)[(0, 0)]
    }

    pub fn sharp(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.ginv * w
    }

    pub fn flat(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.g * x
    }

    /// `(∇df)_ij = ∂_i∂_j f − Γ^k_ij ∂_k f`.
    pub fn hessian(&self, f: &Jet) -> DMatrix<f64> {
        let m = self.m;
        DMatrix::from_fn(m, m, |i, j| {
            f.h[i][j] - (0..m).map(|k| self.gamma.get(k, i, j) * f.d[k]).sum::<f64>()
        })
    }

    pub fn laplacian(&self, f: &Jet) -> f64 {
        self.trace(&self.hessian(f))
    }

    /// `∇f = g^{ij} ∂_j f`.
    pub fn gradient(&self, f: &Jet) -> DVector<f64> {
        &self.ginv * DVector::from_vec(f.grad(self.m))
    }

    /// `(L_X g)_ij = X^k ∂_k g_ij + g_kj ∂_i X^k + g_ik ∂_j X^k`.
    pub fn lie_derivative(&self, x: &[Jet]) -> DMatrix<f64> {
        let m = self.m;
        DMatrix::from_fn(m, m, |i, j| {
            let mut v = 0.0;
            for k in 0..m {
                v += x[k].v * self.dg[k][(i, j)]
                    + self.g[(k, j)] * x[k].d[i]
                    + self.g[(i, k)] * x[k].d[j];
            }
            v
        })
    }

    /// `div X = ∂_i X^i + Γ^i_ik X^k`.
    pub fn divergence(&self, x: &[Jet]) -> f64 {
        let m = self.m;
        let mut v = 0.0;
        for i in 0..m {
            v += x[i].d[i];
            for k in 0..m {
                v += self.gamma.get(i, i, k) * x[k].v;
            }
        }
        v
    }

    /// `(div T)_j = g^{ik} (∇_i T)_kj` for a covariant rank-2 tensor given as
    /// row-major jets with first derivatives.
    pub fn divergence_sym2(&self, t: &[Jet]) -> DVector<f64> {
        let m = self.m;
        let comp = |k: usize, j: usize| &t[k * m + j];
        DVector::from_fn(m, |j, _| {
            let mut v = 0.0;
            for i in 0..m {
                for k in 0..m {
                    let mut nabla = comp(k, j).d[i];
                    for l in 0..m {
                        nabla -= self.gamma.get(l, i, k) * comp(l, j).v
                            + self.gamma.get(l, i, j) * comp(k, l).v;
                    }
                    v += self.ginv[(i, k)] * nabla;
                }
            }
            v
        })
    }

    /// Tension field of a map with jets `phi` (second order) into a target
    /// whose connection at `φ(p)` is `target`; `None` means a flat target.
    pub fn tension(&self, phi: &[Jet], target: Option<&Christoffel>) -> DVector<f64> {
        let m = self.m;
        let n = phi.len();
        DVector::from_fn(n, |c, _| {
            let mut v = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let gij = self.ginv[(i, j)];
                    if gij == 0.0 {
                        continue;
                    }
                    let mut s = phi[c].h[i][j];
                    for k in 0..m {
                        s -= self.gamma.get(k, i, j) * phi[c].d[k];
                    }
                    if let Some(tg) = target {
                        for a in 0..n {
                            for b in 0..n {
                                s += tg.get(c, a, b) * phi[a].d[i] * phi[b].d[j];
                            }
                        }
                    }
                    v += gij * s;
                }
            }
            v
        })
    }

    /// DeTurck vector `Z^l = g^{ij}(Γ̄^l_ij − Γ^l_ij)` for this metric
    /// against `reference`.
    pub fn deturck(&self, reference: &LocalGeometry) -> DVector<f64> {
        let m = self.m;
        DVector::from_fn(m, |l, _| {
            let mut v = 0.0;
            for i in 0..m {
                for j in 0..m {
                    v += self.ginv[(i, j)]
                        * (reference.gamma.get(l, i, j) - self.gamma.get(l, i, j));
                }
            }
            v
        })
    }

    /// DeTurck vector as first-order jets; needs second-order data on both
    /// metrics.
    pub fn deturck_jets(&self, reference: &LocalGeometry) -> Result<Vec<Jet>> {
        let m = self.m;
        let dg_self = self.dgamma()?;
        let dg_ref = reference.dgamma()?;
        let z = self.deturck(reference);
        let dginv: Vec<DMatrix<f64>> = (0..m).map(|a| -(&self.ginv * &self.dg[a] * &self.ginv)).collect();
        Ok((0..m)
            .map(|l| {
                let mut jet = Jet::constant(z[l]);
                for a in 0..m {
                    let mut v = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            let diff = reference.gamma.get(l, i, j) - self.gamma.get(l, i, j);
                            let ddiff = dg_ref[a].get(l, i, j) - dg_self[a].get(l, i, j);
                            v += dginv[a][(i, j)] * diff + self.ginv[(i, j)] * ddiff;
                        }
                    }
                    jet.d[a] = v;
                }
                jet
            })
            .collect())
    }

    /// Whether second-order data is cached.
    pub fn has_curvature(&self) -> bool {
        self.ddg.is_some()
    }
}

fn invert_spd(g: &DMatrix<f64>, p: &[f64]) -> Result<DMatrix<f64>> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("metric components at {p:?}")));
    }
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularMetric { point: p.to_vec() })?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

fn check_point(m: usize, p: &[f64]) -> Result<()> {
    if p.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, chart has {m}",
            p.len()
        )));
    }
    Ok(())
}

pub fn christoffel(g: &MetricField, p: &[f64]) -> Result<Christoffel> {
    check_point(g.dim(), p)?;
    Ok(LocalGeometry::first_order(g, p)?.gamma)
}

pub fn ricci(g: &MetricField, p: &[f64]) -> Result<DMatrix<f64>> {
    check_point(g.dim(), p)?;
    LocalGeometry::new(g, p)?.ricci()
}

pub fn scalar_curvature(g: &MetricField, p: &[f64]) -> Result<f64> {
    check_point(g.dim(), p)?;
    LocalGeometry::new(g, p)?.scalar_curvature()
}

/// Coordinate gradient `∂_k S`, by fourth-order central differences of the
/// scalar curvature (step `1e-3·max(1, |x_k|)`).
pub fn scalar_curvature_differential(g: &MetricField, p: &[f64]) -> Result<DVector<f64>> {
    check_point(g.dim(), p)?;
    let m = g.dim();
    let mut x = p.to_vec();
    let mut out = DVector::zeros(m);
    for k in 0..m {
        let h = 1e-3 * p[k].abs().max(1.0);
        let mut s = |off: f64| -> Result<f64> {
            x[k] = p[k] + off;
            let v = scalar_curvature(g, &x);
            x[k] = p[k];
            v
        };
        out[k] = (-s(2.0 * h)? + 8.0 * s(h)? - 8.0 * s(-h)? + s(-2.0 * h)?) / (12.0 * h);
    }
    Ok(out)
}

/// Metric gradient `∇S` of the scalar curvature.
pub fn grad_scalar_curvature(g: &MetricField, p: &[f64]) -> Result<DVector<f64>> {
    let ds = scalar_curvature_differential(g, p)?;
    Ok(LocalGeometry::first_order(g, p)?.sharp(&ds))
}

/// The Ricci tensor as a field (values from the curvature formula,
/// derivatives by central differences).
pub fn ricci_field(g: &MetricField) -> TensorField2 {
    let g2 = g.clone();
    TensorField2::sampled(g.dim(), true, FdSteps::default(), move |p| {
        ricci(&g2, p).unwrap_or_else(|_| DMatrix::from_element(p.len(), p.len(), f64::NAN))
    })
}

pub fn lie_derivative_metric(x: &VectorField, g: &MetricField, p: &[f64]) -> Result<DMatrix<f64>> {
    check_point(g.dim(), p)?;
    let xj = x.jets(p, 1)?;
    Ok(LocalGeometry::first_order(g, p)?.lie_derivative(&xj))
}

pub fn hessian_scalar(f: &ScalarField, g: &MetricField, p: &[f64]) -> Result<DMatrix<f64>> {
    check_point(g.dim(), p)?;
    Ok(LocalGeometry::first_order(g, p)?.hessian(&f.jet(p, 2)?))
}

pub fn laplacian_scalar(f: &ScalarField, g: &MetricField, p: &[f64]) -> Result<f64> {
    check_point(g.dim(), p)?;
    Ok(LocalGeometry::first_order(g, p)?.laplacian(&f.jet(p, 2)?))
}

pub fn gradient(f: &ScalarField, g: &MetricField, p: &[f64]) -> Result<DVector<f64>> {
    check_point(g.dim(), p)?;
    let ginv = invert_spd(&g.matrix(p)?, p)?;
    Ok(ginv * DVector::from_vec(f.jet(p, 1)?.grad(g.dim())))
}

pub fn traceless(t: &TensorField2, g: &MetricField, p: &[f64]) -> Result<DMatrix<f64>> {
    check_point(g.dim(), p)?;
    let geo = LocalGeometry::first_order(g, p)?;
    Ok(geo.traceless(&t.matrix(p)?))
}

pub fn divergence_sym2(t: &TensorField2, g: &MetricField, p: &[f64]) -> Result<DVector<f64>> {
    check_point(g.dim(), p)?;
    if t.field().order() < 1 {
        return Err(Error::Unsupported(
            "divergence needs a derivative oracle on the tensor components".into(),
        ));
    }
    let jets = t.jets(p, 1)?;
    Ok(LocalGeometry::first_order(g, p)?.divergence_sym2(&jets))
}

pub fn divergence_vector(x: &VectorField, g: &MetricField, p: &[f64]) -> Result<f64> {
    check_point(g.dim(), p)?;
    Ok(LocalGeometry::first_order(g, p)?.divergence(&x.jets(p, 1)?))
}

/// Tension field `τ(φ)` of `φ: (M, g) → (N, h)` at `p`.
pub fn tension_field(phi: &SmoothMap, g: &MetricField, h: &MetricField, p: &[f64]) -> Result<DVector<f64>> {
    if phi.source_dim() != g.dim() || phi.target_dim() != h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "map {}→{} against metrics of dimension {} and {}",
            phi.source_dim(),
            phi.target_dim(),
            g.dim(),
            h.dim()
        )));
    }
    check_point(g.dim(), p)?;
    let jets = phi.jets(p, 2)?;
    let q: Vec<f64> = jets.iter().map(|j| j.v).collect();
    let target = LocalGeometry::first_order(h, &q)?;
    Ok(LocalGeometry::first_order(g, p)?.tension(&jets, Some(target.christoffel())))
}

/// `(ψ*g)_ij(p) = ∂_iψ^a ∂_jψ^b g_ab(ψ(p))`.
pub fn pullback_metric(psi: &SmoothMap, g: &MetricField, p: &[f64]) -> Result<DMatrix<f64>> {
    let jac = psi.jacobian(p)?;
    let q = psi.apply(p)?;
    let gq = g.matrix(&q)?;
    Ok(jac.transpose() * gq * jac)
}

pub fn pullback_oneform(psi: &SmoothMap, w: &OneForm, p: &[f64]) -> Result<DVector<f64>> {
    let jac = psi.jacobian(p)?;
    let q = psi.apply(p)?;
    Ok(jac.transpose() * w.covector(&q)?)
}

/// First-order jets of `∂_iψ^a` from second-order jets of `ψ`.
fn jacobian_jets(psi: &[Jet], m: usize) -> Vec<Vec<Jet>> {
    psi.iter()
        .map(|c| {
            (0..m)
                .map(|i| {
                    let mut j = Jet::constant(c.d[i]);
                    for k in 0..m {
                        j.d[k] = c.h[i][k];
                    }
                    j
                })
                .collect()
        })
        .collect()
}

/// `ψ*g` as a metric field: exact first derivatives, second derivatives by
/// central differences of the first.
pub fn pullback_metric_field(psi: &SmoothMap, g: &MetricField) -> Result<MetricField> {
    if psi.target_dim() != g.dim() {
        return Err(Error::DimensionMismatch("pullback target dimension".into()));
    }
    let (psi, g) = (psi.clone(), g.clone());
    let m = psi.source_dim();
    let n = psi.target_dim();
    let field = Field::from_jets(m, m * m, 1, OracleKind::Composite, move |p, order| {
        let u = psi.jets(p, order + 1)?;
        let q: Vec<f64> = u.iter().map(|j| j.v).collect();
        let gq = g.jets(&q, order)?;
        let jac = jacobian_jets(&u, m);
        let gpsi: Vec<Jet> = gq.iter().map(|c| Jet::compose(c, &u).truncate_first()).collect();
        let mut out = vec![Jet::constant(0.0); m * m];
        for i in 0..m {
            for j in i..m {
                let mut s = Jet::constant(0.0);
                for a in 0..n {
                    for b in 0..n {
                        s += jac[a][i] * jac[b][j] * gpsi[a * n + b];
                    }
                }
                let s = s.truncate_first();
                out[i * m + j] = s;
                out[j * m + i] = s;
            }
        }
        Ok(out)
    })
    .with_fd_hessian(1e-5);
    MetricField::new(field)
}

/// `ψ*ω` as a one-form field with exact first derivatives.
pub fn pullback_oneform_field(psi: &SmoothMap, w: &OneForm) -> Result<OneForm> {
    if psi.target_dim() != w.dim() {
        return Err(Error::DimensionMismatch("pullback target dimension".into()));
    }
    let (psi, w) = (psi.clone(), w.clone());
    let m = psi.source_dim();
    let n = psi.target_dim();
    Ok(OneForm(Field::from_jets(m, m, 1, OracleKind::Composite, move |p, order| {
        let u = psi.jets(p, order + 1)?;
        let q: Vec<f64> = u.iter().map(|j| j.v).collect();
        let wq = w.jets(&q, order)?;
        let jac = jacobian_jets(&u, m);
        let wpsi: Vec<Jet> = wq.iter().map(|c| Jet::compose(c, &u).truncate_first()).collect();
        Ok((0..m)
            .map(|i| (0..n).map(|a| jac[a][i] * wpsi[a]).sum::<Jet>().truncate_first())
            .collect())
    })))
}

pub fn sharp(w: &DVector<f64>, g: &MetricField, p: &[f64]) -> Result<DVector<f64>> {
    Ok(invert_spd(&g.matrix(p)?, p)? * w)
}

pub fn flat(x: &DVector<f64>, g: &MetricField, p: &[f64]) -> Result<DVector<f64>> {
    Ok(g.matrix(p)? * x)
}

/// `X♭` as a one-form field (`ω_j = g_jk X^k`), with derivatives up to the
/// lower of the two oracles.
pub fn flat_field(x: &VectorField, g: &MetricField) -> OneForm {
    let (x, g) = (x.clone(), g.clone());
    let m = g.dim();
    let order = x.0.order().min(g.0.order());
    OneForm(Field::from_jets(m, m, order, OracleKind::Composite, move |p, order| {
        let xj = x.jets(p, order)?;
        let gj = g.jets(p, order)?;
        Ok((0..m)
            .map(|j| (0..m).map(|k| gj[j * m + k] * xj[k]).sum())
            .collect())
    }))
}

/// `∇f` as a vector field (first-order jets).
pub fn gradient_field(f: &ScalarField, g: &MetricField) -> VectorField {
    let (f, g) = (f.clone(), g.clone());
    let m = g.dim();
    VectorField(Field::from_jets(m, m, 1, OracleKind::Composite, move |p, order| {
        let fj = f.jet(p, order + 1)?;
        let geo = LocalGeometry::first_order(&g, p)?;
        let ginv = geo.inverse();
        let mut out: Vec<Jet> = (0..m)
            .map(|i| Jet::constant((0..m).map(|j| ginv[(i, j)] * fj.d[j]).sum()))
            .collect();
        if order >= 1 {
            for a in 0..m {
                let dginv = -(ginv * geo.metric_derivative(a) * ginv);
                for i in 0..m {
                    out[i].d[a] = (0..m)
                        .map(|j| dginv[(i, j)] * fj.d[j] + ginv[(i, j)] * fj.h[j][a])
                        .sum();
                }
            }
        }
        Ok(out)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_warped_2d() -> MetricField {
        MetricField::diagonal(2, |x| vec![Jet::constant(1.0), (x[0] * 2.0).exp()])
    }

    #[test]
    fn flat_metric_has_vanishing_connection_and_curvature() {
        let g = MetricField::euclidean(3);
        let p = [0.2, -0.4, 1.3];
        assert_eq!(christoffel(&g, &p).unwrap().max_abs(), 0.0);
        assert_eq!(ricci(&g, &p).unwrap().amax(), 0.0);
        assert_eq!(scalar_curvature(&g, &p).unwrap(), 0.0);
    }

    #[test]
    fn exponential_warp_christoffel_symbols() {
        let g = exp_warped_2d();
        for p in [[0.0, 0.0], [0.7, -1.2], [-1.1, 3.0]] {
            let gm = christoffel(&g, &p).unwrap();
            let e = (2.0 * p[0]).exp();
            assert!((gm.get(0, 1, 1) + e).abs() < 1e-12 * e.max(1.0));
            assert!((gm.get(1, 0, 1) - 1.0).abs() < 1e-14);
            assert_eq!(gm.get(1, 0, 1), gm.get(1, 1, 0));
            assert_eq!(gm.get(0, 0, 0), 0.0);
            assert_eq!(gm.get(1, 1, 1), 0.0);
        }
    }

    #[test]
    fn euler_field_lie_derivative_is_twice_identity() {
        let g = MetricField::euclidean(3);
        let x = VectorField::analytic(3, |x| x.to_vec());
        let l = lie_derivative_metric(&x, &g, &[0.3, 0.1, -2.0]).unwrap();
        assert!((l - DMatrix::identity(3, 3) * 2.0).amax() < 1e-15);
    }

    #[test]
    fn traceless_examples() {
        let g = MetricField::euclidean(2);
        let t = TensorField2::analytic(2, true, |_| {
            vec![Jet::constant(1.0), Jet::constant(0.0), Jet::constant(0.0), Jet::constant(3.0)]
        });
        let r = traceless(&t, &g, &[0.0, 0.0]).unwrap();
        assert_eq!(r, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
        let tg = TensorField2::new(exp_warped_2d().0.clone(), true).unwrap();
        let r = traceless(&tg, &exp_warped_2d(), &[0.4, 0.1]).unwrap();
        assert!(r.amax() < 1e-15);
    }

    #[test]
    fn singular_metric_reports_point() {
        let g = MetricField::diagonal(2, |x| vec![x[0], Jet::constant(1.0)]);
        match ricci(&g, &[0.0, 0.5]) {
            Err(Error::SingularMetric { point }) => assert_eq!(point, vec![0.0, 0.5]),
            other => panic!("expected singular metric error, got {other:?}"),
        }
    }

    #[test]
    fn hessian_of_linear_function_on_flat_space_vanishes() {
        let g = MetricField::euclidean(2);
        let f = ScalarField::analytic(2, |x| x[0]);
        assert_eq!(hessian_scalar(&f, &g, &[1.0, 2.0]).unwrap().amax(), 0.0);
        assert_eq!(gradient(&f, &g, &[1.0, 2.0]).unwrap(), DVector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn identity_map_is_harmonic() {
        let g = exp_warped_2d();
        let id = SmoothMap::identity(2);
        let t = tension_field(&id, &g, &g, &[0.3, -0.2]).unwrap();
        assert!(t.amax() < 1e-14);
        let bad = SmoothMap::identity(3);
        assert!(matches!(tension_field(&bad, &g, &g, &[0.0, 0.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn divergence_requires_derivatives() {
        let g = MetricField::euclidean(2);
        let t = TensorField2::new(Field::values_only(2, 4, |_| vec![1.0, 0.0, 0.0, 1.0]), true).unwrap();
        assert!(matches!(divergence_sym2(&t, &g, &[0.0, 0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn deturck_vanishes_for_identical_and_scaled_metrics() {
        let g = exp_warped_2d();
        let p = [0.2, 0.5];
        let a = LocalGeometry::new(&g, &p).unwrap();
        assert_eq!(a.deturck(&a).amax(), 0.0);
        let scaled = MetricField::diagonal(2, |x| vec![Jet::constant(3.0), (x[0] * 2.0).exp() * 3.0]);
        let b = LocalGeometry::new(&scaled, &p).unwrap();
        assert!(b.deturck(&a).amax() < 1e-14);
    }

    #[test]
    fn pullback_by_identity_and_translation() {
        let g = exp_warped_2d();
        let id = SmoothMap::identity(2);
        let p = [0.3, 0.4];
        assert!((pullback_metric(&id, &g, &p).unwrap() - g.matrix(&p).unwrap()).amax() < 1e-15);
        let e = MetricField::euclidean(2);
        let shift = SmoothMap::analytic(2, 2, |x| vec![x[0] + 1.5, x[1] - 0.25]);
        assert!((pullback_metric(&shift, &e, &p).unwrap() - DMatrix::identity(2, 2)).amax() < 1e-15);
    }
}
