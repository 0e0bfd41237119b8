//! Concrete geometries and soliton structures.
//!
//! Each instance is a data bundle: a chart, a metric with an analytic
//! derivative oracle, and named fields. Instances are addressable by name and
//! a parameter map through [`build`].

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Mutex;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::field::{Field, MetricField, OneForm, OracleKind, ScalarField, SmoothMap, TensorField2, VectorField};
use crate::jet::Jet;
use crate::tensor::{flat_field, gradient_field, LocalGeometry};

/// Points checked by [`build`] before returning a bundle.
pub const BUILD_CHECK_POINTS: usize = 100;

/// Every name accepted by [`build`].
pub const CATALOG: &[&str] = &[
    "euclidean",
    "hyperbolic-warped",
    "round-sphere",
    "berger",
    "punctured-euclidean",
    "euclidean-soliton",
    "einstein-sphere",
    "berger-soliton",
    "warped-soliton",
    "obata-sphere",
    "non-gradient-witness",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

pub type Params = BTreeMap<String, ParamValue>;

/// Reads typed parameters and rejects keys nobody asked for.
struct ParamReader<'a> {
    params: &'a Params,
    used: Mutex<BTreeSet<String>>,
}

impl<'a> ParamReader<'a> {
    fn new(params: &'a Params) -> Self {
        Self {
            params,
            used: Mutex::new(BTreeSet::new()),
        }
    }

    fn scalar(&self, key: &str, default: Option<f64>) -> Result<f64> {
        self.used.lock().unwrap().insert(key.to_string());
        match self.params.get(key) {
            Some(ParamValue::Scalar(v)) if v.is_finite() => Ok(*v),
            Some(ParamValue::Scalar(_)) => Err(Error::param(format!("`{key}` must be finite"))),
            Some(ParamValue::Vector(_)) => Err(Error::param(format!("`{key}` must be a number"))),
            None => default.ok_or_else(|| Error::param(format!("missing parameter `{key}`"))),
        }
    }

    fn int(&self, key: &str, default: Option<usize>) -> Result<usize> {
        let v = self.scalar(key, default.map(|d| d as f64))?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::param(format!("`{key}` must be a non-negative integer, got {v}")));
        }
        Ok(v as usize)
    }

    fn vector(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        self.used.lock().unwrap().insert(key.to_string());
        match self.params.get(key) {
            Some(ParamValue::Vector(v)) => Ok(v.clone()),
            Some(ParamValue::Scalar(s)) => Ok(vec![*s]),
            None => Ok(default),
        }
    }

    fn finish(self) -> Result<()> {
        let used = self.used.into_inner().unwrap();
        let unknown: Vec<&String> = self.params.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::param(format!("unknown parameter(s): {unknown:?}")))
        }
    }
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::param(msg))
    }
}

fn check_dim(m: usize, min: usize) -> Result<()> {
    require(
        m >= min && m <= crate::jet::MAX_DIM,
        format!("dimension must satisfy {min} ≤ m ≤ {}, got {m}", crate::jet::MAX_DIM),
    )
}

#[derive(Clone, Debug)]
pub enum NamedField {
    Scalar(ScalarField),
    Vector(VectorField),
    OneForm(OneForm),
    TwoTensor(TensorField2),
    Metric(MetricField),
    Map(SmoothMap),
}

#[derive(Clone, Debug)]
pub struct GeometrySpec {
    pub name: String,
    pub label: String,
    pub chart: Chart,
    pub metric: MetricField,
    pub fields: BTreeMap<String, NamedField>,
    pub params: Params,
}

macro_rules! field_getter {
    ($fn_name:ident, $variant:ident, $ty:ty) => {
        pub fn $fn_name(&self, key: &str) -> Result<&$ty> {
            match self.fields.get(key) {
                Some(NamedField::$variant(f)) => Ok(f),
                _ => Err(Error::MissingField(format!("`{key}` on {}", self.label))),
            }
        }
    };
}

impl GeometrySpec {
    fn new(name: &str, label: String, chart: Chart, metric: MetricField, params: Params) -> Self {
        Self {
            name: name.to_string(),
            label,
            chart,
            metric,
            fields: BTreeMap::new(),
            params,
        }
    }

    fn with(mut self, key: &str, f: NamedField) -> Self {
        self.fields.insert(key.to_string(), f);
        self
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        self.chart.sample(count, seed)
    }

    field_getter!(scalar, Scalar, ScalarField);
    field_getter!(vector, Vector, VectorField);
    field_getter!(one_form, OneForm, OneForm);
    field_getter!(two_tensor, TwoTensor, TensorField2);
    field_getter!(metric_named, Metric, MetricField);
    field_getter!(map, Map, SmoothMap);

    /// Metric symmetry, positive-definiteness and finiteness of every named
    /// field at `count` sampled points.
    pub fn check_invariants(&self, count: usize, seed: u64) -> Result<()> {
        for p in self.sample(count, seed) {
            self.chart.check(&p)?;
            let g = self.metric.matrix(&p)?;
            if (&g - g.transpose()).amax() != 0.0 {
                return Err(Error::param(format!("metric not symmetric at {p:?}")));
            }
            LocalGeometry::first_order(&self.metric, &p)?;
            for (key, f) in &self.fields {
                let vals = match f {
                    NamedField::Scalar(s) => s.0.values(&p)?,
                    NamedField::Vector(v) => v.0.values(&p)?,
                    NamedField::OneForm(w) => w.0.values(&p)?,
                    NamedField::TwoTensor(t) => t.field().values(&p)?,
                    NamedField::Metric(g) => g.0.values(&p)?,
                    NamedField::Map(m) => m.apply(&p)?,
                };
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("field `{key}` at {p:?}")));
                }
            }
        }
        Ok(())
    }
}

/// Which stereographic projection a sphere chart uses. `South` projects from
/// the south pole, so the chart origin is the north pole `e_{m+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pole {
    South,
    North,
}

impl Pole {
    fn sign(self) -> f64 {
        match self {
            Pole::South => 1.0,
            Pole::North => -1.0,
        }
    }
}

/// Inverse stereographic map into the sphere of radius `r` in `R^{m+1}`.
pub fn stereo_embedding(x: &[Jet], r: f64, pole: Pole) -> Vec<Jet> {
    let r2 = r * r;
    let s: Jet = x.iter().map(|c| *c * *c).sum();
    let denom = (s + r2).recip();
    let mut out: Vec<Jet> = x.iter().map(|c| *c * denom * (2.0 * r2)).collect();
    out.push((r2 - s) * denom * (r * pole.sign()));
    out
}

/// Chart coordinates of an embedded sphere point.
pub fn stereo_project(point: &[f64], r: f64, pole: Pole) -> Vec<f64> {
    let m = point.len() - 1;
    let last = point[m] * pole.sign();
    point[..m].iter().map(|c| r * c / (r + last)).collect()
}

fn height(x: &[Jet], r: f64, pole: Pole, v: &[f64]) -> Jet {
    stereo_embedding(x, r, pole)
        .into_iter()
        .zip(v)
        .map(|(c, vk)| c * *vk)
        .sum()
}

/// Height function `h_v(x) = ⟨x, v⟩` on the sphere.
pub fn height_function(m: usize, r: f64, pole: Pole, v: &[f64]) -> ScalarField {
    let v = v.to_vec();
    ScalarField::analytic(m, move |x| height(x, r, pole, &v))
}

fn unit(v: Vec<f64>, dim: usize, key: &str) -> Result<Vec<f64>> {
    require(v.len() == dim, format!("`{key}` must have {dim} components, got {}", v.len()))?;
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    require(n > 0.0 && n.is_finite(), format!("`{key}` must be a nonzero vector"))?;
    Ok(v.into_iter().map(|c| c / n).collect())
}

fn north(m: usize) -> Vec<f64> {
    let mut e = vec![0.0; m + 1];
    e[m] = 1.0;
    e
}

pub fn euclidean(m: usize) -> Result<GeometrySpec> {
    check_dim(m, 1)?;
    let mut params = Params::new();
    params.insert("m".into(), ParamValue::Scalar(m as f64));
    Ok(GeometrySpec::new(
        "euclidean",
        format!("euclidean(m={m})"),
        Chart::cube(format!("euclidean-{m}"), m, 2.0),
        MetricField::euclidean(m),
        params,
    ))
}

/// `dx1² + e^{2x1} Σ_{i≥2} dx_i²` on `R^m`.
pub fn hyperbolic_warped_metric(m: usize) -> MetricField {
    MetricField::diagonal(m, move |x| {
        let w = (x[0] * 2.0).exp();
        let mut d = vec![w; m];
        d[0] = Jet::constant(1.0);
        d
    })
}

pub fn hyperbolic_warped(m: usize) -> Result<GeometrySpec> {
    check_dim(m, 2)?;
    let mut params = Params::new();
    params.insert("m".into(), ParamValue::Scalar(m as f64));
    Ok(GeometrySpec::new(
        "hyperbolic-warped",
        format!("hyperbolic-warped(m={m})"),
        Chart::cube(format!("warped-{m}"), m, 2.0),
        hyperbolic_warped_metric(m),
        params,
    ))
}

/// Conformal factor `4r⁴/(r²+|x|²)²` times the identity.
pub fn round_sphere_metric(m: usize, r: f64) -> MetricField {
    MetricField::diagonal(m, move |x| {
        let s: Jet = x.iter().map(|c| *c * *c).sum();
        let f = (s + r * r).powi(-2) * (4.0 * r.powi(4));
        vec![f; m]
    })
}

pub fn round_sphere(m: usize, r: f64, pole: Pole) -> Result<GeometrySpec> {
    check_dim(m, 2)?;
    require(r > 0.0, "sphere radius must satisfy r > 0")?;
    let mut params = Params::new();
    params.insert("m".into(), ParamValue::Scalar(m as f64));
    params.insert("r".into(), ParamValue::Scalar(r));
    let embed = Field::analytic(m, m + 1, move |x| stereo_embedding(x, r, pole));
    Ok(GeometrySpec::new(
        "round-sphere",
        format!("round-sphere(m={m}, r={r}, {pole:?} projection)"),
        Chart::cube(format!("stereographic-{m}-{pole:?}"), m, 2.0 * r),
        round_sphere_metric(m, r),
        params,
    )
    .with("embedding", NamedField::Map(SmoothMap::new(embed))))
}

/// `(4/κ)[g∘ + (4τ²/κ − 1) V♭∘⊗V♭∘]` in Hopf coordinates `(η, ξ1, ξ2)`.
pub fn berger_metric(kappa: f64, tau: f64) -> MetricField {
    let k = 4.0 * tau * tau / kappa - 1.0;
    let scale = 4.0 / kappa;
    MetricField::analytic(3, move |x| {
        let c2 = x[0].cos().sq();
        let s2 = x[0].sin().sq();
        let round = [Jet::constant(1.0), c2, s2];
        let vflat = [Jet::constant(0.0), c2, s2];
        let mut out = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let base = if i == j { round[i] } else { Jet::constant(0.0) };
                out.push((base + vflat[i] * vflat[j] * k) * scale);
            }
        }
        out
    })
}

pub fn berger_sphere(kappa: f64, tau: f64) -> Result<GeometrySpec> {
    require(kappa > 0.0, format!("κ > 0 violated (κ = {kappa})"))?;
    require(tau != 0.0, "τ ≠ 0 violated (τ = 0)")?;
    let mut params = Params::new();
    params.insert("kappa".into(), ParamValue::Scalar(kappa));
    params.insert("tau".into(), ParamValue::Scalar(tau));
    let chart = Chart::new(
        format!("hopf-{kappa}-{tau}"),
        vec![0.0, 0.0, 0.0],
        vec![FRAC_PI_2, 2.0 * PI, 2.0 * PI],
    )?;
    let metric = berger_metric(kappa, tau);
    let c = kappa / (4.0 * tau);
    let e3 = VectorField::analytic(3, move |_| {
        vec![Jet::constant(0.0), Jet::constant(c), Jet::constant(c)]
    });
    let hopf = VectorField::analytic(3, |_| {
        vec![Jet::constant(0.0), Jet::constant(1.0), Jet::constant(1.0)]
    });
    let e3_flat = flat_field(&e3, &metric);
    Ok(GeometrySpec::new(
        "berger",
        format!("berger(κ={kappa}, τ={tau})"),
        chart,
        metric,
        params,
    )
    .with("E3", NamedField::Vector(e3))
    .with("V", NamedField::Vector(hopf))
    .with("E3_flat", NamedField::OneForm(e3_flat)))
}

/// `ω_N = −1/(nθλ) Σ dy_γ/(y_γ − a_γ)`.
pub fn punctured_target_form(a: &[f64], theta: f64, lambda: f64) -> OneForm {
    let a = a.to_vec();
    let n = a.len();
    let coef = -1.0 / (n as f64 * theta * lambda);
    OneForm::analytic(n, move |y| {
        y.iter()
            .zip(&a)
            .map(|(yc, ac)| (*yc - *ac).recip() * coef)
            .collect()
    })
}

pub fn punctured_euclidean(a: &[f64], theta: f64, lambda: f64) -> Result<GeometrySpec> {
    let n = a.len();
    check_dim(n, 1)?;
    require(a.iter().all(|v| *v > 0.0), "a_γ > 0 violated")?;
    require(theta != 0.0 && lambda != 0.0, "ω_N needs θ ≠ 0 and λ ≠ 0")?;
    let mut params = Params::new();
    params.insert("n".into(), ParamValue::Scalar(n as f64));
    params.insert("a".into(), ParamValue::Vector(a.to_vec()));
    params.insert("theta".into(), ParamValue::Scalar(theta));
    params.insert("lambda".into(), ParamValue::Scalar(lambda));
    let chart = Chart::new(
        format!("punctured-{n}"),
        a.to_vec(),
        a.iter().map(|v| v + 1e3).collect(),
    )?;
    Ok(GeometrySpec::new(
        "punctured-euclidean",
        format!("punctured-euclidean(n={n})"),
        chart,
        MetricField::euclidean(n),
        params,
    )
    .with("omega_N", NamedField::OneForm(punctured_target_form(a, theta, lambda))))
}

#[derive(Clone, Debug)]
pub enum Structure {
    /// `(X, ω)`.
    Vector { x: VectorField, omega: OneForm },
    /// `X = ∇η`, `ω = dξ`.
    Gradient { eta: ScalarField, xi: ScalarField },
}

#[derive(Clone, Debug)]
pub enum Lambda {
    Constant(f64),
    Field(ScalarField),
}

impl Lambda {
    pub fn at(&self, p: &[f64]) -> Result<f64> {
        match self {
            Lambda::Constant(c) => Ok(*c),
            Lambda::Field(f) => f.value(p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolitonKind {
    Soliton,
    AlmostSoliton,
    Gradient,
}

/// Target data for a modified Ricci-harmonic soliton.
#[derive(Clone, Debug)]
pub struct HarmonicMapData {
    pub target: GeometrySpec,
    pub map: SmoothMap,
    pub omega_target: OneForm,
}

#[derive(Clone, Debug)]
pub struct SolitonData {
    pub name: String,
    pub label: String,
    pub geometry: GeometrySpec,
    pub structure: Structure,
    pub lambda: Lambda,
    pub theta: f64,
    pub kind: SolitonKind,
    pub harmonic: Option<HarmonicMapData>,
    pub params: Params,
    /// Stereographic projection used, for sphere data.
    pub pole: Option<Pole>,
    /// The same structure written in the opposite stereographic chart.
    pub antipodal: Option<Box<SolitonData>>,
}

impl SolitonData {
    /// This structure expressed in the chart for `pole`, if available.
    pub fn in_chart(&self, pole: Pole) -> Result<&SolitonData> {
        match (self.pole, &self.antipodal) {
            (Some(p), _) if p == pole => Ok(self),
            (Some(_), Some(other)) if other.pole == Some(pole) => Ok(other),
            _ => Err(Error::Unsupported(format!(
                "{} has no {pole:?}-projection chart (compact sphere data only)",
                self.label
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn metric(&self) -> &MetricField {
        &self.geometry.metric
    }

    /// `X`, or `∇η` for gradient structures.
    pub fn vector_field(&self) -> VectorField {
        match &self.structure {
            Structure::Vector { x, .. } => x.clone(),
            Structure::Gradient { eta, .. } => gradient_field(eta, &self.geometry.metric),
        }
    }

    /// `ω`, or `dξ` for gradient structures.
    pub fn one_form(&self) -> OneForm {
        match &self.structure {
            Structure::Vector { omega, .. } => omega.clone(),
            Structure::Gradient { xi, .. } => OneForm::exact(xi),
        }
    }

    fn validate(&self) -> Result<()> {
        require(self.theta > 0.0, format!("θ > 0 violated (θ = {})", self.theta))?;
        if self.kind == SolitonKind::Gradient {
            require(
                matches!(self.structure, Structure::Gradient { .. }),
                "gradient kind must carry η and ξ",
            )?;
        }
        Ok(())
    }
}

pub fn euclidean_soliton(m: usize) -> Result<SolitonData> {
    let geometry = euclidean(m)?;
    Ok(SolitonData {
        name: "euclidean-soliton".into(),
        label: format!("euclidean-soliton(m={m})"),
        params: geometry.params.clone(),
        geometry,
        structure: Structure::Vector {
            x: VectorField::zero(m),
            omega: OneForm::zero(m),
        },
        lambda: Lambda::Constant(0.0),
        theta: 1.0,
        kind: SolitonKind::Soliton,
        harmonic: None,
        pole: None,
        antipodal: None,
    })
}

/// Flat gradient data with `η = ξ = 0`, `λ = 0`.
pub fn euclidean_gradient_soliton(m: usize) -> Result<SolitonData> {
    let mut d = euclidean_soliton(m)?;
    d.structure = Structure::Gradient {
        eta: ScalarField::constant(m, 0.0),
        xi: ScalarField::constant(m, 0.0),
    };
    d.kind = SolitonKind::Gradient;
    Ok(d)
}

pub fn berger_soliton(kappa: f64, tau: f64) -> Result<SolitonData> {
    let geometry = berger_sphere(kappa, tau)?;
    require(
        4.0 * tau * tau > kappa,
        format!("4τ² > κ violated (4τ² = {}, κ = {kappa})", 4.0 * tau * tau),
    )?;
    let x = geometry.vector("E3")?.clone();
    let omega = geometry.one_form("E3_flat")?.clone();
    let d = SolitonData {
        name: "berger-soliton".into(),
        label: format!("berger-soliton(κ={kappa}, τ={tau})"),
        params: geometry.params.clone(),
        geometry,
        structure: Structure::Vector { x, omega },
        lambda: Lambda::Constant(kappa - 2.0 * tau * tau),
        theta: 4.0 * tau * tau - kappa,
        kind: SolitonKind::Soliton,
        harmonic: None,
        pole: None,
        antipodal: None,
    };
    d.validate()?;
    Ok(d)
}

/// The vector field `(m−λ−1, 2λx_2, …, 2λx_m)`.
pub fn warped_soliton_field(m: usize, lambda: f64) -> VectorField {
    VectorField::analytic(m, move |x| {
        let mut out: Vec<Jet> = x.iter().map(|c| *c * (2.0 * lambda)).collect();
        out[0] = Jet::constant(m as f64 - lambda - 1.0);
        out
    })
}

pub fn warped_soliton(m: usize, lambda: f64, a: &[f64], b: &[f64]) -> Result<SolitonData> {
    let geometry = hyperbolic_warped(m)?;
    require(
        lambda < 1.0 - m as f64,
        format!("λ < 1 − m violated (λ = {lambda}, 1 − m = {})", 1.0 - m as f64),
    )?;
    let n = a.len();
    require(n >= 1, "target dimension n ≥ 1 violated")?;
    require(b.len() == n, format!("b must have n = {n} components, got {}", b.len()))?;
    require(a.iter().all(|v| *v > 0.0), "a_γ > 0 violated")?;
    require(b.iter().all(|v| *v > 0.0), "b_γ > 0 violated")?;
    let theta = 1.0 / (1.0 - lambda - m as f64);
    let target = punctured_euclidean(a, theta, lambda)?;
    let omega_target = target.one_form("omega_N")?.clone();
    let (av, bv) = (a.to_vec(), b.to_vec());
    let map = SmoothMap::analytic(m, n, move |x| {
        let e = (x[0] * -lambda).exp();
        av.iter().zip(&bv).map(|(ac, bc)| e * *bc + *ac).collect()
    });
    let x = warped_soliton_field(m, lambda);
    let omega = OneForm::analytic(m, move |_| {
        let mut w = vec![Jet::constant(0.0); m];
        w[0] = Jet::constant(1.0 / theta);
        w
    });
    let mut params = geometry.params.clone();
    params.insert("lambda".into(), ParamValue::Scalar(lambda));
    params.insert("n".into(), ParamValue::Scalar(n as f64));
    params.insert("a".into(), ParamValue::Vector(a.to_vec()));
    params.insert("b".into(), ParamValue::Vector(b.to_vec()));
    let d = SolitonData {
        name: "warped-soliton".into(),
        label: format!("warped-soliton(m={m}, λ={lambda}, n={n})"),
        geometry: geometry.with("phi", NamedField::Map(map.clone())),
        structure: Structure::Vector { x, omega },
        lambda: Lambda::Constant(lambda),
        theta,
        kind: SolitonKind::Soliton,
        harmonic: Some(HarmonicMapData {
            target,
            map,
            omega_target,
        }),
        params,
        pole: None,
        antipodal: None,
    };
    d.validate()?;
    Ok(d)
}

/// Parameters of the gradient almost-soliton structures on the unit sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObataParams {
    pub m: usize,
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl ObataParams {
    pub fn new(m: usize, theta: f64, c1: f64, c2: f64, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        check_dim(m, 2)?;
        require(theta > 0.0, format!("θ > 0 violated (θ = {theta})"))?;
        Ok(Self {
            m,
            theta,
            c1,
            c2,
            v: unit(v, m + 1, "v")?,
            w: unit(w, m + 1, "w")?,
        })
    }

    /// `v = w = e_{m+1}`.
    pub fn polar(m: usize, theta: f64, c1: f64, c2: f64) -> Result<Self> {
        Self::new(m, theta, c1, c2, north(m), north(m))
    }

    pub fn xi(&self, pole: Pole) -> ScalarField {
        let (m, c1, v) = (self.m, self.c1, self.v.clone());
        ScalarField::analytic(m, move |x| c1 - height(x, 1.0, pole, &v) / m as f64)
    }

    pub fn eta(&self, pole: Pole) -> ScalarField {
        let (m, c1, c2, th) = (self.m, self.c1, self.c2, self.theta);
        let (v, w) = (self.v.clone(), self.w.clone());
        ScalarField::analytic(m, move |x| {
            let mf = m as f64;
            let xi = c1 - height(x, 1.0, pole, &v) / mf;
            xi.sq() * (0.5 * th) - height(x, 1.0, pole, &w) / mf + c2
        })
    }

    pub fn lambda(&self, pole: Pole) -> ScalarField {
        let (m, c1, th) = (self.m, self.c1, self.theta);
        let (v, w) = (self.v.clone(), self.w.clone());
        ScalarField::analytic(m, move |x| {
            let mf = m as f64;
            let hv = height(x, 1.0, pole, &v) / mf;
            (c1 - hv) * hv * th + height(x, 1.0, pole, &w) / mf + (mf - 1.0)
        })
    }

    /// Data in the chart for `pole`, carrying the opposite chart along.
    pub fn soliton(&self, pole: Pole) -> Result<SolitonData> {
        let other = match pole {
            Pole::South => Pole::North,
            Pole::North => Pole::South,
        };
        let mut d = self.soliton_single(pole)?;
        d.antipodal = Some(Box::new(self.soliton_single(other)?));
        Ok(d)
    }

    fn soliton_single(&self, pole: Pole) -> Result<SolitonData> {
        let geometry = round_sphere(self.m, 1.0, pole)?
            .with("h_v", NamedField::Scalar(height_function(self.m, 1.0, pole, &self.v)))
            .with("h_w", NamedField::Scalar(height_function(self.m, 1.0, pole, &self.w)));
        let mut params = geometry.params.clone();
        params.insert("theta".into(), ParamValue::Scalar(self.theta));
        params.insert("c1".into(), ParamValue::Scalar(self.c1));
        params.insert("c2".into(), ParamValue::Scalar(self.c2));
        params.insert("v".into(), ParamValue::Vector(self.v.clone()));
        params.insert("w".into(), ParamValue::Vector(self.w.clone()));
        let d = SolitonData {
            name: "obata-sphere".into(),
            label: format!(
                "obata-sphere(m={}, θ={}, c1={}, c2={})",
                self.m, self.theta, self.c1, self.c2
            ),
            geometry,
            structure: Structure::Gradient {
                eta: self.eta(pole),
                xi: self.xi(pole),
            },
            lambda: Lambda::Field(self.lambda(pole)),
            theta: self.theta,
            kind: SolitonKind::Gradient,
            harmonic: None,
            params,
            pole: Some(pole),
            antipodal: None,
        };
        d.validate()?;
        Ok(d)
    }
}

fn einstein_sphere_single(m: usize, pole: Pole) -> Result<SolitonData> {
    let geometry = round_sphere(m, 1.0, pole)?;
    Ok(SolitonData {
        name: "einstein-sphere".into(),
        label: format!("einstein-sphere(m={m})"),
        params: geometry.params.clone(),
        geometry,
        structure: Structure::Gradient {
            eta: ScalarField::constant(m, 0.0),
            xi: ScalarField::constant(m, 0.0),
        },
        lambda: Lambda::Constant(m as f64 - 1.0),
        theta: 1.0,
        kind: SolitonKind::Gradient,
        harmonic: None,
        pole: Some(pole),
        antipodal: None,
    })
}

/// The unit sphere with `η = ξ = 0` and `λ = m − 1`.
pub fn einstein_sphere(m: usize) -> Result<SolitonData> {
    let mut d = einstein_sphere_single(m, Pole::South)?;
    d.antipodal = Some(Box::new(einstein_sphere_single(m, Pole::North)?));
    Ok(d)
}

/// The warped soliton vector field, its Euclidean potential, and its flat dual under
/// the warped metric.
pub fn non_gradient_witness(m: usize, lambda: f64) -> Result<GeometrySpec> {
    let mut g = hyperbolic_warped(m)?;
    g.name = "non-gradient-witness".into();
    g.label = format!("non-gradient-witness(m={m}, λ={lambda})");
    g.params.insert("lambda".into(), ParamValue::Scalar(lambda));
    let x = warped_soliton_field(m, lambda);
    let potential = ScalarField::analytic(m, move |x| {
        let r2: Jet = x[1..].iter().map(|c| *c * *c).sum();
        x[0] * (m as f64 - lambda - 1.0) + r2 * lambda
    });
    let x_flat = flat_field(&x, &g.metric);
    let dx_flat = TensorField2::analytic(m, false, move |x| {
        let e = (x[0] * 2.0).exp() * (4.0 * lambda);
        let mut out = vec![Jet::constant(0.0); m * m];
        for i in 1..m {
            out[i] = e * x[i];
            out[i * m] = -(e * x[i]);
        }
        out
    });
    Ok(g.with("X", NamedField::Vector(x))
        .with("u", NamedField::Scalar(potential))
        .with("X_flat", NamedField::OneForm(x_flat))
        .with("dX_flat", NamedField::TwoTensor(dx_flat))
        .with("euclidean", NamedField::Metric(MetricField::euclidean(m))))
}

/// `(dω)_ij = ∂_i ω_j − ∂_j ω_i`.
pub fn exterior_derivative_oneform(w: &OneForm, p: &[f64]) -> Result<DMatrix<f64>> {
    let jets = w.jets(p, 1)?;
    let m = w.dim();
    Ok(DMatrix::from_fn(m, m, |i, j| jets[j].d[i] - jets[i].d[j]))
}

/// `dω` as a (non-symmetric) tensor field.
pub fn exterior_derivative_field(w: &OneForm) -> TensorField2 {
    let w2 = w.clone();
    let m = w.dim();
    let field = Field::from_jets(m, m * m, 0, OracleKind::Composite, move |p, _| {
        let d = exterior_derivative_oneform(&w2, p)?;
        Ok((0..m * m).map(|k| Jet::constant(d[(k / m, k % m)])).collect())
    });
    TensorField2::new(field, false).expect("component count matches")
}

#[derive(Clone, Debug)]
pub enum Built {
    Geometry(GeometrySpec),
    Soliton(SolitonData),
}

impl Built {
    pub fn geometry(&self) -> &GeometrySpec {
        match self {
            Built::Geometry(g) => g,
            Built::Soliton(s) => &s.geometry,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Built::Geometry(g) => &g.label,
            Built::Soliton(s) => &s.label,
        }
    }
}

/// Builds a catalog entry by name and checks its invariants at
/// [`BUILD_CHECK_POINTS`] sampled points.
pub fn build(name: &str, params: &Params) -> Result<Built> {
    let r = ParamReader::new(params);
    let built = match name {
        "euclidean" => Built::Geometry(euclidean(r.int("m", Some(3))?)?),
        "hyperbolic-warped" => Built::Geometry(hyperbolic_warped(r.int("m", Some(2))?)?),
        "round-sphere" => Built::Geometry(round_sphere(
            r.int("m", Some(2))?,
            r.scalar("r", Some(1.0))?,
            Pole::South,
        )?),
        "berger" => Built::Geometry(berger_sphere(
            r.scalar("kappa", Some(9.0))?,
            r.scalar("tau", Some(2.0))?,
        )?),
        "punctured-euclidean" => {
            let n = r.int("n", Some(1))?;
            Built::Geometry(punctured_euclidean(
                &r.vector("a", vec![1.0; n])?,
                r.scalar("theta", Some(1.0))?,
                r.scalar("lambda", Some(-2.0))?,
            )?)
        }
        "euclidean-soliton" => Built::Soliton(euclidean_soliton(r.int("m", Some(3))?)?),
        "einstein-sphere" => Built::Soliton(einstein_sphere(r.int("m", Some(2))?)?),
        "berger-soliton" => Built::Soliton(berger_soliton(
            r.scalar("kappa", Some(9.0))?,
            r.scalar("tau", Some(2.0))?,
        )?),
        "warped-soliton" => {
            let m = r.int("m", Some(2))?;
            let n = r.int("n", Some(1))?;
            Built::Soliton(warped_soliton(
                m,
                r.scalar("lambda", Some(-(m as f64)))?,
                &r.vector("a", vec![1.0; n])?,
                &r.vector("b", vec![1.0; n])?,
            )?)
        }
        "obata-sphere" => {
            let m = r.int("m", Some(2))?;
            let p = ObataParams::new(
                m,
                r.scalar("theta", Some(1.0))?,
                r.scalar("c1", Some(0.0))?,
                r.scalar("c2", Some(0.0))?,
                r.vector("v", north(m))?,
                r.vector("w", north(m))?,
            )?;
            Built::Soliton(p.soliton(Pole::South)?)
        }
        "non-gradient-witness" => {
            let m = r.int("m", Some(2))?;
            Built::Geometry(non_gradient_witness(m, r.scalar("lambda", Some(-(m as f64)))?)?)
        }
        other => {
            return Err(Error::UnknownName {
                name: other.to_string(),
                available: CATALOG.join(", "),
            })
        }
    };
    r.finish()?;
    built.geometry().check_invariants(BUILD_CHECK_POINTS, 0)?;
    Ok(built)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(&str, f64)]) -> Params {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), ParamValue::Scalar(*v)))
            .collect()
    }

    #[test]
    fn berger_with_kappa_four_tau_one_is_round() {
        let g = berger_sphere(4.0, 1.0).unwrap();
        for pt in g.sample(100, 3) {
            let m = g.metric.matrix(&pt).unwrap();
            let (c, s) = (pt[0].cos(), pt[0].sin());
            let round = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, c * c, s * s]));
            assert!((m - round).amax() < 1e-15);
        }
    }

    #[test]
    fn warped_theta_formula() {
        let d = warped_soliton(2, -2.0, &[1.0], &[1.0]).unwrap();
        assert_eq!(d.theta, 1.0);
        let d = warped_soliton(3, -3.0, &[1.0, 2.0], &[0.5, 1.0]).unwrap();
        assert_eq!(d.theta, 1.0);
    }

    #[test]
    fn obata_xi_at_north_pole() {
        let o = ObataParams::polar(2, 1.0, 0.0, 0.0).unwrap();
        assert!((o.xi(Pole::South).value(&[0.0, 0.0]).unwrap() + 0.5).abs() < 1e-15);
        // the same point seen from the other chart is at infinity; check the
        // south pole instead
        assert!((o.xi(Pole::North).value(&[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stereographic_projection_roundtrip() {
        for pole in [Pole::South, Pole::North] {
            let x = [0.3, -0.8, 0.1];
            let e: Vec<f64> = stereo_embedding(&Jet::seed(&x), 1.7, pole).iter().map(|j| j.v).collect();
            let n2: f64 = e.iter().map(|c| c * c).sum();
            assert!((n2 - 1.7 * 1.7).abs() < 1e-13);
            let back = stereo_project(&e, 1.7, pole);
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn parameter_violations_name_the_inequality() {
        let err = build("berger", &p(&[("kappa", -1.0), ("tau", 1.0)])).unwrap_err();
        assert!(err.to_string().contains("κ > 0"), "{err}");
        let err = build("berger", &p(&[("kappa", 1.0), ("tau", 0.0)])).unwrap_err();
        assert!(err.to_string().contains("τ ≠ 0"), "{err}");
        let err = build("warped-soliton", &p(&[("m", 2.0), ("lambda", -0.5)])).unwrap_err();
        assert!(err.to_string().contains("λ < 1 − m"), "{err}");
        let err = build("berger-soliton", &p(&[("kappa", 9.0), ("tau", 1.0)])).unwrap_err();
        assert!(err.to_string().contains("4τ² > κ"), "{err}");
        let mut q = p(&[("m", 2.0)]);
        q.insert("a".into(), ParamValue::Vector(vec![-1.0]));
        assert!(build("warped-soliton", &q).is_err());
    }

    #[test]
    fn unknown_names_and_keys_rejected() {
        assert!(matches!(build("torus", &Params::new()), Err(Error::UnknownName { .. })));
        assert!(matches!(
            build("euclidean", &p(&[("bogus", 1.0)])),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn every_catalog_entry_builds_with_defaults() {
        for name in CATALOG {
            build(name, &Params::new()).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn exterior_derivative_examples() {
        let w = OneForm::analytic(2, |_| vec![Jet::constant(1.0), Jet::constant(0.0)]);
        assert_eq!(exterior_derivative_oneform(&w, &[0.3, 0.2]).unwrap().amax(), 0.0);

        let g = non_gradient_witness(2, -2.0).unwrap();
        let d = exterior_derivative_oneform(g.one_form("X_flat").unwrap(), &[0.0, 1.0]).unwrap();
        assert!((d[(0, 1)] + 8.0).abs() < 1e-13);
        assert!((d[(1, 0)] - 8.0).abs() < 1e-13);

        let euclid_flat = flat_field(g.vector("X").unwrap(), &MetricField::euclidean(2));
        for pt in g.sample(20, 1) {
            assert!(exterior_derivative_oneform(&euclid_flat, &pt).unwrap().amax() < 1e-14);
        }
    }
}
